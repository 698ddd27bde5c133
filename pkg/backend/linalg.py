"""
Exact rational linear algebra: Gaussian elimination on small dense
matrices and an incremental sparse echelon form for Macaulay matrices.
"""
import heapq
import logging
from fractions import Fraction
from typing import Dict, List, Sequence

logger = logging.getLogger(__name__)

Matrix = List[List[Fraction]]
SparseRow = Dict[int, Fraction]


def _copy(A: Sequence[Sequence]) -> Matrix:
    return [[Fraction(v) for v in row] for row in A]


def determinant(A: Sequence[Sequence]) -> Fraction:
    """Determinant by fraction-exact Gaussian elimination."""
    M = _copy(A)
    n = len(M)
    det = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if M[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            M[col], M[pivot] = M[pivot], M[col]
            det = -det
        p = M[col][col]
        det *= p
        for r in range(col + 1, n):
            factor = M[r][col] / p
            if factor:
                M[r] = [a - factor * b for a, b in zip(M[r], M[col])]
    return det


def inverse(A: Sequence[Sequence]) -> Matrix:
    """Gauss-Jordan inverse; raises ValueError on a singular matrix."""
    n = len(A)
    M = [row + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(_copy(A))]
    for col in range(n):
        pivot = next((r for r in range(col, n) if M[r][col] != 0), None)
        if pivot is None:
            raise ValueError("Singular matrix has no inverse")
        M[col], M[pivot] = M[pivot], M[col]
        p = M[col][col]
        M[col] = [v / p for v in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                factor = M[r][col]
                M[r] = [a - factor * b for a, b in zip(M[r], M[col])]
    return [row[n:] for row in M]


def matmul(A: Sequence[Sequence], B: Sequence[Sequence]) -> Matrix:
    inner = len(B)
    if any(len(row) != inner for row in A):
        raise ValueError("Incompatible matrix shapes")
    cols = len(B[0]) if B else 0
    return [[sum((Fraction(A[i][k]) * B[k][j] for k in range(inner)), Fraction(0)) for j in range(cols)]
            for i in range(len(A))]


class RowEchelon:
    """
    Incrementally maintained echelon basis of sparse rational rows.

    Each stored row is normalised to 1 at its pivot, which is its smallest
    column index; reducing a new row only ever introduces larger columns,
    so a heap of pending columns drives the elimination.
    """

    def __init__(self):
        self.pivots: Dict[int, SparseRow] = {}

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def reduce(self, row: SparseRow, stop_at_new_pivot: bool = True) -> SparseRow:
        """Residual of `row` after elimination against the stored pivots."""
        row = {c: Fraction(v) for c, v in row.items() if v}
        heap = list(row)
        heapq.heapify(heap)
        seen = set()
        while heap:
            col = heapq.heappop(heap)
            if col in seen or col not in row:
                continue
            seen.add(col)
            pivot_row = self.pivots.get(col)
            if pivot_row is None:
                if stop_at_new_pivot:
                    break
                continue
            factor = row[col]
            for c, v in pivot_row.items():
                new = row.get(c, Fraction(0)) - factor * v
                if new:
                    if c not in row:
                        heapq.heappush(heap, c)
                    row[c] = new
                else:
                    row.pop(c, None)
        return row

    def add(self, row: SparseRow) -> bool:
        """Insert `row`; True when it enlarged the span."""
        residual = self.reduce(row)
        if not residual:
            return False
        lead = min(residual)
        scale = residual[lead]
        self.pivots[lead] = {c: v / scale for c, v in residual.items()}
        return True
