"""
Exact multivariate polynomials over the rationals.

`Poly` is the carrier for every germ, ideal generator and Jacobian in the
engine. Coefficients are `fractions.Fraction`; nothing here ever rounds.
Variables are numbered from 1 (z1..zN) in the public API.
"""
import hashlib
import logging
import math
import re
from fractions import Fraction
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import sympy
from sympy.polys.polyerrors import GeneratorsNeeded, PolynomialError
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

import linalg
from errors import DimensionError, DomainError, ParseError

logger = logging.getLogger(__name__)

Exponent = Tuple[int, ...]
Scalar = Union[int, Fraction]
INFINITY = math.inf

_PARSE_TRANSFORMS = standard_transformations + (convert_xor,)
_VARIABLE = re.compile(r"\b([zw])(\d+)\b")


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"Exact rational coefficient expected, got {type(value).__name__}")


def _add_exp(a: Exponent, b: Exponent) -> Exponent:
    return tuple(x + y for x, y in zip(a, b))


def degrevlex_key(exp: Exponent) -> tuple:
    return (sum(exp), tuple(-e for e in reversed(exp)))


class Poly:
    """Immutable sparse polynomial: exponent tuple -> nonzero Fraction."""

    __slots__ = ("nvars", "_terms", "_hash")

    def __init__(self, nvars: int, terms: Optional[Mapping[Exponent, Scalar]] = None):
        if nvars < 0:
            raise DimensionError(f"Variable count must be non-negative, got {nvars}")
        clean: Dict[Exponent, Fraction] = {}
        for exp, coef in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != nvars:
                raise DimensionError(f"Monomial {exp} has length {len(exp)}, ring has {nvars} variables")
            if any(e < 0 for e in exp):
                raise DimensionError(f"Negative exponent in {exp}")
            c = _as_fraction(coef)
            if c:
                clean[exp] = clean.get(exp, Fraction(0)) + c
                if not clean[exp]:
                    del clean[exp]
        self.nvars = nvars
        self._terms = clean
        self._hash = None

    @classmethod
    def _raw(cls, nvars: int, terms: Dict[Exponent, Fraction]) -> "Poly":
        # trusted constructor: terms already pruned and validated
        p = cls.__new__(cls)
        p.nvars = nvars
        p._terms = terms
        p._hash = None
        return p

    # constructors

    @classmethod
    def zero(cls, nvars: int) -> "Poly":
        return cls._raw(nvars, {})

    @classmethod
    def constant(cls, nvars: int, value: Scalar) -> "Poly":
        c = _as_fraction(value)
        return cls._raw(nvars, {(0,) * nvars: c} if c else {})

    @classmethod
    def one(cls, nvars: int) -> "Poly":
        return cls.constant(nvars, 1)

    @classmethod
    def variable(cls, nvars: int, i: int) -> "Poly":
        _check_index(i, nvars)
        exp = [0] * nvars
        exp[i - 1] = 1
        return cls._raw(nvars, {tuple(exp): Fraction(1)})

    @classmethod
    def monomial(cls, exp: Sequence[int], coef: Scalar = 1) -> "Poly":
        return cls(len(exp), {tuple(exp): coef})

    @classmethod
    def linear_form(cls, coefficients: Sequence[Scalar]) -> "Poly":
        n = len(coefficients)
        terms = {}
        for i, c in enumerate(coefficients):
            exp = [0] * n
            exp[i] = 1
            terms[tuple(exp)] = c
        return cls(n, terms)

    # inspection

    @property
    def terms(self) -> Mapping[Exponent, Fraction]:
        return MappingProxyType(self._terms)

    def items(self) -> List[Tuple[Exponent, Fraction]]:
        """Terms in descending degree-reverse-lexicographic order."""
        return sorted(self._terms.items(), key=lambda t: degrevlex_key(t[0]), reverse=True)

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(not any(exp) for exp in self._terms)

    @property
    def constant_term(self) -> Fraction:
        return self._terms.get((0,) * self.nvars, Fraction(0))

    def is_unit(self) -> bool:
        """Invertible as a germ at the origin."""
        return self.constant_term != 0

    def coefficient(self, exp: Sequence[int]) -> Fraction:
        return self._terms.get(tuple(exp), Fraction(0))

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(e) for e in self._terms), default=-1)

    def order(self) -> Union[int, float]:
        """Lowest total degree of a term; infinity for zero."""
        return min((sum(e) for e in self._terms), default=INFINITY)

    def degree_in(self, i: int) -> int:
        _check_index(i, self.nvars)
        return max((e[i - 1] for e in self._terms), default=-1)

    def ord_in_variable(self, i: int) -> Union[int, float]:
        _check_index(i, self.nvars)
        k = i - 1
        best = INFINITY
        for exp in self._terms:
            if all(e == 0 for j, e in enumerate(exp) if j != k):
                best = min(best, exp[k])
        return best

    def variables(self) -> List[int]:
        """1-based indices of the variables that occur."""
        used = set()
        for exp in self._terms:
            used.update(j + 1 for j, e in enumerate(exp) if e)
        return sorted(used)

    # arithmetic

    def _check(self, other: "Poly") -> None:
        if self.nvars != other.nvars:
            raise DimensionError(f"Ring mismatch: {self.nvars} vs {other.nvars} variables")

    def _coerce(self, other) -> "Poly":
        if isinstance(other, Poly):
            self._check(other)
            return other
        if isinstance(other, (int, Fraction)):
            return Poly.constant(self.nvars, other)
        return NotImplemented

    def __add__(self, other) -> "Poly":
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for exp, c in other._terms.items():
            v = out.get(exp)
            if v is None:
                out[exp] = c
            else:
                v += c
                if v:
                    out[exp] = v
                else:
                    del out[exp]
        return Poly._raw(self.nvars, out)

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly._raw(self.nvars, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other) -> "Poly":
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other) -> "Poly":
        return (-self) + other

    def __mul__(self, other) -> "Poly":
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        if not isinstance(other, Poly):
            return NotImplemented
        self._check(other)
        out: Dict[Exponent, Fraction] = {}
        small, large = (self, other) if len(self) <= len(other) else (other, self)
        for e1, c1 in small._terms.items():
            for e2, c2 in large._terms.items():
                exp = tuple(x + y for x, y in zip(e1, e2))
                v = out.get(exp)
                out[exp] = c1 * c2 if v is None else v + c1 * c2
        return Poly._raw(self.nvars, {e: c for e, c in out.items() if c})

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Poly":
        if isinstance(other, (int, Fraction)):
            if other == 0:
                raise ZeroDivisionError("Division of a polynomial by zero")
            return self.scale(Fraction(1) / _as_fraction(other))
        return NotImplemented

    def __pow__(self, exponent: int) -> "Poly":
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError(f"Non-negative integer power expected, got {exponent!r}")
        result = Poly.one(self.nvars)
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            exponent >>= 1
            if exponent:
                base = base * base
        return result

    def scale(self, c: Scalar) -> "Poly":
        c = _as_fraction(c)
        if not c:
            return Poly.zero(self.nvars)
        return Poly._raw(self.nvars, {e: v * c for e, v in self._terms.items()})

    def mul_term(self, exp: Exponent, coef: Scalar) -> "Poly":
        coef = _as_fraction(coef)
        if not coef:
            return Poly.zero(self.nvars)
        return Poly._raw(self.nvars, {_add_exp(e, exp): v * coef for e, v in self._terms.items()})

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            return self == Poly.constant(self.nvars, other)
        if not isinstance(other, Poly):
            return NotImplemented
        return self.nvars == other.nvars and self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.nvars, frozenset(self._terms.items())))
        return self._hash

    # calculus and substitution

    def derivative(self, i: int) -> "Poly":
        _check_index(i, self.nvars)
        k = i - 1
        out = {}
        for exp, c in self._terms.items():
            e = exp[k]
            if e:
                new = list(exp)
                new[k] = e - 1
                out[tuple(new)] = c * e
        return Poly._raw(self.nvars, out)

    def directional_derivative(self, direction: Sequence[Scalar]) -> "Poly":
        if len(direction) != self.nvars:
            raise DimensionError(f"Direction of length {len(direction)} in a ring with {self.nvars} variables")
        result = Poly.zero(self.nvars)
        for i, v in enumerate(direction, start=1):
            if v:
                result = result + self.derivative(i).scale(v)
        return result

    def compose(self, gs: Sequence["Poly"]) -> "Poly":
        return compose(self, gs)

    def truncate(self, degree: int) -> "Poly":
        """Drop every term of total degree >= `degree`."""
        return Poly._raw(self.nvars, {e: c for e, c in self._terms.items() if sum(e) < degree})

    def embed(self, nvars: int, offset: int = 0) -> "Poly":
        """Same polynomial with its variables placed at slots offset+1..offset+self.nvars of a larger ring."""
        if offset < 0 or offset + self.nvars > nvars:
            raise DimensionError(f"Cannot place {self.nvars} variables at offset {offset} in a ring of {nvars}")
        pad_l, pad_r = (0,) * offset, (0,) * (nvars - offset - self.nvars)
        return Poly._raw(nvars, {pad_l + e + pad_r: c for e, c in self._terms.items()})

    def drop_leading(self, count: int) -> "Poly":
        """Forget the first `count` variables; they must not occur."""
        out = {}
        for exp, c in self._terms.items():
            if any(exp[:count]):
                raise DimensionError(f"Variable among the first {count} still occurs in {self}")
            out[exp[count:]] = c
        return Poly._raw(self.nvars - count, out)

    # text

    def to_text(self, prefix: str = "z") -> str:
        if not self._terms:
            return "0"
        pieces = []
        for exp, c in self.items():
            factors = []
            for j, e in enumerate(exp, start=1):
                if e == 1:
                    factors.append(f"{prefix}{j}")
                elif e > 1:
                    factors.append(f"{prefix}{j}^{e}")
            mag = abs(c)
            if not factors:
                body = str(mag)
            elif mag == 1:
                body = "*".join(factors)
            else:
                body = f"{mag}*" + "*".join(factors)
            sign = "-" if c < 0 else "+"
            pieces.append((sign, body))
        first_sign, first = pieces[0]
        text = ("-" if first_sign == "-" else "") + first
        for sign, body in pieces[1:]:
            text += f" {sign} {body}"
        return text

    def __str__(self) -> str:
        return self.to_text()

    def __repr__(self) -> str:
        return f"Poly({self.nvars}, {self.to_text()!r})"

    def digest(self) -> str:
        canon = ";".join(f"{list(e)}:{c}" for e, c in self.items())
        return hashlib.sha256(f"{self.nvars}|{canon}".encode()).hexdigest()[:16]


def _check_index(i: int, nvars: int) -> None:
    if not isinstance(i, int) or not 1 <= i <= nvars:
        raise DimensionError(f"Variable index {i} out of range 1..{nvars}")


# ---------------------------------------------------------------------------
# module-level operations


def add(p: Poly, q: Poly) -> Poly:
    p._check(q)
    return p + q


def mul(p: Poly, q: Poly) -> Poly:
    p._check(q)
    return p * q


def partial_derivative(p: Poly, i: int) -> Poly:
    return p.derivative(i)


def _determinant(matrix: List[List[Poly]], nvars: int) -> Poly:
    """Laplace expansion memoised over the set of columns still free."""
    n = len(matrix)
    if n == 0:
        return Poly.one(nvars)
    memo: Dict[int, Poly] = {0: Poly.one(nvars)}

    def expand(mask: int) -> Poly:
        cached = memo.get(mask)
        if cached is not None:
            return cached
        row = n - bin(mask).count("1")
        total = Poly.zero(nvars)
        position = 0
        for col in range(n):
            if not mask & (1 << col):
                continue
            entry = matrix[row][col]
            if not entry.is_zero():
                minor = expand(mask & ~(1 << col))
                if not minor.is_zero():
                    term = entry * minor
                    total = total - term if position % 2 else total + term
            position += 1
        memo[mask] = total
        return total

    return expand((1 << n) - 1)


def jacobian_det(fs: Sequence[Poly], variables: Sequence[int]) -> Poly:
    """
    Determinant of the partial Jacobian matrix (d f_i / d z_{variables[j]}).

    Args:
        fs: polynomials in a common ring
        variables: 1-based variable indices, as many as there are polynomials
    """
    if len(fs) != len(variables):
        raise DimensionError(f"Jacobian needs as many variables as functions: {len(fs)} vs {len(variables)}",
                             procedure="P1")
    if not fs:
        raise DimensionError("Jacobian of an empty tuple", procedure="P1")
    nvars = fs[0].nvars
    for f in fs:
        if f.nvars != nvars:
            raise DimensionError("Jacobian inputs live in different rings", procedure="P1")
    matrix = [[f.derivative(v) for v in variables] for f in fs]
    return _determinant(matrix, nvars)


def directional_jacobian_det(fs: Sequence[Poly], directions: Sequence[Sequence[Scalar]]) -> Poly:
    """Determinant of (D_{v_j} f_i) for direction vectors v_j."""
    if len(fs) != len(directions):
        raise DimensionError(f"Jacobian needs as many directions as functions: {len(fs)} vs {len(directions)}",
                             procedure="P1")
    if not fs:
        raise DimensionError("Jacobian of an empty tuple", procedure="P1")
    nvars = fs[0].nvars
    matrix = [[f.directional_derivative(v) for v in directions] for f in fs]
    return _determinant(matrix, nvars)


def compose(p: Poly, gs: Sequence[Poly]) -> Poly:
    """Substitute gs[i] for the (i+1)-th variable of p."""
    if len(gs) != p.nvars:
        raise DimensionError(f"Composition needs {p.nvars} substitutions, got {len(gs)}")
    if not gs:
        return p
    target = gs[0].nvars
    for g in gs:
        if g.nvars != target:
            raise DimensionError("Substituted polynomials live in different rings")
    powers: List[Dict[int, Poly]] = [{0: Poly.one(target), 1: g} for g in gs]

    def power(i: int, e: int) -> Poly:
        cache = powers[i]
        if e not in cache:
            half = power(i, e // 2)
            cache[e] = half * half if e % 2 == 0 else half * half * gs[i]
        return cache[e]

    result: Dict[Exponent, Fraction] = {}
    for exp, c in p.items():
        term = Poly.constant(target, c)
        for i, e in enumerate(exp):
            if e:
                term = term * power(i, e)
        for te, tc in term._terms.items():
            v = result.get(te)
            result[te] = tc if v is None else v + tc
    return Poly._raw(target, {e: c for e, c in result.items() if c})


# ---------------------------------------------------------------------------
# linear changes of coordinates


class LinearChange:
    """
    Invertible rational n x n matrix L acting by p -> p(Lz).

    Read as a frame: old coordinates z = L z'. The new coordinate functions
    are the rows of L^-1 and d/dz'_j is the derivative along column j of L.
    """

    __slots__ = ("matrix", "_inverse", "_det")

    def __init__(self, matrix: Sequence[Sequence[Scalar]]):
        rows = tuple(tuple(_as_fraction(v) for v in row) for row in matrix)
        n = len(rows)
        if n == 0 or any(len(row) != n for row in rows):
            raise DimensionError(f"Linear change must be a nonempty square matrix, got {n} rows")
        det = linalg.determinant([list(r) for r in rows])
        if det == 0:
            raise DomainError("Singular matrix rejected as a linear change of coordinates")
        self.matrix = rows
        self._det = det
        self._inverse = None

    @classmethod
    def identity(cls, n: int) -> "LinearChange":
        return cls([[1 if i == j else 0 for j in range(n)] for i in range(n)])

    @classmethod
    def random(cls, n: int, rng: "RandomSource", bound: int = 101, max_retries: int = 64) -> "LinearChange":
        for _ in range(max_retries):
            values = rng.integers(n * n, bound)
            rows = [values[i * n:(i + 1) * n] for i in range(n)]
            if linalg.determinant([[Fraction(v) for v in r] for r in rows]) != 0:
                return cls(rows)
        raise DomainError(f"No invertible {n}x{n} matrix after {max_retries} draws")

    @property
    def n(self) -> int:
        return len(self.matrix)

    @property
    def determinant(self) -> Fraction:
        return self._det

    def inverse(self) -> "LinearChange":
        if self._inverse is None:
            self._inverse = LinearChange(linalg.inverse([list(r) for r in self.matrix]))
        return self._inverse

    def __matmul__(self, other: "LinearChange") -> "LinearChange":
        """Matrix product; applying the product equals applying self, then other."""
        if self.n != other.n:
            raise DimensionError(f"Cannot compose changes of size {self.n} and {other.n}")
        return LinearChange(linalg.matmul([list(r) for r in self.matrix], [list(r) for r in other.matrix]))

    def is_identity(self) -> bool:
        return all(v == (1 if i == j else 0) for i, row in enumerate(self.matrix) for j, v in enumerate(row))

    def column(self, j: int) -> Tuple[Fraction, ...]:
        return tuple(row[j - 1] for row in self.matrix)

    def coordinate_functions(self) -> List[Poly]:
        """New coordinates z'_1..z'_n as linear forms in the old ones."""
        return [Poly.linear_form(row) for row in self.inverse().matrix]

    def partial_jacobian(self, fs: Sequence[Poly], slots: Sequence[int]) -> Poly:
        """d(fs)/d(z'_slots) expressed in the old coordinates."""
        return directional_jacobian_det(fs, [self.column(j) for j in slots])

    def apply(self, p: Poly) -> Poly:
        return apply_linear_change(p, self)

    def __eq__(self, other) -> bool:
        return isinstance(other, LinearChange) and self.matrix == other.matrix

    def __hash__(self) -> int:
        return hash(self.matrix)

    def __repr__(self) -> str:
        return f"LinearChange({[[str(v) for v in r] for r in self.matrix]})"


def apply_linear_change(p: Poly, change: LinearChange) -> Poly:
    if change.n != p.nvars:
        raise DimensionError(f"Linear change of size {change.n} applied to a ring with {p.nvars} variables")
    return compose(p, [Poly.linear_form(row) for row in change.matrix])


# ---------------------------------------------------------------------------
# randomness


class RandomSource:
    """Seeded PCG64 stream; every generic choice in the engine draws from one of these."""

    def __init__(self, seed: int = 0):
        self.seed = int(seed) % (1 << 64)
        self._generator = np.random.Generator(np.random.PCG64(self.seed))
        self.draws = 0

    def integers(self, count: int, bound: int) -> List[int]:
        """`count` integers uniform in [-bound, bound]."""
        if count <= 0:
            return []
        values = self._generator.integers(-bound, bound, size=count, endpoint=True)
        self.draws += count
        return [int(v) for v in values]

    def nonzero_integers(self, count: int, bound: int) -> List[int]:
        out = []
        while len(out) < count:
            out.extend(v for v in self.integers(count - len(out), bound) if v)
        return out

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, draws={self.draws})"


def draw_combination_matrix(size: int, count: int, rng: RandomSource, bound: int = 101) -> List[List[int]]:
    """`count` integer coefficient rows of length `size`, none of them all zero."""
    rows = []
    while len(rows) < count:
        row = rng.integers(size, bound)
        if any(row):
            rows.append(row)
    return rows


def combine(fs: Sequence[Poly], coefficients: Sequence[Scalar]) -> Poly:
    if len(fs) != len(coefficients):
        raise DimensionError(f"{len(coefficients)} coefficients for {len(fs)} polynomials")
    total = Poly.zero(fs[0].nvars)
    for f, c in zip(fs, coefficients):
        if c:
            total = total + f.scale(c)
    return total


def random_linear_combinations(fs: Sequence[Poly], count: int, rng: RandomSource, bound: int = 101) -> List[Poly]:
    if not fs:
        raise DimensionError("Linear combinations of an empty family", procedure="Siu selection")
    return [combine(fs, row) for row in draw_combination_matrix(len(fs), count, rng, bound)]


def ord_in_variable(p: Poly, i: int) -> Union[int, float]:
    return p.ord_in_variable(i)


# ---------------------------------------------------------------------------
# text and sympy bridges


def _symbols(prefix: str, nvars: int) -> List[sympy.Symbol]:
    return list(sympy.symbols(f"{prefix}1:{nvars + 1}")) if nvars else []


def from_sympy(expr, symbols: Sequence[sympy.Symbol]) -> Poly:
    nvars = len(symbols)
    try:
        sp_poly = expr if isinstance(expr, sympy.Poly) else sympy.Poly(expr, *symbols, domain="QQ")
    except (PolynomialError, GeneratorsNeeded) as e:
        raise ParseError(f"Not a polynomial in {', '.join(map(str, symbols))}: {e}")
    terms = {}
    for monom, coef in sp_poly.as_dict().items():
        rational = sympy.Rational(coef)
        terms[tuple(monom)] = Fraction(int(rational.p), int(rational.q))
    return Poly(nvars, terms)


def to_sympy(p: Poly, prefix: str = "z") -> sympy.Poly:
    symbols = _symbols(prefix, p.nvars)
    expr = sympy.Integer(0)
    for exp, c in p.items():
        term = sympy.Rational(c.numerator, c.denominator)
        for s, e in zip(symbols, exp):
            if e:
                term *= s ** e
        expr += term
    return sympy.Poly(expr, *symbols, domain="QQ")


def _scan_variables(text: str) -> Tuple[Optional[str], int]:
    found = _VARIABLE.findall(text)
    prefixes = {p for p, _ in found}
    if len(prefixes) > 1:
        raise ParseError(f"Mixed variable families {sorted(prefixes)} in {text!r}")
    if any(int(i) == 0 for _, i in found):
        raise ParseError(f"Variables are numbered from 1 in {text!r}")
    highest = max((int(i) for _, i in found), default=0)
    return (prefixes.pop() if prefixes else None), highest


def parse_poly(text: str, nvars: Optional[int] = None, prefix: Optional[str] = None) -> Poly:
    """
    Parse `z1^2 - 3/2*z2*z3` style text.

    Args:
        text: polynomial in z1..zN or w1..wN with rational coefficients
        nvars: ring size; defaults to the largest variable index seen (at least 1)
        prefix: force the variable family
    """
    found_prefix, highest = _scan_variables(text)
    prefix = prefix or found_prefix or "z"
    if found_prefix and found_prefix != prefix:
        raise ParseError(f"Expected {prefix}-variables in {text!r}")
    nvars = nvars if nvars is not None else max(highest, 1)
    if highest > nvars:
        raise DimensionError(f"{prefix}{highest} does not exist in a ring with {nvars} variables")
    symbols = _symbols(prefix, nvars)
    if re.search(r"\d\.\d|\.\d|\d\.(?!\d)", text):
        raise ParseError(f"Floating-point coefficient in {text!r}; use p/q")
    try:
        expr = parse_expr(text, local_dict={str(s): s for s in symbols}, transformations=_PARSE_TRANSFORMS)
    except (SyntaxError, TypeError, sympy.SympifyError) as e:
        raise ParseError(f"Cannot parse {text!r}: {e}")
    stray = expr.free_symbols - set(symbols)
    if stray:
        raise ParseError(f"Unknown symbols {sorted(map(str, stray))} in {text!r}")
    return from_sympy(expr, symbols)


def parse_system(text: str, nvars: Optional[int] = None) -> List[Poly]:
    """Comma or semicolon separated polynomials in one common ring."""
    parts = [part.strip() for part in re.split(r"[,;]", text) if part.strip()]
    if not parts:
        raise ParseError("Empty polynomial list")
    prefixes = set()
    highest = 0
    for part in parts:
        prefix, top = _scan_variables(part)
        if prefix:
            prefixes.add(prefix)
        highest = max(highest, top)
    if len(prefixes) > 1:
        raise ParseError(f"Mixed variable families {sorted(prefixes)} in one system")
    ring = nvars if nvars is not None else max(highest, 1)
    prefix = prefixes.pop() if prefixes else "z"
    return [parse_poly(part, ring, prefix) for part in parts]


def variables(nvars: int) -> List[Poly]:
    return [Poly.variable(nvars, i) for i in range(1, nvars + 1)]


def iter_monomials(nvars: int, degree: int) -> Iterable[Exponent]:
    """Exponents of total degree exactly `degree`, in a fixed order."""
    if nvars == 0:
        if degree == 0:
            yield ()
        return
    if nvars == 1:
        yield (degree,)
        return
    for first in range(degree, -1, -1):
        for rest in iter_monomials(nvars - 1, degree - first):
            yield (first,) + rest
