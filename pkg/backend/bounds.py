"""
Exact evaluation of the effectiveness bounds.

Values that are too large to write out are kept symbolically as
coefficient / prod(base ** exponent), where an exponent may itself be a
tower multiplier * base ** power. Comparisons never use floating point:
they bracket log2 of each side with integer bit lengths and fall back to
exact big-integer arithmetic when both sides fit the digit cap.
"""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple, Union

import pandas as pd

from config import ResourceCaps, resolve_caps
from errors import DimensionError, ResourceCapError
from models import BoundReportModel

logger = logging.getLogger(__name__)

# bits per decimal digit, rounded up
_BITS_PER_DIGIT = Fraction(3322, 1000)
_REFINE_STEPS = 12


@dataclass(frozen=True)
class ExponentTower:
    """multiplier * base ** power"""
    multiplier: int
    base: int
    power: int

    def bit_bounds(self) -> Tuple[int, int]:
        """Integers lo, hi with 2**lo <= value < 2**hi."""
        if self.base <= 1 or self.power == 0:
            v = self.multiplier * (self.base ** self.power)
            return max(v.bit_length() - 1, 0), v.bit_length()
        lo = (self.multiplier.bit_length() - 1) + self.power * (self.base.bit_length() - 1)
        hi = self.multiplier.bit_length() + self.power * self.base.bit_length()
        return lo, hi

    def value(self, max_bits: int) -> Optional[int]:
        """Exact value when it has at most max_bits bits."""
        if self.bit_bounds()[1] > max_bits + 1:
            return None
        return self.multiplier * self.base ** self.power

    def __str__(self) -> str:
        head = "" if self.multiplier == 1 else f"{self.multiplier}*"
        return f"{head}{self.base}^{self.power}"


Exponent = Union[int, ExponentTower]


@dataclass(frozen=True)
class Power:
    base: int
    exponent: Exponent

    def __str__(self) -> str:
        if isinstance(self.exponent, ExponentTower):
            return f"{self.base}^({self.exponent})"
        return f"{self.base}^{_format_int(self.exponent)}"


@dataclass(frozen=True)
class BoundValue:
    """coefficient / prod(p.base ** p.exponent for p in denominator)"""
    coefficient: Fraction
    denominator: Tuple[Power, ...] = ()

    @classmethod
    def of(cls, value) -> "BoundValue":
        return cls(Fraction(value))

    def divide(self, base: int, exponent: Exponent) -> "BoundValue":
        return BoundValue(self.coefficient, self.denominator + (Power(base, exponent),))

    def scale(self, factor) -> "BoundValue":
        return BoundValue(self.coefficient * Fraction(factor), self.denominator)

    def exact(self, digit_cap: int) -> Optional[Fraction]:
        """The value as a Fraction, or None when it would exceed digit_cap digits."""
        max_bits = int(digit_cap * _BITS_PER_DIGIT)
        denominator = 1
        for p in self.denominator:
            e = _materialize(p.exponent, max_bits)
            if e is None or e * max(p.base.bit_length(), 1) > max_bits:
                return None
            denominator *= p.base ** e
            if denominator.bit_length() > max_bits:
                return None
        return self.coefficient / denominator

    def __str__(self) -> str:
        if not self.denominator:
            return str(self.coefficient)
        parts = " * ".join(str(p) for p in self.denominator)
        num, den = self.coefficient.numerator, self.coefficient.denominator
        head = f"{den} * " if den != 1 else ""
        return f"{num}/({head}{parts})"


def _materialize(exponent: Exponent, max_bits: int) -> Optional[int]:
    if isinstance(exponent, ExponentTower):
        return exponent.value(max_bits)
    return exponent


def _exponent_bits(exponent: Exponent) -> Tuple[int, int]:
    if isinstance(exponent, ExponentTower):
        return exponent.bit_bounds()
    return max(exponent.bit_length() - 1, 0), exponent.bit_length()


def _log2_bounds(base: int, steps: int) -> Tuple[Fraction, Fraction]:
    """lo <= log2(base) <= hi from the bit length of base ** (2 ** steps)."""
    if base == 1:
        return Fraction(0), Fraction(0)
    k = 1 << steps
    bits = (base ** k).bit_length()
    return Fraction(bits - 1, k), Fraction(bits, k)


def _log2_of_rational(x: Fraction, steps: int) -> Tuple[Fraction, Fraction]:
    num_lo, num_hi = _log2_bounds(x.numerator, steps)
    den_lo, den_hi = _log2_bounds(x.denominator, steps)
    return num_lo - den_hi, num_hi - den_lo


def _log2_interval(value: Union[Fraction, BoundValue], steps: int, max_bits: int) -> Tuple[Fraction, Fraction]:
    """Bracket log2(value); astronomically small values get a symbolic-safe bracket."""
    if not isinstance(value, BoundValue):
        return _log2_of_rational(Fraction(value), steps)
    lo, hi = _log2_of_rational(value.coefficient, steps)
    for p in value.denominator:
        b_lo, b_hi = _log2_bounds(p.base, steps)
        e = _materialize(p.exponent, max_bits)
        if e is not None:
            lo -= e * b_hi
            hi -= e * b_lo
        else:
            e_lo, e_hi = _exponent_bits(p.exponent)
            if e_lo > max_bits:
                # exponent of at least 2**max_bits: no finite lower end
                lo = -math.inf
                hi -= (1 << max_bits) * b_lo
            else:
                lo -= (1 << e_hi) * b_hi
                hi -= (1 << e_lo) * b_lo
    return lo, hi


def compare_values(a: Union[Fraction, BoundValue], b: Union[Fraction, BoundValue], digit_cap: int = 1_000_000,
                   method: str = "auto") -> Optional[int]:
    """
    Sign of a - b: -1, 0 or 1, or None when undecidable within the caps.

    `method` is "exact" (big-integer evaluation only), "symbolic"
    (log2 brackets only) or "auto" (exact when both sides fit, else symbolic).
    """
    if method not in ("auto", "exact", "symbolic"):
        raise ValueError(f"Unknown comparison method {method!r}")
    if method in ("auto", "exact"):
        ea = a.exact(digit_cap) if isinstance(a, BoundValue) else Fraction(a)
        eb = b.exact(digit_cap) if isinstance(b, BoundValue) else Fraction(b)
        if ea is not None and eb is not None:
            return (ea > eb) - (ea < eb)
        if method == "exact":
            return None
    max_bits = int(digit_cap * _BITS_PER_DIGIT)
    for steps in range(_REFINE_STEPS):
        a_lo, a_hi = _log2_interval(a, steps, max_bits)
        b_lo, b_hi = _log2_interval(b, steps, max_bits)
        if a_lo > b_hi:
            return 1
        if a_hi < b_lo:
            return -1
    logger.warning(f"Comparison of {a} and {b} undecided after {_REFINE_STEPS} refinements")
    return None


def tower_at_least(tower: ExponentTower, value: int) -> bool:
    """tower >= value without writing the tower out unless it is small."""
    lo, hi = tower.bit_bounds()
    if lo > value.bit_length():
        return True
    if hi < value.bit_length() - 1:
        return False
    return tower.multiplier * tower.base ** tower.power >= value


# ---------------------------------------------------------------------------
# formulas


def _check_inputs(n: int, nu: int) -> None:
    if n < 1 or nu < 1:
        raise DimensionError(f"Bounds need n >= 1 and nu >= 1, got n={n}, nu={nu}")


def epsilon_exponent(n: int, nu: int) -> ExponentTower:
    """(n*nu) ** ((3n) ** (n+1))"""
    _check_inputs(n, nu)
    return ExponentTower(1, n * nu, (3 * n) ** (n + 1))


def epsilon_bound(n: int, nu: int) -> BoundValue:
    """
    1 / (4 * (2n+2) ** (2 * (n*nu) ** ((3n) ** (n+1)))).

    Kept symbolic; call `.exact(digit_cap)` for the Fraction when it fits.
    """
    tower = epsilon_exponent(n, nu)
    return BoundValue(Fraction(1, 4)).divide(2 * n + 2, ExponentTower(2 * tower.multiplier, tower.base, tower.power))


def epsilon_bound_from_type(n: int, t: int) -> BoundValue:
    """The same bound with t**n substituted for the multiplicity."""
    if t < 1:
        raise DimensionError(f"Type must be >= 1, got {t}")
    return epsilon_bound(n, t ** n)


def exponent_recursion(n: int, nu: int, k: int) -> Tuple[int, int]:
    """(a_k, b_k) with mu_k = n**a_k * nu**b_k."""
    _check_inputs(n, nu)
    if not 0 <= k <= n:
        raise DimensionError(f"Stage index must satisfy 0 <= k <= {n}, got {k}")
    a, b = 0, 0
    for j in range(k):
        a, b = (n + j + 3) * a + j + 3, (n + j + 3) * b + (n - j) * (n + 1)
    return a, b


def mu_recursion(n: int, nu: int, k: int, caps: Optional[ResourceCaps] = None) -> int:
    """mu_0 = 1, mu_{j+1} = n**(j+3) * nu**((n-j)(n+1)) * mu_j**(n+j+3)."""
    caps = resolve_caps(caps)
    a, b = exponent_recursion(n, nu, k)
    bits = a * n.bit_length() + b * nu.bit_length()
    if bits > caps.digit_cap * _BITS_PER_DIGIT:
        raise ResourceCapError(f"mu_{k} for n={n}, nu={nu} exceeds the digit cap {caps.digit_cap}",
                               procedure="bounds")
    return n ** a * nu ** b


def mu_closed_form(n: int, nu: int, k: int) -> Tuple[int, int]:
    """Exponents (A, B) of the closed form n**A * nu**B = n**((3n)**k) * nu**((3n)**(k+1))."""
    return (3 * n) ** k, (3 * n) ** (k + 1)


def mu_closed_form_holds(n: int, nu: int, k: int) -> bool:
    a, b = exponent_recursion(n, nu, k)
    A, B = mu_closed_form(n, nu, k)
    a_ok = n == 1 or a <= A
    b_ok = nu == 1 or b <= B
    if a_ok and b_ok:
        return True
    return n ** a * nu ** b <= n ** A * nu ** B


def _order_exponent(n: int, nu: int, k: int, caps: Optional[ResourceCaps] = None) -> int:
    mu = mu_recursion(n, nu, k, caps)
    return (n * mu * mu * nu ** (n - k)) ** k


def order_exponent_sum(n: int, nu: int, k: int, caps: Optional[ResourceCaps] = None) -> int:
    """sum over j < k of (n * mu_j**2 * nu**(n-j)) ** j"""
    return sum(_order_exponent(n, nu, j, caps) for j in range(k))


def epsilon_recursion(n: int, nu: int, k: int, caps: Optional[ResourceCaps] = None) -> BoundValue:
    """eps_0 = 1/2, eps_{j+1} = eps_j / (2j+2) ** ((n * mu_j**2 * nu**(n-j)) ** j)."""
    _check_inputs(n, nu)
    if not 0 <= k <= n:
        raise DimensionError(f"Stage index must satisfy 0 <= k <= {n}, got {k}")
    value = BoundValue(Fraction(1, 2))
    for j in range(k):
        value = value.divide(2 * j + 2, _order_exponent(n, nu, j, caps))
    return value


def iteration_order_bound(epsilon, k: int, exponent: int) -> BoundValue:
    """epsilon / (2k+2) ** exponent: the order guaranteed after one iteration step."""
    return BoundValue(Fraction(epsilon)).divide(2 * k + 2, exponent)


# ---------------------------------------------------------------------------
# reports


# integers past this size are printed in exponent form
_PRINTABLE_BITS = 196


def _format_int(value: int, n: int = 0, nu: int = 0, a: int = 0, b: int = 0) -> str:
    if value.bit_length() <= _PRINTABLE_BITS:
        return str(value)
    if n and nu:
        return f"{n}^{a} * {nu}^{b}"
    return f"<{value.bit_length()}-bit integer>"


@dataclass
class BoundReport:
    n: int
    nu: int
    epsilon_formula: BoundValue
    mu_sequence: List[int] = field(default_factory=list)
    epsilon_sequence: List[BoundValue] = field(default_factory=list)
    achieved_order: Optional[Fraction] = None
    verdict: Optional[str] = None
    checks: dict = field(default_factory=dict)
    digit_cap: int = 1_000_000

    @property
    def epsilon_exact(self) -> Optional[Fraction]:
        return self.epsilon_formula.exact(self.digit_cap)

    def to_model(self) -> BoundReportModel:
        exact = self.epsilon_exact
        # Fraction.__str__ is limited by the interpreter's int-to-str digit cap
        printable = exact is not None and exact.denominator.bit_length() <= 12_000
        mus = []
        for k, mu in enumerate(self.mu_sequence):
            a, b = exponent_recursion(self.n, self.nu, k)
            mus.append(_format_int(mu, self.n, self.nu, a, b))
        return BoundReportModel(
            n=self.n,
            nu=self.nu,
            epsilon_formula=str(exact) if printable else str(self.epsilon_formula),
            epsilon_exact=exact is not None,
            mu_sequence=mus,
            epsilon_sequence=[str(e) for e in self.epsilon_sequence],
            achieved_order=str(self.achieved_order) if self.achieved_order is not None else None,
            verdict=self.verdict,
            checks=self.checks,
        )

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for k, (mu, eps) in enumerate(zip(self.mu_sequence, self.epsilon_sequence)):
            a, b = exponent_recursion(self.n, self.nu, k)
            rows.append({"k": k, "a_k": a, "b_k": b, "mu_k": _format_int(mu, self.n, self.nu, a, b),
                         "eps_k": str(eps)})
        return pd.DataFrame(rows, columns=["k", "a_k", "b_k", "mu_k", "eps_k"])


def bound_report(n: int, nu: int, caps: Optional[ResourceCaps] = None) -> BoundReport:
    """Sequences mu_k, eps_k and the checks that tie them to the closed-form bound."""
    caps = resolve_caps(caps)
    eps = epsilon_bound(n, nu)
    report = BoundReport(n, nu, eps, digit_cap=caps.digit_cap)
    try:
        report.mu_sequence = [mu_recursion(n, nu, k, caps) for k in range(n + 1)]
        report.epsilon_sequence = [epsilon_recursion(n, nu, k, caps) for k in range(n + 1)]
    except ResourceCapError as e:
        logger.error(f"Error evaluating bound sequences: {e}")
        raise
    tower = epsilon_exponent(n, nu)
    exponent_sum = order_exponent_sum(n, nu, n, caps)
    # eps_n >= 1 / (2 (2n+2)^E) follows from sum_k e_k <= E since every base 2k+2 <= 2n+2
    report.checks["closed_form"] = all(mu_closed_form_holds(n, nu, k) for k in range(n + 1))
    report.checks["final_order"] = tower_at_least(tower, exponent_sum)
    # eps_n / (2 mu_n) >= eps(n, nu) follows from bits(mu_n) + sum_k e_k <= 2E
    doubled = ExponentTower(2 * tower.multiplier, tower.base, tower.power)
    report.checks["final_display"] = tower_at_least(doubled, report.mu_sequence[-1].bit_length() + exponent_sum)
    logger.info(f"Bound report for n={n}, nu={nu}: checks {report.checks}")
    return report


def compare_achieved(n: int, nu: int, achieved, caps: Optional[ResourceCaps] = None) -> BoundReport:
    """Report whose verdict says whether the achieved order reaches eps(n, nu)."""
    report = bound_report(n, nu, caps)
    report.achieved_order = Fraction(achieved)
    sign = compare_values(report.achieved_order, report.epsilon_formula, report.digit_cap)
    report.verdict = None if sign is None else ("pass" if sign >= 0 else "fail")
    logger.info(f"Achieved order {report.achieved_order} against eps({n},{nu}): {report.verdict}")
    return report


def achieved_at_least(achieved, bound: BoundValue, digit_cap: int = 1_000_000) -> Optional[bool]:
    sign = compare_values(Fraction(achieved), bound, digit_cap)
    return None if sign is None else sign >= 0
