"""
Local commutative algebra on polynomial data.

Standard bases under a local order (Mora normal form with the ecart
strategy) decide membership and multiplicity in the ring of germs at the
origin; Buchberger under global orders handles elimination. Bases can track
how each element is built from the input generators, which is what turns a
zero remainder into a re-verifiable membership certificate.
"""
import heapq
import logging
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from config import ResourceCaps, resolve_caps
from errors import DimensionError, DomainError, NotInRadicalError, ResourceCapError
from linalg import RowEchelon
from polyring import INFINITY, Exponent, Poly, RandomSource, compose, draw_combination_matrix, iter_monomials

logger = logging.getLogger(__name__)

Multiplicity = Union[int, float]
Terms = Dict[Exponent, Fraction]

BASIS_CACHE_SIZE = 64
_BASIS_CACHE: "OrderedDict[tuple, StandardBasis]" = OrderedDict()


@dataclass(frozen=True)
class MonomialOrder:
    """`local` is negative degrevlex (ds); `block` eliminates the first `split` variables."""
    kind: str = "local"
    split: int = 0

    def __post_init__(self):
        if self.kind not in ("local", "degrevlex", "block"):
            raise ValueError(f"Unknown monomial order {self.kind!r}")
        if self.kind == "block" and self.split < 1:
            raise ValueError("Block order needs a split index >= 1")

    @classmethod
    def local(cls) -> "MonomialOrder":
        return cls("local")

    @classmethod
    def degrevlex(cls) -> "MonomialOrder":
        return cls("degrevlex")

    @classmethod
    def block(cls, split: int) -> "MonomialOrder":
        return cls("block", split)

    @classmethod
    def from_name(cls, name: str) -> "MonomialOrder":
        if name == "local-ds":
            return cls.local()
        if name == "dp":
            return cls.degrevlex()
        if name.startswith("block(") and name.endswith(")"):
            return cls.block(int(name[6:-1]))
        raise ValueError(f"Unknown monomial order name {name!r}")

    @property
    def is_local(self) -> bool:
        return self.kind == "local"

    @property
    def name(self) -> str:
        return {"local": "local-ds", "degrevlex": "dp"}.get(self.kind, f"block({self.split})")

    def key(self, exp: Exponent) -> tuple:
        """Sort key; the larger key is the larger monomial."""
        if self.kind == "local":
            return (-sum(exp), tuple(-e for e in reversed(exp)))
        if self.kind == "degrevlex":
            return (sum(exp), tuple(-e for e in reversed(exp)))
        head, tail = exp[:self.split], exp[self.split:]
        return (sum(head), tuple(-e for e in reversed(head)), sum(tail), tuple(-e for e in reversed(tail)))

    def leading_exponent(self, p: Poly) -> Exponent:
        if p.is_zero():
            raise DomainError("The zero polynomial has no leading term")
        return max(p.terms, key=self.key)


@dataclass(frozen=True)
class MembershipCertificate:
    """unit * target = sum(cofactors[i] * generators[i]) with unit(0) != 0."""
    unit: Poly
    cofactors: Tuple[Poly, ...]
    target: Poly
    generators: Tuple[Poly, ...]

    def residual(self) -> Poly:
        total = self.unit * self.target
        for a, g in zip(self.cofactors, self.generators):
            total = total - a * g
        return total

    def verify(self) -> bool:
        if len(self.cofactors) != len(self.generators):
            return False
        if not self.unit.is_unit():
            return False
        try:
            return self.residual().is_zero()
        except DimensionError:
            return False


@dataclass(frozen=True)
class StandardBasis:
    generators: Tuple[Poly, ...]
    order: MonomialOrder
    completed: bool
    original: Tuple[Poly, ...] = ()
    # generators[i] == sum(representations[i][j] * original[j])
    representations: Optional[Tuple[Tuple[Poly, ...], ...]] = None

    @property
    def nvars(self) -> int:
        return (self.generators or self.original)[0].nvars

    def leading_exponents(self) -> List[Exponent]:
        return [self.order.leading_exponent(g) for g in self.generators]

    def minimal_leading_exponents(self) -> List[Exponent]:
        leads = sorted(set(self.leading_exponents()), key=lambda e: (sum(e), e))
        minimal: List[Exponent] = []
        for e in leads:
            if not any(_divides(m, e) for m in minimal):
                minimal.append(e)
        return minimal

    def contains_unit(self) -> bool:
        zero = (0,) * self.nvars
        return any(e == zero for e in self.leading_exponents())


@dataclass(frozen=True)
class NormalForm:
    """unit * p = sum(cofactors[i] * generators[i]) + remainder."""
    remainder: Poly
    unit: Poly
    cofactors: Tuple[Poly, ...]
    generators: Tuple[Poly, ...]
    target: Poly
    tracked: bool = True

    def certificate(self) -> MembershipCertificate:
        if not self.remainder.is_zero():
            raise DomainError("Nonzero remainder: no membership certificate")
        if not self.tracked:
            raise DomainError("Normal form was computed without cofactors; complete the basis with track=True")
        return MembershipCertificate(self.unit, self.cofactors, self.target, self.generators)


@dataclass(frozen=True)
class Filtration:
    """Nested generator lists I_1 ⊆ ... ⊆ I_k, each a prefix of the next."""
    stages: Tuple[Tuple[Poly, ...], ...]

    def __post_init__(self):
        for prev, cur in zip(self.stages, self.stages[1:]):
            if tuple(cur[:len(prev)]) != tuple(prev):
                raise DomainError("Filtration stage does not extend the previous one", procedure="MP2")

    @classmethod
    def from_lists(cls, stages: Sequence[Sequence[Poly]]) -> "Filtration":
        return cls(tuple(tuple(s) for s in stages))

    def __len__(self) -> int:
        return len(self.stages)


@dataclass
class MultiplicityEstimate:
    value: Multiplicity
    samples: List[Multiplicity] = field(default_factory=list)

    @property
    def stable(self) -> bool:
        return len(set(self.samples)) <= 1


# ---------------------------------------------------------------------------
# term-dictionary kernels


def _divides(a: Exponent, b: Exponent) -> bool:
    return all(x <= y for x, y in zip(a, b))


def _quotient(b: Exponent, a: Exponent) -> Exponent:
    return tuple(y - x for x, y in zip(a, b))


def _lcm(a: Exponent, b: Exponent) -> Exponent:
    return tuple(max(x, y) for x, y in zip(a, b))


def _sub_shifted(target: Terms, coef: Fraction, shift: Exponent, source: Terms) -> None:
    """target -= coef * x^shift * source, in place."""
    for exp, c in source.items():
        e = tuple(x + y for x, y in zip(exp, shift))
        v = target.get(e, 0) - coef * c
        if v:
            target[e] = v
        else:
            target.pop(e, None)


def _degree(terms: Terms) -> int:
    return max(sum(e) for e in terms)


class _Element:
    """Basis element in term-dictionary form with an optional representation vector."""

    __slots__ = ("terms", "lead", "lead_coef", "ecart", "rep")

    def __init__(self, terms: Terms, key, rep: Optional[List[Terms]]):
        self.terms = terms
        self.lead = max(terms, key=key)
        self.lead_coef = terms[self.lead]
        self.ecart = _degree(terms) - sum(self.lead)
        self.rep = rep


def _reduce(h: Terms, rep: Optional[List[Terms]], elements: Sequence[_Element], order: MonomialOrder,
            full: bool = False) -> Tuple[Terms, Optional[List[Terms]]]:
    """
    Reduce h against elements. Local orders use Mora's ecart strategy and
    return a weak normal form; global orders use plain division (with tail
    reduction when `full`).
    """
    key = order.key
    h = dict(h)
    rep = [dict(r) for r in rep] if rep is not None else None
    if order.is_local:
        T = list(elements)
        while h:
            lm = max(h, key=key)
            best = None
            for g in T:
                if _divides(g.lead, lm) and (best is None or g.ecart < best.ecart):
                    best = g
            if best is None:
                break
            h_ecart = _degree(h) - sum(lm)
            if best.ecart > h_ecart:
                T.append(_Element(dict(h), key, [dict(r) for r in rep] if rep is not None else None))
            coef = h[lm] / best.lead_coef
            shift = _quotient(lm, best.lead)
            _sub_shifted(h, coef, shift, best.terms)
            if rep is not None:
                for r, br in zip(rep, best.rep):
                    _sub_shifted(r, coef, shift, br)
        return h, rep

    done: Terms = {}
    while h:
        lm = max(h, key=key)
        divisor = next((g for g in elements if _divides(g.lead, lm)), None)
        if divisor is None:
            if not full:
                break
            done[lm] = h.pop(lm)
            continue
        coef = h[lm] / divisor.lead_coef
        shift = _quotient(lm, divisor.lead)
        _sub_shifted(h, coef, shift, divisor.terms)
        if rep is not None:
            for r, br in zip(rep, divisor.rep):
                _sub_shifted(r, coef, shift, br)
    done.update(h)
    return done, rep


def _spoly(a: _Element, b: _Element, nparts: int, track: bool) -> Tuple[Terms, Optional[List[Terms]]]:
    lcm = _lcm(a.lead, b.lead)
    sa, sb = _quotient(lcm, a.lead), _quotient(lcm, b.lead)
    ca, cb = Fraction(1) / a.lead_coef, Fraction(1) / b.lead_coef
    s: Terms = {}
    _sub_shifted(s, -ca, sa, a.terms)
    _sub_shifted(s, cb, sb, b.terms)
    rep = None
    if track:
        rep = [dict() for _ in range(nparts)]
        for r, ar, br in zip(rep, a.rep, b.rep):
            _sub_shifted(r, -ca, sa, ar)
            _sub_shifted(r, cb, sb, br)
    return s, rep


def _complete(gens: Sequence[Poly], order: MonomialOrder, caps: ResourceCaps, track: bool) -> List[_Element]:
    key = order.key
    m = len(gens)
    elements: List[_Element] = []
    for idx, g in enumerate(gens):
        if g.is_zero():
            continue
        rep = None
        if track:
            rep = [dict() for _ in range(m)]
            rep[idx] = {(0,) * g.nvars: Fraction(1)}
        elements.append(_Element(dict(g.terms), key, rep))

    # pairs by (degree of lcm, j, i); the set answers the chain criterion
    pairs = set()
    queue: List[Tuple[int, int, int]] = []

    def push(i: int, j: int) -> None:
        pairs.add((i, j))
        heapq.heappush(queue, (sum(_lcm(elements[i].lead, elements[j].lead)), j, i))

    for j in range(len(elements)):
        for i in range(j):
            push(i, j)
    processed = 0
    while queue:
        _, j, i = heapq.heappop(queue)
        pairs.discard((i, j))
        processed += 1
        if processed > caps.pair_cap:
            raise ResourceCapError(f"Pair queue exceeded the cap of {caps.pair_cap}", procedure="standard basis")
        a, b = elements[i], elements[j]
        lcm = _lcm(a.lead, b.lead)
        if sum(lcm) == sum(a.lead) + sum(b.lead):
            continue
        if any(k not in (i, j) and _divides(elements[k].lead, lcm)
               and (min(i, k), max(i, k)) not in pairs and (min(j, k), max(j, k)) not in pairs
               for k in range(len(elements))):
            continue
        s, rep = _spoly(a, b, m, track)
        if not s:
            continue
        h, rep = _reduce(s, rep, elements, order)
        if not h:
            continue
        if _degree(h) > caps.degree_cap:
            raise ResourceCapError(f"Basis element of degree {_degree(h)} exceeds the degree cap {caps.degree_cap}",
                                   procedure="standard basis")
        new = len(elements)
        elements.append(_Element(h, key, rep))
        for k in range(new):
            push(k, new)
        if not any(elements[new].lead):
            # unit ideal: nothing else to learn
            break
    logger.debug(f"Completed {order.name} basis: {len(elements)} elements after {processed} pairs")
    return elements


def _to_poly(terms: Terms, nvars: int) -> Poly:
    return Poly(nvars, terms)


def _basis_elements(basis: StandardBasis, track: bool) -> List[_Element]:
    key = basis.order.key
    reps = basis.representations if track else None
    return [_Element(dict(g.terms), key, [dict(r.terms) for r in reps[i]] if reps is not None else None)
            for i, g in enumerate(basis.generators)]


# ---------------------------------------------------------------------------
# public operations


def complete_basis(gens: Sequence[Poly], order: Optional[MonomialOrder] = None, caps: Optional[ResourceCaps] = None,
                   track: bool = False) -> StandardBasis:
    """
    Completed standard basis of the ideal generated by `gens`.

    Args:
        gens: nonempty list of polynomials in one ring
        order: defaults to the local order
        caps: resource limits (degree of new elements, processed pairs)
        track: also record each element as a combination of `gens`
    """
    if not gens:
        raise DimensionError("Standard basis of an empty generator list")
    order = order or MonomialOrder.local()
    nvars = gens[0].nvars
    if any(g.nvars != nvars for g in gens):
        raise DimensionError("Generators live in different rings")
    if order.kind == "block" and order.split >= nvars:
        raise DimensionError(f"Block split {order.split} leaves no variables in a ring of {nvars}")
    caps = resolve_caps(caps)
    gens = tuple(gens)
    cached = _cached_basis(gens, order, caps, track)
    if cached is not None:
        return cached
    elements = _complete(list(gens), order, caps, track)
    polys = tuple(_to_poly(e.terms, nvars) for e in elements)
    reps = None
    if track:
        reps = tuple(tuple(_to_poly(r, nvars) for r in e.rep) for e in elements)
    basis = StandardBasis(polys, order, True, gens, reps)
    _BASIS_CACHE[(gens, order, caps, track)] = basis
    if len(_BASIS_CACHE) > BASIS_CACHE_SIZE:
        _BASIS_CACHE.popitem(last=False)
    return basis


def _cached_basis(gens: Tuple[Poly, ...], order: MonomialOrder, caps: ResourceCaps,
                  track: bool) -> Optional[StandardBasis]:
    """A completed basis for the same generators; a tracked one also serves untracked requests."""
    for tracked in ((True,) if track else (False, True)):
        key = (gens, order, caps, tracked)
        basis = _BASIS_CACHE.get(key)
        if basis is not None:
            _BASIS_CACHE.move_to_end(key)
            return basis if tracked == track else replace(basis, representations=None)
    return None


def clear_basis_cache() -> None:
    _BASIS_CACHE.clear()


def normal_form(p: Poly, basis: StandardBasis, track: bool = True, full: bool = False) -> NormalForm:
    """Normal form under the basis's own order, with the identity that produced it."""
    if not basis.completed:
        raise DomainError("Normal form against a basis that is not completed")
    nvars = p.nvars
    if basis.generators and basis.nvars != nvars:
        raise DimensionError("Polynomial and basis live in different rings")
    track = track and basis.representations is not None
    elements = _basis_elements(basis, track)
    one = {(0,) * nvars: Fraction(1)}
    if track:
        # slot 0 carries the multiple of p; slots 1.. the original generators
        for e in elements:
            e.rep = [dict()] + e.rep
        rep = [one] + [dict() for _ in basis.original]
    else:
        rep = None
    h, rep = _reduce(dict(p.terms), rep, elements, basis.order, full=full)
    remainder = _to_poly(h, nvars)
    if rep is None:
        return NormalForm(remainder, Poly.one(nvars), (), (), p, tracked=False)
    unit = _to_poly(rep[0], nvars)
    cofactors = tuple(-_to_poly(r, nvars) for r in rep[1:])
    return NormalForm(remainder, unit, cofactors, basis.original, p)


def mora_normal_form(p: Poly, basis: StandardBasis, track: bool = True) -> NormalForm:
    if not basis.order.is_local:
        raise DomainError(f"Mora normal form needs a local order, got {basis.order.name}")
    return normal_form(p, basis, track=track)


def ideal_contains(basis: StandardBasis, p: Poly) -> bool:
    return normal_form(p, basis, track=False).remainder.is_zero()


def local_multiplicity(gens: Sequence[Poly], caps: Optional[ResourceCaps] = None) -> Multiplicity:
    """dim of O/(gens) at the origin: standard monomials of a local standard basis."""
    if gens and gens[0].nvars == 0:
        return 0 if any(g.is_unit() for g in gens) else 1
    return basis_multiplicity(complete_basis(gens, MonomialOrder.local(), caps))


def basis_multiplicity(basis: StandardBasis) -> Multiplicity:
    """Standard monomials left by a completed local basis."""
    if not basis.order.is_local:
        raise DomainError(f"Counting standard monomials needs a local order, got {basis.order.name}")
    nvars = basis.nvars
    if not basis.generators:
        return INFINITY
    leads = basis.minimal_leading_exponents()
    if any(not any(e) for e in leads):
        return 0
    for i in range(nvars):
        if not any(e[i] > 0 and all(x == 0 for j, x in enumerate(e) if j != i) for e in leads):
            return INFINITY
    count = 0
    frontier = [(0,) * nvars]
    seen = {frontier[0]}
    while frontier:
        exp = frontier.pop()
        if any(_divides(m, exp) for m in leads):
            continue
        count += 1
        for i in range(nvars):
            nxt = exp[:i] + (exp[i] + 1,) + exp[i + 1:]
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return count


def _truncated_dimension(gens: Sequence[Poly], nvars: int, D: int) -> int:
    """dim of (polys of degree < D) / span{trunc_D(m*g)}."""
    columns: Dict[Exponent, int] = {}
    for d in range(D):
        for exp in iter_monomials(nvars, d):
            columns[exp] = len(columns)
    echelon = RowEchelon()
    for g in gens:
        low = g.order()
        if low == INFINITY or low >= D:
            continue
        for d in range(D - low):
            for mono in iter_monomials(nvars, d):
                row = {}
                for exp, c in g.terms.items():
                    e = tuple(x + y for x, y in zip(exp, mono))
                    if sum(e) < D:
                        row[columns[e]] = c
                if row:
                    echelon.add(row)
    return len(columns) - echelon.rank


def macaulay_multiplicity(gens: Sequence[Poly], degree_cap: int) -> int:
    """
    Multiplicity read off truncated Macaulay matrices: the first D with
    dim O/(I + m^D) == dim O/(I + m^(D+1)).
    """
    if degree_cap < 1:
        raise ValueError("degree_cap must be >= 1")
    if not gens:
        raise DimensionError("Macaulay multiplicity of an empty generator list")
    nvars = gens[0].nvars
    previous = _truncated_dimension(gens, nvars, 1)
    for D in range(2, degree_cap + 1):
        current = _truncated_dimension(gens, nvars, D)
        logger.debug(f"Macaulay truncation D={D}: quotient dimension {current}")
        if current == previous:
            return current
        previous = current
    raise ResourceCapError(f"Macaulay quotient dimension did not stabilise up to degree {degree_cap} (exceeds cap)",
                           procedure="multiplicity oracle")


def _restrict_to_plane(gens: Sequence[Poly], d: int, rng: RandomSource, bound: int) -> List[Poly]:
    """Restrict to the graph z_j = sum_i c_ji z_{d+i} (j <= d), a generic (n-d)-plane."""
    n = gens[0].nvars
    rest = n - d
    rows = [rng.integers(rest, bound) for _ in range(d)]
    substitution = [Poly.linear_form(row) for row in rows]
    substitution += [Poly.variable(rest, i) for i in range(1, rest + 1)]
    return [compose(g, substitution) for g in gens]


def d_multiplicity_estimate(gens: Sequence[Poly], d: int, rng: RandomSource, trials: Optional[int] = None,
                            caps: Optional[ResourceCaps] = None) -> MultiplicityEstimate:
    caps = resolve_caps(caps)
    n = gens[0].nvars
    if not 0 <= d <= n:
        raise DimensionError(f"d-multiplicity needs 0 <= d <= {n}, got {d}")
    if d == 0:
        value = local_multiplicity(gens, caps)
        return MultiplicityEstimate(value, [value])
    if d == n:
        value = 0 if any(g.is_unit() for g in gens) else 1
        return MultiplicityEstimate(value, [value])
    samples = []
    for _ in range(trials or caps.trials):
        samples.append(local_multiplicity(_restrict_to_plane(gens, d, rng, caps.coefficient_bound), caps))
    estimate = MultiplicityEstimate(min(samples), samples)
    if not estimate.stable:
        logger.warning(f"Unstable {d}-multiplicity: trials gave {samples}; reporting {estimate.value}")
    return estimate


def d_multiplicity(gens: Sequence[Poly], d: int, rng: RandomSource, trials: Optional[int] = None,
                   caps: Optional[ResourceCaps] = None) -> Multiplicity:
    """min over trials of dim O/(gens + d generic linear forms)."""
    return d_multiplicity_estimate(gens, d, rng, trials, caps).value


def tuple_multiplicity(fs: Sequence[Poly], rng: RandomSource, nvars: Optional[int] = None,
                       trials: Optional[int] = None, caps: Optional[ResourceCaps] = None) -> Multiplicity:
    """Multiplicity of a k-tuple in n variables after adding n-k generic linear forms; 1 for the empty tuple."""
    if not fs:
        return 1
    n = nvars if nvars is not None else fs[0].nvars
    return d_multiplicity(fs, max(n - len(fs), 0), rng, trials, caps)


def elimination_ideal(gens: Sequence[Poly], keep_from: int, caps: Optional[ResourceCaps] = None) -> List[Poly]:
    """
    Generators of (gens) ∩ Q[z_keep_from, ..., z_n], returned in that smaller ring.

    Computed as a reduced Gröbner basis under the block order that eliminates
    the first keep_from-1 variables.
    """
    nvars = gens[0].nvars
    split = keep_from - 1
    if not 1 <= split < nvars:
        raise DimensionError(f"Cannot keep variables from {keep_from} in a ring of {nvars}")
    order = MonomialOrder.block(split)
    caps = resolve_caps(caps)
    elements = _complete(list(gens), order, caps, track=False)
    elements = _interreduce(elements, order)
    kept = []
    for e in elements:
        if any(any(exp[:split]) for exp in e.terms):
            continue
        scale = Fraction(1) / e.lead_coef
        kept.append(Poly(nvars, {exp: c * scale for exp, c in e.terms.items()}).drop_leading(split))
    kept.sort(key=lambda p: (p.degree(), len(p), p.to_text()))
    logger.info(f"Elimination of {split} variables left {len(kept)} generators")
    return kept


def _interreduce(elements: List[_Element], order: MonomialOrder) -> List[_Element]:
    key = order.key
    minimal: List[_Element] = []
    for e in sorted(elements, key=lambda e: key(e.lead)):
        if not any(_divides(m.lead, e.lead) for m in minimal):
            minimal = [m for m in minimal if not _divides(e.lead, m.lead)]
            minimal.append(e)
    reduced = []
    for idx, e in enumerate(minimal):
        others = minimal[:idx] + minimal[idx + 1:]
        lead_terms = {e.lead: e.lead_coef}
        tail = {exp: c for exp, c in e.terms.items() if exp != e.lead}
        tail, _ = _reduce(tail, None, others, order, full=True)
        lead_terms.update(tail)
        reduced.append(_Element(lead_terms, key, None))
    return reduced


def radical_membership_power(g: Poly, gens: Sequence[Poly], mu: Optional[Multiplicity] = None, *,
                             max_power: Optional[int] = None, rng: Optional[RandomSource] = None,
                             caps: Optional[ResourceCaps] = None) -> Tuple[int, MembershipCertificate]:
    """
    Smallest r with g^r in the local ideal (gens), with its certificate.

    The search is bounded by n*mu (effective Nullstellensatz) or by
    `max_power` when given; exhausting the bound raises NotInRadicalError.
    """
    n = g.nvars
    if max_power is None:
        if mu is None:
            mu = tuple_multiplicity(gens, rng or RandomSource(0), nvars=n, caps=caps)
        if mu == INFINITY:
            raise DomainError("Effective Nullstellensatz needs an ideal of finite multiplicity",
                              procedure="effective Nullstellensatz")
        limit = max(int(n * mu), 1)
    else:
        limit = max_power
    basis = complete_basis(gens, MonomialOrder.local(), caps, track=True)
    if g.is_unit() and not basis.contains_unit():
        raise NotInRadicalError(f"{g} does not vanish at the origin, so no power lies in the proper ideal",
                                exponent=limit, procedure="effective Nullstellensatz")
    powers: Dict[int, Poly] = {1: g}

    def power(r: int) -> Poly:
        if r not in powers:
            half = power(r // 2)
            powers[r] = half * half if r % 2 == 0 else half * half * g
        return powers[r]

    def member(r: int) -> bool:
        return normal_form(power(r), basis, track=False).remainder.is_zero()

    lo, r = 0, 1
    while not member(r):
        lo = r
        if r >= limit:
            raise NotInRadicalError(f"{g} has no power up to {limit} in the ideal", exponent=limit,
                                    procedure="effective Nullstellensatz")
        r = min(2 * r, limit)
    hi = r
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if member(mid):
            hi = mid
        else:
            lo = mid
    certificate = normal_form(power(hi), basis, track=True).certificate()
    logger.debug(f"Radical membership found at r={hi} (limit {limit})")
    return hi, certificate


@dataclass
class SiuSelection:
    combinations: List[Poly]
    coefficients: List[List[int]]
    multiplicity: Multiplicity
    bound: Multiplicity
    attempts: int


def siu_select_with_coefficients(f: Sequence[Poly], F: Sequence[Poly], count: int, rng: RandomSource, *,
                                 mu: Optional[Multiplicity] = None, nu: Optional[Multiplicity] = None,
                                 side_conditions: Sequence[Tuple[Sequence[Poly], Multiplicity]] = (),
                                 caps: Optional[ResourceCaps] = None) -> SiuSelection:
    """
    Combinations G of F with certified mult(f, G) <= mu * nu^count.

    The last `count` members of F are tried first, then random combinations.
    Every `(base, bound)` in side_conditions must also satisfy mult(base, G) <= bound.
    """
    caps = resolve_caps(caps)
    if count == 0:
        return SiuSelection([], [], tuple_multiplicity(f, rng, caps=caps) if f else 1, 0, 0)
    if not F:
        raise DimensionError("Siu selection from an empty family", procedure="Siu selection")
    n = F[0].nvars
    if mu is None:
        mu = tuple_multiplicity(f, rng, nvars=n, caps=caps)
    if nu is None:
        nu = tuple_multiplicity(F, rng, nvars=n, caps=caps)
    if mu == INFINITY or nu == INFINITY:
        raise DomainError(f"Siu selection needs finite multiplicities, got mu={mu}, nu={nu}", procedure="Siu selection")
    bound = mu * nu ** count
    N = len(F)
    for attempt in range(caps.max_retries):
        if attempt == 0 and N >= count:
            rows = [[int(i == N - count + r) for i in range(N)] for r in range(count)]
        else:
            rows = draw_combination_matrix(N, count, rng, caps.coefficient_bound)
        G = [_combine(F, row) for row in rows]
        if any(g.is_zero() for g in G):
            continue
        value = tuple_multiplicity(list(f) + G, rng, nvars=n, caps=caps)
        if value > bound:
            logger.debug(f"Siu attempt {attempt}: multiplicity {value} above {bound}")
            continue
        if all(tuple_multiplicity(list(base) + G, rng, nvars=n, caps=caps) <= side for base, side in side_conditions):
            logger.info(f"Siu selection certified multiplicity {value} <= {bound} after {attempt + 1} attempts")
            return SiuSelection(G, rows, value, bound, attempt + 1)
    raise ResourceCapError(f"No combination certified the bound {bound} within {caps.max_retries} draws",
                           procedure="Siu selection")


def _combine(F: Sequence[Poly], row: Sequence[int]) -> Poly:
    total = Poly.zero(F[0].nvars)
    for poly, c in zip(F, row):
        if c:
            total = total + poly.scale(c)
    return total


def siu_select(f: Sequence[Poly], F: Sequence[Poly], count: int, rng: RandomSource,
               caps: Optional[ResourceCaps] = None, **kwargs) -> List[Poly]:
    return siu_select_with_coefficients(f, F, count, rng, caps=caps, **kwargs).combinations


def map_multiplicity(gamma: Sequence[Poly], rng: RandomSource, caps: Optional[ResourceCaps] = None) -> Multiplicity:
    """Multiplicity of a map germ: that of the ideal of its components."""
    return tuple_multiplicity(gamma, rng, caps=caps)
