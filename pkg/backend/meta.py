"""
Meta-procedures built from P1/P2 and the iteration that reaches the unit.

MP1 picks coordinates and a mix of pre-multipliers whose partial Jacobian
has certified multiplicity bounds, MP2 builds a triangular resolution by
elimination, MP3 turns the resolution into a chain of P1/P2 steps. The
iteration step strings them together; run_to_unit repeats it until the
unit appears.

Every polynomial stays in the original coordinates. A linear change is
carried as a frame (see polyring.LinearChange): new coordinate functions
are linear forms and partial derivatives in new coordinates are
directional derivatives, so Jacobians agree with the textbook ones up to a
nonzero constant.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from bounds import BoundReport, achieved_at_least, compare_achieved, iteration_order_bound
from config import ResourceCaps, resolve_caps
from errors import DimensionError, DomainError, NotInRadicalError, ResourceCapError, VerificationError
from kohn import (PRE_MULTIPLIER_ORDER, Multiplier, Trace, TraceReport, apply_p1, apply_p2,
                  register_premultiplier, verify_trace)
from linalg import matmul
from localalg import (Filtration, MembershipCertificate, Multiplicity, complete_basis, elimination_ideal,
                      basis_multiplicity, ideal_contains, map_multiplicity, radical_membership_power,
                      siu_select_with_coefficients, tuple_multiplicity)
from polyring import INFINITY, LinearChange, Poly, RandomSource, compose, from_sympy, to_sympy

logger = logging.getLogger(__name__)


def _mix(matrix: Sequence[Sequence], polys: Sequence[Poly]) -> List[Poly]:
    out = []
    for row in matrix:
        total = Poly.zero(polys[0].nvars)
        for c, p in zip(row, polys):
            if c:
                total = total + p.scale(c)
        out.append(total)
    return out


# ---------------------------------------------------------------------------
# MP1


@dataclass(frozen=True)
class PartialJacobian:
    change: LinearChange
    mix: LinearChange
    frame: LinearChange
    psi: Tuple[Poly, ...]
    jacobian: Poly
    mult_f: Multiplicity
    mult_f_psi: Multiplicity
    mult_f_jacobian: Multiplicity
    mult_f_jacobian_psi: Multiplicity
    bound_f_jacobian: Multiplicity
    bound_f_jacobian_psi: Multiplicity
    attempts: int


def mp1_select_partial_jacobian(f: Sequence[Poly], psi: Sequence[Poly], rng: RandomSource, *,
                                frame: Optional[LinearChange] = None, caps: Optional[ResourceCaps] = None,
                                start_attempt: int = 0, mult_f: Optional[Multiplicity] = None,
                                mult_f_psi: Optional[Multiplicity] = None) -> PartialJacobian:
    """
    Coordinates and a mix of psi whose partial Jacobian J = d(psi)/d(z_{k+1..n}) satisfies

        mult(f, J) <= d * mult(f) * mult(f, psi)
        mult(f, J, psi_{k+2..n}) <= d * mult(f) * mult(f, psi) ** d

    with d = n - k. The first attempt keeps the coordinates and psi as given,
    the next two only mix psi, later ones also draw a random change of
    coordinates. `start_attempt` resumes the schedule after a rejected draw.
    """
    caps = resolve_caps(caps)
    f, psi = list(f), list(psi)
    if not psi:
        raise DimensionError("Partial Jacobian of an empty tuple", procedure="MP1")
    n = psi[0].nvars
    k, d = len(f), len(psi)
    if k + d != n:
        raise DimensionError(f"MP1 needs k + d = n, got {k} + {d} != {n}", procedure="MP1")
    frame = frame or LinearChange.identity(n)
    if mult_f is None:
        mult_f = tuple_multiplicity(f, rng, nvars=n, caps=caps)
    if mult_f_psi is None:
        mult_f_psi = tuple_multiplicity(f + psi, rng, nvars=n, caps=caps)
    if mult_f == INFINITY or mult_f_psi == INFINITY:
        raise DomainError(f"MP1 needs finite multiplicities, got mult(f)={mult_f}, mult(f,psi)={mult_f_psi}",
                          procedure="MP1")
    bound_j = d * mult_f * mult_f_psi
    bound_j_psi = d * mult_f * mult_f_psi ** d
    slots = list(range(k + 1, n + 1))

    for attempt in range(start_attempt, caps.max_retries):
        if attempt == 0:
            change, mix = LinearChange.identity(n), LinearChange.identity(d)
        elif attempt < 3:
            change = LinearChange.identity(n)
            mix = LinearChange.random(d, rng, caps.coefficient_bound)
        else:
            change = LinearChange.random(n, rng, caps.coefficient_bound)
            mix = LinearChange.random(d, rng, caps.coefficient_bound)
        new_frame = frame @ change
        mixed = _mix(mix.matrix, psi)
        jacobian = new_frame.partial_jacobian(mixed, slots)
        if jacobian.is_zero():
            logger.debug(f"MP1 attempt {attempt}: vanishing partial Jacobian")
            continue
        m_j = tuple_multiplicity(f + [jacobian], rng, nvars=n, caps=caps)
        if m_j > bound_j:
            logger.debug(f"MP1 attempt {attempt}: mult(f, J) = {m_j} above {bound_j}")
            continue
        m_j_psi = tuple_multiplicity(f + [jacobian] + mixed[1:], rng, nvars=n, caps=caps)
        if m_j_psi > bound_j_psi:
            logger.debug(f"MP1 attempt {attempt}: mult(f, J, psi') = {m_j_psi} above {bound_j_psi}")
            continue
        logger.info(f"MP1 certified mult(f,J)={m_j} <= {bound_j}, mult(f,J,psi')={m_j_psi} <= {bound_j_psi} "
                    f"at attempt {attempt}")
        return PartialJacobian(change, mix, new_frame, tuple(mixed), jacobian, mult_f, mult_f_psi,
                               m_j, m_j_psi, bound_j, bound_j_psi, attempt + 1)
    raise ResourceCapError(f"No coordinates certified the partial Jacobian bounds within {caps.max_retries} draws",
                           procedure="MP1")


# ---------------------------------------------------------------------------
# MP2


@dataclass
class TriangularResolution:
    """
    h_j(w_j, ..., w_n) with h_j∘gamma in the j-th filtration ideal.

    `shear` records the unipotent change S applied while preparing the
    entries: every h_j here equals the found polynomial composed with S and
    gamma is S^-1 applied to the map the resolution was asked for.
    """
    h: List[Poly]
    mu: List[Multiplicity]
    lambdas: List[int]
    witnesses: List[MembershipCertificate]
    gamma: Tuple[Poly, ...]
    filtration: Filtration
    shear: LinearChange
    eliminants: List[Poly] = field(default_factory=list)
    hypotheses: List[Multiplicity] = field(default_factory=list)
    ideal_multiplicities: List[Multiplicity] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.h)

    def verify(self) -> bool:
        for j, (h, mu, cert) in enumerate(zip(self.h, self.mu, self.witnesses), start=1):
            if any(v < j for v in h.variables()):
                return False
            if h.ord_in_variable(j) != mu:
                return False
            if cert.target != compose(h, self.gamma) or cert.generators != self.filtration.stages[j - 1]:
                return False
            if not cert.verify():
                return False
        return True


def _eliminant_generators(ideal: Sequence[Poly], gamma: Sequence[Poly], j: int,
                          caps: ResourceCaps) -> List[Poly]:
    """Generators of the image of V(ideal) under (gamma_j, ..., gamma_n), in variables w_j..w_n."""
    n = len(gamma)
    m = n - j + 1
    size = n + m
    gens = [g.embed(size) for g in ideal]
    for i in range(m):
        gens.append(Poly.variable(size, n + i + 1) - gamma[j - 1 + i].embed(size))
    return elimination_ideal(gens, keep_from=n + 1, caps=caps)


def _vanishing_part(p: Poly) -> Poly:
    """Square-free product of the irreducible factors of p that vanish at the origin."""
    if p.is_constant():
        return Poly.one(p.nvars)
    sp = to_sympy(p, "w")
    _, factors = sp.factor_list()
    result = Poly.one(p.nvars)
    for factor, _ in factors:
        q = from_sympy(factor, sp.gens)
        if q.constant_term == 0:
            result = result * q
    return result


def _prepare(generators: Sequence[Poly], j: int, n: int) -> Poly:
    """The prepared generator of minimal order in its first variable, placed in w_1..w_n."""
    best = None
    for g in generators:
        q = _vanishing_part(g)
        key = (q.ord_in_variable(1) if q.nvars else 0, q.degree(), len(q), q.to_text("w"))
        if best is None or key < best[0]:
            best = (key, q)
    if best is None:
        raise DomainError(f"Elimination for w_{j} returned no generators", procedure="MP2")
    logger.debug(f"MP2 chose eliminant {best[1].to_text('w')} for w_{j}")
    return best[1].embed(n, j - 1)


def _weierstrass_shaped(q: Poly, j: int) -> bool:
    """deg_{w_j} q equals ord_{w_j} q and the top coefficient in w_j is a constant."""
    order = q.ord_in_variable(j)
    if order == INFINITY or q.degree_in(j) != order:
        return False
    top = [e for e in q.terms if e[j - 1] == order]
    return len(top) == 1 and sum(top[0]) == order


def _top_coefficient(q: Poly, j: int) -> Fraction:
    exp = [0] * q.nvars
    exp[j - 1] = q.degree_in(j)
    return q.coefficient(exp)


def _shear(n: int, j: int, slots: Sequence[int], coefficients: Sequence[int]) -> LinearChange:
    """w_i -> w_i + c_i w_j for i in slots."""
    matrix = [[int(r == c) for c in range(n)] for r in range(n)]
    for i, c in zip(slots, coefficients):
        matrix[i - 1][j - 1] = c
    return LinearChange(matrix)


def _shear_slots(j: int, n: int, coordinate_slots: int) -> List[int]:
    if j <= coordinate_slots:
        return list(range(j + 1, coordinate_slots + 1))
    return list(range(j + 1, n + 1))


def mp2_triangular_resolution(gamma: Sequence[Poly], filtration: Filtration, rng: RandomSource, *,
                              caps: Optional[ResourceCaps] = None, coordinate_slots: int = 0) -> TriangularResolution:
    """
    Triangular resolution of (gamma, filtration) with Weierstrass-shaped entries.

    Each h_j is a power of a prepared generator of the elimination ideal of
    I_j + (w - gamma(z)); the power is the smallest one landing in I_j.
    When a generator is not Weierstrass-shaped in w_j, a shear w_i -> w_i + c w_j
    is applied to it and compensated in gamma. Shears only mix slots of the
    same kind: the first `coordinate_slots` entries of gamma are coordinate
    functions, the rest pre-multiplier combinations.

    Args:
        gamma: n polynomials in n variables with gamma(0) = 0
        filtration: generator lists I_1 ⊆ ... ⊆ I_m, m <= n
        rng: source for multiplicity sampling and shear coefficients
        caps: resource limits
        coordinate_slots: number of leading coordinate-function entries of gamma
    """
    caps = resolve_caps(caps)
    gamma = list(gamma)
    n = len(gamma)
    if any(g.nvars != n for g in gamma):
        raise DimensionError(f"MP2 needs a map of {n} polynomials in {n} variables", procedure="MP2")
    if len(filtration) > n:
        raise DimensionError(f"Filtration of length {len(filtration)} exceeds {n}", procedure="MP2")
    shear_total = LinearChange.identity(n)
    resolution = TriangularResolution([], [], [], [], tuple(gamma), filtration, shear_total)

    for j in range(1, len(filtration) + 1):
        ideal = list(filtration.stages[j - 1])
        mult_ideal = tuple_multiplicity(ideal, rng, nvars=n, caps=caps)
        if mult_ideal == INFINITY:
            raise DomainError(f"I_{j} has infinite multiplicity", procedure="MP2")
        q = _prepare(_eliminant_generators(ideal, gamma, j, caps), j, n)

        if not _weierstrass_shaped(q, j):
            slots = _shear_slots(j, n, coordinate_slots)
            if not slots:
                raise DomainError(f"Eliminant {q.to_text('w')} is not Weierstrass-shaped in w_{j} "
                                  f"and no shear is admissible", procedure="MP2")
            for _ in range(caps.max_retries):
                shear = _shear(n, j, slots, rng.nonzero_integers(len(slots), caps.coefficient_bound))
                candidate = shear.apply(q)
                if _weierstrass_shaped(candidate, j):
                    break
            else:
                raise DomainError(f"No shear made the eliminant Weierstrass-shaped in w_{j} "
                                  f"within {caps.max_retries} draws", procedure="MP2")
            logger.info(f"MP2 sheared slots {slots} into w_{j}")
            q = candidate
            shear_total = shear_total @ shear
            gamma = _mix(shear.inverse().matrix, gamma)
            resolution.h = [shear.apply(h) for h in resolution.h]
            resolution.eliminants = [shear.apply(e) for e in resolution.eliminants]

        q = q / _top_coefficient(q, j)
        hypothesis = tuple_multiplicity(ideal + gamma[j:], rng, nvars=n, caps=caps)
        if hypothesis == INFINITY:
            raise DomainError(f"mult(I_{j}, gamma_{j + 1}..gamma_{n}) is infinite", procedure="MP2")
        try:
            lam, witness = radical_membership_power(compose(q, gamma), ideal, mult_ideal, rng=rng, caps=caps)
        except NotInRadicalError as e:
            logger.error(f"Error resolving w_{j}: {e}")
            raise DomainError(f"Eliminant for w_{j} does not pull back into the radical of I_{j}: {e}",
                              procedure="MP2")
        h = q ** lam
        order = h.ord_in_variable(j)
        bound = n * hypothesis * mult_ideal
        if order > bound:
            raise DomainError(f"ord_w{j} h_{j} = {order} exceeds n * mu_j * mult(I_{j}) = {bound}", procedure="MP2")
        resolution.h.append(h)
        resolution.mu.append(order)
        resolution.lambdas.append(lam)
        resolution.witnesses.append(witness)
        resolution.eliminants.append(q)
        resolution.hypotheses.append(hypothesis)
        resolution.ideal_multiplicities.append(mult_ideal)
        logger.info(f"MP2 entry {j}: ord {order} (lambda {lam}) <= {bound}")

    resolution.gamma = tuple(gamma)
    resolution.shear = shear_total
    return resolution


# ---------------------------------------------------------------------------
# MP3


@dataclass
class Extension:
    multiplier: Multiplier
    constant: Fraction
    decomposed: List[Multiplier]
    premultipliers: List[Multiplier]
    p1_steps: int
    p2_steps: int
    max_root: int
    lattice_size: int


def _reverse_lex(mus: Sequence[int]) -> List[Tuple[int, ...]]:
    """{1..mu_1} x ... x {1..mu_k} in increasing reverse-lexicographic order."""
    ranges = [range(1, m + 1) for m in reversed(mus)]
    return [tuple(reversed(point)) for point in itertools.product(*ranges)]


def mp3_jacobian_extension(gamma: Sequence[Poly], resolution: TriangularResolution, ideal: Sequence[Multiplier],
                           trace: Trace, rng: RandomSource, *, combinations: Optional[Sequence[Sequence]] = None,
                           caps: Optional[ResourceCaps] = None) -> Extension:
    """
    h_{k+1}∘gamma as a multiplier, by P1/P2 steps over the lattice of derivative orders.

    `ideal` holds the multipliers f_1..f_k generating I_k and gamma_{k+1..n}
    are registered as pre-multipliers (with `combinations` over the trace's
    initial set when given). For each L in reverse-lexicographic order a P1
    step produces J_L from (B_1..B_k, gamma_{k+1..n}) and a P2 step of root
    at most m_L + 1 admits (A_L h_{k+1})∘gamma.
    """
    caps = resolve_caps(caps)
    gamma = list(gamma)
    n = len(gamma)
    k = len(resolution.h) - 1
    if len(ideal) != k:
        raise DimensionError(f"MP3 needs {k} multipliers for I_k, got {len(ideal)}", procedure="MP3")
    mus = [int(m) for m in resolution.mu[:k]]
    if any(m < 1 for m in mus):
        raise DomainError(f"MP3 needs positive orders, got {mus}", procedure="MP3")
    h = resolution.h
    start_steps = (trace.p1_steps, trace.p2_steps)

    premultipliers = []
    for offset, i in enumerate(range(k + 1, n + 1)):
        combo = combinations[offset] if combinations is not None else None
        premultipliers.append(register_premultiplier(gamma[i - 1], trace, combination=combo, note=f"gamma_{i}"))
    decomposed = [apply_p2(compose(h[j - 1], gamma), list(ideal[:j]), trace, rng, max_power=1, caps=caps,
                           note=f"h_{j}∘gamma in I_{j}") for j in range(1, k + 1)]

    # derivatives[j][l] = d^l h_{j+1} / dw_{j+1}^l
    derivatives: List[List[Poly]] = []
    for j in range(k):
        chain = [h[j]]
        for _ in range(mus[j]):
            chain.append(chain[-1].derivative(j + 1))
        derivatives.append(chain)

    outputs: Dict[Tuple[int, ...], Multiplier] = {}
    lattice = _reverse_lex(mus)
    max_root = 0
    for point in lattice:
        m_point = sum(1 for l in point if l > 1)
        inputs = []
        for j, l in enumerate(point, start=1):
            if l > 1:
                inputs.append(outputs[tuple(mus[:j - 1]) + (l - 1,) + point[j:]])
            else:
                inputs.append(decomposed[j - 1])
        jacobian = apply_p1(inputs + premultipliers, trace, note=f"J_L at L={point}")
        a_point = Poly.one(n)
        for j, l in enumerate(point):
            a_point = a_point * derivatives[j][l]
        target = compose(a_point * h[k], gamma)
        try:
            out = apply_p2(target, list(ideal) + [jacobian], trace, rng, max_power=m_point + 1, caps=caps,
                           note=f"(A_L h_{k + 1})∘gamma at L={point}")
        except NotInRadicalError as e:
            logger.error(f"Error extending at L={point}: {e}")
            raise DomainError(f"Certification failed at lattice point {point}: {e}", procedure="MP3")
        root = trace.node(out.node).root
        if root > k + 1:
            raise VerificationError(f"Root order {root} exceeds {k + 1} at L={point}", node=out.node,
                                    procedure="MP3")
        max_root = max(max_root, root)
        outputs[point] = out

    top = tuple(mus)
    constant = Poly.one(n)
    for j in range(k):
        constant = constant * derivatives[j][mus[j]]
    if not constant.is_constant() or constant.is_zero():
        raise DomainError(f"Top derivative product {constant} is not a nonzero constant", procedure="MP3")
    p1_steps = trace.p1_steps - start_steps[0]
    p2_steps = trace.p2_steps - start_steps[1] - k
    budget = math.prod(mus)
    if p1_steps > budget or p2_steps > budget:
        raise VerificationError(f"MP3 used {p1_steps} P1 and {p2_steps} P2 steps, budget {budget}",
                                procedure="MP3")
    logger.info(f"MP3 over {len(lattice)} lattice points: max root {max_root}")
    return Extension(outputs[top], constant.constant_term, decomposed, premultipliers, p1_steps, p2_steps,
                     max_root, len(lattice))


# ---------------------------------------------------------------------------
# iteration


@dataclass
class StageReport:
    k: int
    siu_multiplicity: Multiplicity
    siu_bound: Multiplicity
    mult_f_jacobian: Multiplicity = 0
    mult_f_jacobian_psi: Multiplicity = 0
    mp1_attempts: int = 0
    mu: List[Multiplicity] = field(default_factory=list)
    lambdas: List[int] = field(default_factory=list)
    map_multiplicity: Multiplicity = 0
    p1_steps: int = 0
    p2_steps: int = 0
    max_root: int = 0
    multiplicity: Multiplicity = 0
    multiplicity_bound: Multiplicity = 0
    order: Optional[Fraction] = None
    order_bound: str = ""
    order_verdict: Optional[str] = None
    early_unit: bool = False
    jacobian: Optional[Poly] = None
    selection: List[List[int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        def num(v):
            return "inf" if v == INFINITY else int(v)
        return {
            "k": self.k,
            "siu_multiplicity": num(self.siu_multiplicity),
            "siu_bound": num(self.siu_bound),
            "mult_f_jacobian": num(self.mult_f_jacobian),
            "mult_f_jacobian_psi": num(self.mult_f_jacobian_psi),
            "mp1_attempts": self.mp1_attempts,
            "mu": [num(m) for m in self.mu],
            "lambdas": self.lambdas,
            "map_multiplicity": num(self.map_multiplicity),
            "p1_steps": self.p1_steps,
            "p2_steps": self.p2_steps,
            "max_root": self.max_root,
            "multiplicity": num(self.multiplicity),
            "multiplicity_bound": num(self.multiplicity_bound),
            "order": str(self.order) if self.order is not None else None,
            "order_bound": self.order_bound,
            "order_verdict": self.order_verdict,
            "early_unit": self.early_unit,
            "jacobian": self.jacobian.to_text() if self.jacobian is not None else None,
            "selection": self.selection,
        }


@dataclass
class PipelineState:
    n: int
    nu: Multiplicity
    trace: Trace
    k: int = 0
    frame: Optional[LinearChange] = None
    psi: Tuple[Poly, ...] = ()
    f: Tuple[Poly, ...] = ()
    multipliers: Tuple[Multiplier, ...] = ()
    stages: Tuple[StageReport, ...] = ()
    unit: Optional[Multiplier] = None

    def __post_init__(self):
        if self.frame is None:
            self.frame = LinearChange.identity(self.n)


def _check_jacobian_containment(filtration: Filtration, jacobian: Poly, caps: ResourceCaps) -> None:
    """I_{k+1} ⊆ I_k + (J), generator by generator."""
    previous = list(filtration.stages[-2]) if len(filtration) > 1 else []
    basis = complete_basis(previous + [jacobian], caps=caps)
    for g in filtration.stages[-1]:
        if not ideal_contains(basis, g):
            raise DomainError(f"{g} lies outside I_k + (J)", procedure="iteration step")


def _close_with_unit(state: PipelineState, last: Multiplier, caps: ResourceCaps) -> Multiplier:
    """A multiplier that is a unit germ; a non-constant one is traded for 1 by a P2 step of root 1."""
    if last.poly.is_constant():
        return last
    one = Poly.one(state.n)
    return apply_p2(one, [last], state.trace, max_power=1, caps=caps, note="unit germ")


def iterate_step(state: PipelineState, F: Sequence[Poly], rng: RandomSource,
                 caps: Optional[ResourceCaps] = None) -> PipelineState:
    """
    From multipliers f_1..f_k to g_1..g_{k+1} with

        mult(g) <= n^(k+3) * mu^(n+k+3) * nu^((n-k)(n+1)),

    g_j = h_j∘gamma in (f_1..f_j) for j <= k and g_{k+1} produced by MP3.
    """
    caps = resolve_caps(caps)
    n, k, nu = state.n, state.k, state.nu
    if k >= n:
        raise DomainError(f"Iteration already reached stage {n}", procedure="iteration step")
    F = list(F)
    f = list(state.f)
    logger.info(f"Iteration step k={k}")
    try:
        mu = tuple_multiplicity(f, rng, nvars=n, caps=caps)
        if mu == INFINITY:
            raise DomainError(f"mult(f_1..f_{k}) is infinite", procedure="iteration step")
        side = [(state.frame.coordinate_functions()[:k], nu ** (n - k))] if k else []
        selection = siu_select_with_coefficients(f, F, n - k, rng, mu=mu, nu=nu, side_conditions=side, caps=caps)

        attempt = 0
        while True:
            pj = mp1_select_partial_jacobian(f, selection.combinations, rng, frame=state.frame, caps=caps,
                                             start_attempt=attempt, mult_f=mu)
            attempt = pj.attempts
            rows = matmul(pj.mix.matrix, selection.coefficients)
            report = StageReport(k, selection.multiplicity, selection.bound, pj.mult_f_jacobian,
                                 pj.mult_f_jacobian_psi, pj.attempts, jacobian=pj.jacobian,
                                 selection=[[int(c) for c in row] for row in selection.coefficients])

            if k == 0 and pj.jacobian.is_unit():
                pres = [register_premultiplier(p, state.trace, combination=row, note=f"psi_{i}")
                        for i, (p, row) in enumerate(zip(pj.psi, rows), start=1)]
                jac = apply_p1(pres, state.trace, note="Jacobian of pre-multipliers")
                unit = _close_with_unit(state, jac, caps)
                report.early_unit = True
                report.order = unit.order
                report.p1_steps = 1
                logger.info(f"Jacobian of the pre-multipliers is a unit: order {unit.order}")
                return replace(state, frame=pj.frame, psi=pj.psi, stages=state.stages + (report,), unit=unit)

            coordinates = pj.frame.coordinate_functions()
            gamma = coordinates[:k] + list(pj.psi)
            stages = [tuple(f[:j]) for j in range(1, k + 1)] + [tuple(f) + (pj.jacobian,)]
            filtration = Filtration.from_lists(stages)
            _check_jacobian_containment(filtration, pj.jacobian, caps)
            try:
                resolution = mp2_triangular_resolution(gamma, filtration, rng, caps=caps, coordinate_slots=k)
            except DomainError as e:
                if attempt >= caps.max_retries:
                    raise
                logger.warning(f"Resolution failed after MP1 attempt {attempt}: {e}; drawing new coordinates")
                continue
            break

        frame = pj.frame @ resolution.shear
        inverse = resolution.shear.inverse().matrix
        d = n - k
        block = [[inverse[k + a][k + b] for b in range(d)] for a in range(d)]
        combinations = matmul(block, rows)
        extension = mp3_jacobian_extension(resolution.gamma, resolution, state.multipliers, state.trace, rng,
                                           combinations=combinations, caps=caps)

        g = [m.poly for m in extension.decomposed] + [extension.multiplier.poly]
        mult_g = tuple_multiplicity(g, rng, nvars=n, caps=caps)
        bound = n ** (k + 3) * mu ** (n + k + 3) * nu ** ((n - k) * (n + 1))
        if mult_g > bound:
            raise DomainError(f"mult(g) = {mult_g} exceeds n^(k+3) mu^(n+k+3) nu^((n-k)(n+1)) = {bound}",
                              procedure="iteration step")
        epsilon = min((m.order for m in state.multipliers), default=PRE_MULTIPLIER_ORDER)
        epsilon = min(epsilon, PRE_MULTIPLIER_ORDER)
        order_bound = iteration_order_bound(epsilon, k, math.prod(int(m) for m in resolution.mu[:k]))
        order_ok = achieved_at_least(extension.multiplier.order, order_bound, caps.digit_cap)
        if order_ok is False:
            raise VerificationError(f"Order {extension.multiplier.order} below {order_bound}",
                                    node=extension.multiplier.node, procedure="iteration step")
        if order_ok is None:
            logger.warning(f"Stage {k + 1}: order {extension.multiplier.order} against {order_bound} "
                           f"undecided within {caps.digit_cap} digits")
    except Exception as e:
        logger.error(f"Error in iteration step k={k}: {e}")
        raise

    report.mu = list(resolution.mu)
    report.lambdas = list(resolution.lambdas)
    report.map_multiplicity = map_multiplicity(list(resolution.gamma), rng, caps)
    report.p1_steps = extension.p1_steps
    report.p2_steps = extension.p2_steps
    report.max_root = extension.max_root
    report.multiplicity = mult_g
    report.multiplicity_bound = bound
    report.order = extension.multiplier.order
    report.order_bound = str(order_bound)
    report.order_verdict = "pass" if order_ok else "undecided"
    logger.info(f"Stage {k + 1}: mult(g) = {mult_g} <= {bound}, order {extension.multiplier.order}")

    multipliers = tuple(extension.decomposed) + (extension.multiplier,)
    new_state = replace(state, k=k + 1, frame=frame, psi=tuple(resolution.gamma[k:]), f=tuple(g),
                        multipliers=multipliers, stages=state.stages + (report,))
    if extension.multiplier.poly.is_unit():
        new_state.unit = _close_with_unit(new_state, extension.multiplier, caps)
    return new_state


# ---------------------------------------------------------------------------
# end to end


@dataclass
class RunReport:
    n: int
    nu: Multiplicity
    unit: Multiplier
    stages: List[StageReport]
    trace_report: TraceReport
    bound: BoundReport
    # closing z_j steps are certified against mult(f_n), not against k + 1
    closing_bound: Optional[int] = None
    closing_max_root: int = 0

    @property
    def verdict(self) -> Optional[str]:
        return self.bound.verdict

    def _closing_rule(self) -> str:
        if self.closing_bound is None:
            return "none, the last stage produced a unit"
        if self.n == 1:
            return "P2 on z_1 against the pre-multipliers, root <= nu"
        return "P2 on z_j against f_n, root <= mult(f_n)"

    def root_orders(self) -> dict:
        """Where the largest P2 roots came from and what they were checked against."""
        return {
            "extension_max": max((s.max_root for s in self.stages), default=0),
            "extension_bound": self.n,
            "closing_max": self.closing_max_root,
            "closing_bound": self.closing_bound,
            "closing_rule": self._closing_rule(),
        }

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "nu": int(self.nu),
            "unit": self.unit.poly.to_text(),
            "unit_order": str(self.unit.order),
            "verdict": self.verdict,
            "epsilon": self.bound.to_model().epsilon_formula,
            "steps": self.trace_report.steps,
            "p1_steps": self.trace_report.p1_steps,
            "p2_steps": self.trace_report.p2_steps,
            "max_root": self.trace_report.max_root,
            "root_orders": self.root_orders(),
            "checks": self.bound.checks,
            "trace_passed": self.trace_report.passed,
            "stages": [s.to_dict() for s in self.stages],
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([s.to_dict() for s in self.stages])


def _unit_vector(size: int, index: int) -> List[int]:
    return [int(i == index) for i in range(size)]


def run_to_unit(F: Sequence[Poly], rng: RandomSource,
                caps: Optional[ResourceCaps] = None) -> Tuple[Trace, Multiplier, RunReport]:
    """
    Drive Kohn's algorithm on the pre-multipliers F until 1 is a multiplier.

    Returns the trace, the unit multiplier and a report comparing the
    achieved order with eps(n, nu).
    """
    caps = resolve_caps(caps)
    F = list(F)
    if not F:
        raise DimensionError("run_to_unit needs at least one pre-multiplier", procedure="iteration step")
    n = F[0].nvars
    if any(p.nvars != n for p in F):
        raise DimensionError("Pre-multipliers live in different rings")
    for p in F:
        if p.constant_term != 0:
            raise DomainError(f"Pre-multiplier {p} does not vanish at the origin", procedure="pre-multiplier")
    nu = tuple_multiplicity(F, rng, nvars=n, caps=caps)
    if nu == INFINITY:
        raise DomainError("Pre-multipliers have infinite multiplicity", procedure="iteration step")
    trace = Trace(n, F)
    logger.info(f"Running to the unit: n={n}, nu={nu}, {len(F)} pre-multipliers")
    stages: List[StageReport] = []
    closing_bound: Optional[int] = None
    closing: List[Multiplier] = []

    if n == 1:
        pres = [register_premultiplier(p, trace, combination=_unit_vector(len(F), i)) for i, p in enumerate(F)]
        closing_bound = int(nu)
        z = apply_p2(Poly.variable(1, 1), pres, trace, rng, max_power=closing_bound, caps=caps, note="z_1")
        closing = [z]
        unit = apply_p1([z], trace, note="unit")
    else:
        state = PipelineState(n, nu, trace)
        while state.unit is None and state.k < n:
            state = iterate_step(state, F, rng, caps)
        stages = list(state.stages)
        if state.unit is not None:
            unit = state.unit
        else:
            # one tracked completion serves the multiplicity and every z_j step
            basis = complete_basis(list(state.f), caps=caps, track=True)
            m = basis_multiplicity(basis)
            if m == INFINITY:
                raise DomainError("Final multipliers have infinite multiplicity", procedure="unit step")
            closing_bound = max(int(m), 1)
            zs = [apply_p2(Poly.variable(n, j), list(state.multipliers), trace, rng, max_power=closing_bound,
                           caps=caps, note=f"z_{j}") for j in range(1, n + 1)]
            closing = zs
            unit = apply_p1(zs, trace, note="unit")

    if not unit.poly.is_unit():
        raise VerificationError(f"Final multiplier {unit.poly} is not a unit", node=unit.node, step="unit step")
    trace_report = verify_trace(trace)
    if not trace_report.passed:
        raise VerificationError(f"Trace failed at nodes {trace_report.failures}", node=trace_report.failures[0],
                                step="trace")
    bound = compare_achieved(n, int(nu), unit.order, caps)
    if n == 1:
        classical = Fraction(1, 4 * int(nu))
        one_variable = achieved_at_least(unit.order, classical, caps.digit_cap)
        bound.checks["one_variable_order"] = one_variable
        if one_variable is False:
            logger.error(f"Unit order {unit.order} below 1/(4 nu) = {classical}")
            bound.verdict = "fail"
    report = RunReport(n, nu, unit, stages, trace_report, bound, closing_bound=closing_bound,
                       closing_max_root=max((trace.node(z.node).root for z in closing), default=0))
    logger.info(f"Unit reached with order {unit.order} in {trace_report.steps} steps; verdict {bound.verdict}")
    return trace, unit, report
