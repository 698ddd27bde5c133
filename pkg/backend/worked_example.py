"""
Regression walk through the worked instance psi = (z1^2, z2^2, z3^2) in C^3.

The first stage of the pipeline runs on the complementary combinations
(psi_1, psi_2 - psi_1, psi_3 - psi_1) and the quoted values (multiplicity 8,
Jacobian 8*z1*z2*z3 of multiplicity 3, quotient dimension at most 20) are
read from its stage report and trace. The later coordinate changes are
hand-picked, so their Jacobian shapes are computed with the same frame
routines MP1 uses. Each check is a named step so a mismatch reports where
the pipeline diverged.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import pandas as pd

from config import ResourceCaps, resolve_caps
from errors import VerificationError
from kohn import Trace, verify_trace
from localalg import local_multiplicity, macaulay_multiplicity, map_multiplicity, tuple_multiplicity
from meta import PipelineState, RunReport, StageReport, iterate_step, run_to_unit
from polyring import LinearChange, Poly, RandomSource, apply_linear_change, combine, parse_system

logger = logging.getLogger(__name__)

PSI = "z1^2, z2^2, z3^2"
PSI_MULTIPLICITY = 8
JACOBIAN_MULTIPLICITY = 3
QUOTIENT_DIMENSION_BOUND = 20
MAP_MULTIPLICITY = 4

# (psi_1, psi_2 - psi_1, psi_3 - psi_1)
COMPLEMENTARY_COEFFICIENTS = [[1, 0, 0], [-1, 1, 0], [-1, 0, 1]]
# u = (z1, z2 + z1, z3 + z1)
FIRST_CHANGE = [[1, 0, 0], [1, 1, 0], [1, 0, 1]]
# u = (z1 + z2 + z3, z2 + z1, z3 + z1)
SECOND_CHANGE = [[1, 1, 1], [1, 1, 0], [1, 0, 1]]


@dataclass
class StepCheck:
    step: str
    expected: str
    observed: str
    ok: bool


@dataclass
class WorkedExampleReport:
    checks: List[StepCheck] = field(default_factory=list)
    run: Optional[RunReport] = None

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def failures(self) -> List[str]:
        return [c.step for c in self.checks if not c.ok]

    def record(self, step: str, expected, observed, ok: bool) -> None:
        self.checks.append(StepCheck(step, str(expected), str(observed), bool(ok)))
        level = logging.INFO if ok else logging.ERROR
        logger.log(level, f"{step}: expected {expected}, observed {observed}")

    def raise_for_failures(self) -> None:
        if not self.passed:
            raise VerificationError(f"Worked example diverged at {', '.join(self.failures)}",
                                    step=self.failures[0])

    def to_dict(self) -> dict:
        out = {
            "passed": self.passed,
            "checks": [{"step": c.step, "expected": c.expected, "observed": c.observed, "ok": c.ok}
                       for c in self.checks],
        }
        if self.run is not None:
            out["run"] = self.run.to_dict()
        return out

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([vars(c) for c in self.checks])


def first_stage(psi: List[Poly], rng: RandomSource, caps: ResourceCaps) -> PipelineState:
    """Stage 1 of the pipeline started from the complementary combinations."""
    combinations = [combine(psi, row) for row in COMPLEMENTARY_COEFFICIENTS]
    nu = tuple_multiplicity(combinations, rng, caps=caps)
    state = PipelineState(len(psi), nu, Trace(len(psi), combinations))
    return iterate_step(state, combinations, rng, caps)


def example_section8(rng: RandomSource, caps: Optional[ResourceCaps] = None,
                     terminate: bool = False) -> WorkedExampleReport:
    """
    Check every quoted intermediate of the worked instance.

    With `terminate` the full pipeline is also run to the unit and its trace
    and order verdict become further steps.
    """
    caps = resolve_caps(caps)
    report = WorkedExampleReport()
    psi = parse_system(PSI, 3)
    z1, z2, z3 = (Poly.variable(3, i) for i in (1, 2, 3))

    local = local_multiplicity(psi, caps)
    macaulay = macaulay_multiplicity(psi, caps.degree_cap)
    state = first_stage(psi, rng, caps)
    stage: StageReport = state.stages[0]
    report.record("multiplicity of psi", PSI_MULTIPLICITY,
                  f"{local} (local), {macaulay} (Macaulay), {state.nu} (pipeline)",
                  local == macaulay == state.nu == PSI_MULTIPLICITY)

    differences = [z2 ** 2 - z1 ** 2, z3 ** 2 - z1 ** 2]
    kept = [[int(i == j) for j in range(3)] for i in range(3)]
    report.record("complementary pre-multipliers", "z2^2 - z1^2, z3^2 - z1^2 kept by the Siu selection",
                  stage.selection, stage.selection == kept
                  and list(state.trace.premultipliers[1:]) == differences)

    j1 = stage.jacobian
    report.record("Jacobian of psi", "8*z1*z2*z3 at the first MP1 attempt", f"{j1} (attempt {stage.mp1_attempts})",
                  j1 == (z1 * z2 * z3).scale(8) and stage.mp1_attempts == 1)
    report.record("multiplicity of the Jacobian", JACOBIAN_MULTIPLICITY, stage.mult_f_jacobian,
                  stage.mult_f_jacobian == JACOBIAN_MULTIPLICITY)

    dim_macaulay = macaulay_multiplicity([j1] + differences, caps.degree_cap)
    report.record("quotient dimension", f"<= {QUOTIENT_DIMENSION_BOUND}",
                  f"{stage.mult_f_jacobian_psi} (stage), {dim_macaulay} (Macaulay)",
                  stage.mult_f_jacobian_psi == dim_macaulay and dim_macaulay <= QUOTIENT_DIMENSION_BOUND)

    stage_trace = verify_trace(state.trace)
    report.record("first stage trace", "all nodes pass",
                  f"{stage_trace.steps} steps, order {stage.order}, {len(stage_trace.failures)} failures",
                  stage_trace.passed and stage.order_verdict == "pass")

    gamma = [z1] + differences
    mult_gamma = map_multiplicity(gamma, rng, caps)
    report.record("map multiplicity", MAP_MULTIPLICITY, mult_gamma, mult_gamma == MAP_MULTIPLICITY)

    shifted = apply_linear_change(j1, LinearChange(FIRST_CHANGE))
    report.record("Jacobian after the first change", "8*z1*(z2 + z1)*(z3 + z1)", shifted,
                  shifted == (z1 * (z2 + z1) * (z3 + z1)).scale(8))

    # polynomials stay in the u coordinates; d/dz_j is the derivative along column j
    j2 = LinearChange(SECOND_CHANGE).partial_jacobian(differences, [2, 3])
    report.record("second partial Jacobian", "4*(u2*u3 - (u2 + u3)*u1)", j2,
                  j2 == (z2 * z3 - (z2 + z3) * z1).scale(4))

    if terminate:
        trace, unit, run = run_to_unit(psi, rng, caps)
        report.run = run
        report.record("trace verification", "all nodes pass", f"{len(run.trace_report.failures)} failures",
                      run.trace_report.passed)
        roots = [(s.k, s.max_root) for s in run.stages if not s.early_unit]
        report.record("meta-procedure root orders", "<= k + 1", roots, all(r <= k + 1 for k, r in roots))
        report.record("unit order", "at least eps(3, 8)", unit.order, run.verdict == "pass")

    logger.info(f"Worked example: {len(report.checks) - len(report.failures)}/{len(report.checks)} checks passed")
    return report
