"""
Test the meta-procedures and the iteration to the unit
"""
import logging
import time
from fractions import Fraction

import pytest

import meta

from errors import DimensionError, DomainError
from kohn import Trace, register_premultiplier, verify_trace
from localalg import Filtration
from meta import (PipelineState, iterate_step, mp1_select_partial_jacobian, mp2_triangular_resolution,
                  mp3_jacobian_extension, run_to_unit)
from polyring import LinearChange, Poly, RandomSource, parse_poly, parse_system, variables


@pytest.mark.pipeline
class TestPartialJacobian:
    """Test MP1"""

    def test_first_attempt_keeps_coordinates(self, polys, rng, caps):
        """Test the identity draw is accepted when it certifies"""
        pj = mp1_select_partial_jacobian([], polys("z1^2, z2", 2), rng, caps=caps)
        assert pj.attempts == 1
        assert pj.change.is_identity()
        assert pj.jacobian == parse_poly("2*z1", 2)
        assert pj.mult_f_psi == 2
        assert pj.mult_f_jacobian <= pj.bound_f_jacobian == 4
        assert pj.mult_f_jacobian_psi <= pj.bound_f_jacobian_psi == 8

    def test_partial_in_trailing_slots(self, polys, rng, caps):
        """Test the Jacobian is taken in z_{k+1}..z_n only"""
        f = polys("z1^2", 2)
        pj = mp1_select_partial_jacobian(f, polys("z2^3 + z1", 2), rng, caps=caps)
        assert pj.jacobian == parse_poly("3*z2^2", 2)
        assert pj.mult_f == 2

    def test_frame_is_carried(self, polys, rng, caps):
        """Test the accumulated frame enters the partial derivatives"""
        frame = LinearChange([[1, 0], [1, 1]])
        pj = mp1_select_partial_jacobian(polys("z1", 2), polys("z2^2", 2), rng, frame=frame, caps=caps)
        assert pj.frame == frame
        assert pj.jacobian == parse_poly("2*z2", 2)

    def test_arity(self, polys, rng, caps):
        """Test k + d must equal n"""
        with pytest.raises(DimensionError):
            mp1_select_partial_jacobian(polys("z1", 2), polys("z1, z2", 2), rng, caps=caps)

    def test_infinite_multiplicity(self, polys, rng, caps):
        """Test MP1 refuses tuples of infinite multiplicity"""
        with pytest.raises(DomainError):
            mp1_select_partial_jacobian([], polys("z1*z2, z1^2*z2", 2), rng, caps=caps)


@pytest.mark.pipeline
class TestTriangularResolution:
    """Test MP2"""

    def test_monomial_filtration(self, polys, rng, caps):
        """Test (z1^2) ⊆ (z1^2, z2^3) over the identity map"""
        a, b = polys("z1^2, z2^3", 2)
        filtration = Filtration.from_lists([[a], [a, b]])
        resolution = mp2_triangular_resolution(variables(2), filtration, rng, caps=caps)
        assert resolution.h == [Poly.monomial((2, 0)), Poly.monomial((0, 3))]
        assert resolution.mu == [2, 3]
        assert resolution.lambdas == [2, 3]
        assert resolution.shear.is_identity()
        assert resolution.verify()

    def test_squarefree_eliminant(self, polys, rng, caps):
        """Test repeated factors are dropped before taking the power"""
        a, = polys("z1^2", 2)
        resolution = mp2_triangular_resolution(variables(2), Filtration.from_lists([[a]]), rng, caps=caps)
        assert resolution.eliminants == [Poly.monomial((1, 0))]
        assert resolution.h == [Poly.monomial((2, 0))]

    def test_unit_factor_dropped(self, polys, rng, caps):
        """Test factors that do not vanish at the origin are dropped"""
        a, = polys("z1 - z2*z1^2", 2)
        resolution = mp2_triangular_resolution(variables(2), Filtration.from_lists([[a]]), rng, caps=caps)
        assert resolution.h == [Poly.monomial((1, 0))]
        assert resolution.verify()

    def test_shear(self, polys, rng, caps):
        """Test an eliminant free of w1 is sheared into Weierstrass shape"""
        a, = polys("z2", 2)
        resolution = mp2_triangular_resolution(variables(2), Filtration.from_lists([[a]]), rng, caps=caps)
        assert not resolution.shear.is_identity()
        assert resolution.mu == [1]
        assert resolution.h[0].ord_in_variable(1) == 1
        assert resolution.verify()

    def test_shear_respects_slots(self, polys, rng, caps):
        """Test no shear is drawn across the coordinate block"""
        a, = polys("z2", 2)
        with pytest.raises(DomainError):
            mp2_triangular_resolution(variables(2), Filtration.from_lists([[a]]), rng, caps=caps,
                                      coordinate_slots=1)

    def test_filtration_too_long(self, polys, rng, caps):
        """Test a filtration longer than n"""
        a, b, c = polys("z1, z2, z1 + z2", 2)
        with pytest.raises(DimensionError):
            mp2_triangular_resolution(variables(2), Filtration.from_lists([[a], [a, b], [a, b, c]]), rng,
                                      caps=caps)


@pytest.mark.pipeline
class TestJacobianExtension:
    """Test MP3"""

    def test_extension_over_two_lattice_points(self, rng, caps):
        """Test the lattice walk for h_1 = w1^2, h_2 = 1"""
        F = parse_system("z1^2, z2", 2)
        trace = Trace(2, F)
        f1 = register_premultiplier(F[0], trace, combination=[1, 0])
        filtration = Filtration.from_lists([[F[0]], [F[0], Poly.one(2)]])
        gamma = variables(2)
        resolution = mp2_triangular_resolution(gamma, filtration, rng, caps=caps, coordinate_slots=1)
        assert resolution.h == [Poly.monomial((2, 0)), Poly.one(2)]

        ext = mp3_jacobian_extension(resolution.gamma, resolution, [f1], trace, rng, combinations=[[0, 1]],
                                     caps=caps)
        assert ext.lattice_size == 2
        assert ext.p1_steps == 2
        assert ext.p2_steps == 2
        assert ext.max_root == 1
        assert ext.constant == 2
        assert ext.multiplier.poly == Poly.constant(2, 2)
        assert ext.multiplier.order == Fraction(1, 8)
        assert [m.poly for m in ext.decomposed] == [F[0]]
        assert verify_trace(trace).passed

    def test_ideal_arity(self, rng, caps):
        """Test MP3 needs one multiplier per filtration stage below the top"""
        F = parse_system("z1^2, z2", 2)
        filtration = Filtration.from_lists([[F[0]], [F[0], Poly.one(2)]])
        resolution = mp2_triangular_resolution(variables(2), filtration, rng, caps=caps, coordinate_slots=1)
        with pytest.raises(DimensionError):
            mp3_jacobian_extension(resolution.gamma, resolution, [], Trace(2, F), rng, caps=caps)


@pytest.mark.pipeline
class TestIteration:
    """Test the iteration step and the run to the unit"""

    def test_first_step(self, polys, rng, caps):
        """Test stage 0 on (z1^2, z2) produces g_1 = z1^2"""
        F = polys("z1^2, z2", 2)
        state = iterate_step(PipelineState(2, 2, Trace(2, F)), F, rng, caps)
        assert state.k == 1
        assert state.f == (parse_poly("z1^2", 2),)
        assert state.unit is None
        report = state.stages[0]
        assert report.mu == [1]
        assert report.multiplicity == 2
        assert report.multiplicity <= report.multiplicity_bound == 512
        assert report.order == Fraction(1, 4)

    def test_early_unit(self, polys, rng, caps):
        """Test a unit Jacobian of the pre-multipliers ends the run at once"""
        trace, unit, report = run_to_unit(polys("z1, z2", 2), rng, caps)
        assert unit.poly == Poly.one(2)
        assert unit.order == Fraction(1, 4)
        assert report.stages[0].early_unit
        assert report.trace_report.p1_steps == 1
        assert report.trace_report.p2_steps == 0
        assert report.verdict == "pass"

    def test_one_variable(self, polys, rng, caps):
        """Test n = 1: P2 on z1 with root nu, then P1"""
        trace, unit, report = run_to_unit(polys("z1^2", 1), rng, caps)
        assert report.nu == 2
        assert trace.node(1).root == 2
        assert unit.order == Fraction(1, 8)
        assert report.verdict == "pass"
        assert report.bound.checks["one_variable_order"] is True

    def test_one_variable_cube(self, polys, rng, caps):
        """Test z1^3 reaches the unit at 1/(4 nu) = 1/12 with the closing root reported"""
        trace, unit, report = run_to_unit(polys("z1^3", 1), rng, caps)
        assert report.nu == 3
        assert trace.node(1).root == 3
        assert unit.order == Fraction(1, 12)
        assert report.bound.checks["one_variable_order"] is True
        assert report.verdict == "pass"
        orders = report.to_dict()["root_orders"]
        assert orders["closing_max"] == orders["closing_bound"] == 3
        assert orders["extension_max"] == 0
        assert "nu" in orders["closing_rule"]

    def test_two_stages(self, polys, rng, caps):
        """Test (z1^2, z2) reaches the unit 2 after two stages"""
        trace, unit, report = run_to_unit(polys("z1^2, z2", 2), rng, caps)
        assert unit.poly == Poly.constant(2, 2)
        assert unit.order == Fraction(1, 16)
        assert len(report.stages) == 2
        assert report.stages[1].mu == [2, 0]
        assert report.stages[1].lambdas == [2, 1]
        assert report.trace_report.passed
        assert report.trace_report.max_root <= 3
        assert report.verdict == "pass"
        assert report.to_dict()["unit_order"] == "1/16"
        assert [s.order_verdict for s in report.stages] == ["pass", "pass"]
        orders = report.root_orders()
        assert orders["extension_max"] <= orders["extension_bound"] == 2
        assert orders["closing_max"] == 0
        assert orders["closing_bound"] is None
        assert orders["closing_rule"].startswith("none")

    def test_undecided_order_is_reported(self, polys, rng, caps, monkeypatch, caplog):
        """Test a stage whose order comparison is undecided says so instead of passing silently"""
        monkeypatch.setattr(meta, "achieved_at_least", lambda *args, **kwargs: None)
        F = polys("z1^2, z2", 2)
        with caplog.at_level(logging.WARNING, logger="meta"):
            state = iterate_step(PipelineState(2, 2, Trace(2, F)), F, rng, caps)
        assert state.stages[0].order_verdict == "undecided"
        assert state.stages[0].to_dict()["order_verdict"] == "undecided"
        assert "undecided" in caplog.text

    def test_determinism(self, polys, caps):
        """Test the same seed gives byte-identical traces"""
        F = polys("z1^2, z2", 2)
        first, _, _ = run_to_unit(F, RandomSource(3), caps)
        second, _, _ = run_to_unit(F, RandomSource(3), caps)
        assert first.to_json() == second.to_json()

    def test_rejects_units(self, polys, rng, caps):
        """Test pre-multipliers must vanish at the origin"""
        with pytest.raises(DomainError):
            run_to_unit(polys("1 + z1, z2", 2), rng, caps)

    def test_rejects_infinite_multiplicity(self, polys, rng, caps):
        """Test pre-multipliers must have an isolated common zero"""
        with pytest.raises(DomainError):
            run_to_unit(polys("z1*z2, z1^2*z2", 2), rng, caps)

    def test_rejects_empty(self, rng, caps):
        """Test an empty family"""
        with pytest.raises(DimensionError):
            run_to_unit([], rng, caps)

    def test_stage_past_n(self, polys, rng, caps):
        """Test the iteration refuses to go past stage n"""
        F = polys("z1, z2", 2)
        with pytest.raises(DomainError):
            iterate_step(PipelineState(2, 1, Trace(2, F), k=2), F, rng, caps)


@pytest.mark.pipeline
@pytest.mark.slow
class TestFullRuns:
    """Test end-to-end termination on the larger instances"""

    @pytest.mark.parametrize("system,n", [("z1^2, z2^2, z3^2", 3), ("z1^2, z2^3", 2)])
    def test_terminates(self, system, n, caps):
        """Test the run verifies and reaches eps(n, nu)"""
        F = parse_system(system, n)
        trace, unit, report = run_to_unit(F, RandomSource(7), caps)
        assert unit.poly.is_unit()
        assert report.trace_report.passed
        assert all(s.max_root <= s.k + 1 for s in report.stages)
        assert report.verdict == "pass"

    def test_three_variable_run_time(self, psi, caps):
        """Test the worked instance in C^3 runs to the unit within two minutes"""
        start = time.perf_counter()
        _, unit, report = run_to_unit(psi, RandomSource(7), caps)
        elapsed = time.perf_counter() - start
        assert unit.poly.is_unit()
        assert report.trace_report.passed
        assert elapsed < 120
