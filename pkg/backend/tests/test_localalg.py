"""
Test standard bases, multiplicities, elimination and the effective Nullstellensatz
"""
import pytest

from config import ResourceCaps
from errors import DomainError, NotInRadicalError, ResourceCapError
from localalg import (Filtration, MonomialOrder, basis_multiplicity, clear_basis_cache, complete_basis, d_multiplicity, d_multiplicity_estimate,
                      elimination_ideal, ideal_contains, local_multiplicity, macaulay_multiplicity,
                      map_multiplicity, mora_normal_form, normal_form, radical_membership_power, siu_select,
                      siu_select_with_coefficients, tuple_multiplicity)
from polyring import INFINITY, parse_poly


@pytest.mark.unit
class TestMultiplicity:
    """Test local and Macaulay multiplicities"""

    def test_worked_instance(self, psi, caps):
        """Test mult(z1^2, z2^2, z3^2) = 8 on both paths"""
        assert local_multiplicity(psi, caps) == 8
        assert macaulay_multiplicity(psi, caps.degree_cap) == 8

    def test_quotient_dimension(self, polys, caps):
        """Test dim O/(z1z2z3, z2^2 - z1^2, z3^2 - z1^2) agrees on both paths and is at most 20"""
        gens = polys("z1*z2*z3, z2^2 - z1^2, z3^2 - z1^2", 3)
        local = local_multiplicity(gens, caps)
        assert local == macaulay_multiplicity(gens, caps.degree_cap)
        assert local == 12
        assert local <= 20

    def test_non_monomial_ideal(self, polys, caps):
        """Test a perturbed ideal whose leading terms differ from its generators"""
        gens = polys("z1^2 + z2^3, z1*z2", 2)
        assert local_multiplicity(gens, caps) == macaulay_multiplicity(gens, caps.degree_cap) == 5

    def test_unit_ideal(self, polys, caps):
        """Test an ideal containing a unit has multiplicity 0"""
        assert local_multiplicity(polys("1 + z1, z2", 2), caps) == 0

    def test_infinite_multiplicity(self, polys, caps):
        """Test a non-isolated zero set"""
        assert local_multiplicity(polys("z1*z2", 2), caps) == INFINITY

    def test_macaulay_cap(self, psi):
        """Test the Macaulay oracle reports its degree cap"""
        with pytest.raises(ResourceCapError):
            macaulay_multiplicity(psi, 1)

    def test_d_multiplicity(self, polys, rng, caps):
        """Test multiplicities after adjoining generic linear forms"""
        f, = polys("z1*z2*z3", 3)
        assert d_multiplicity([f], 2, rng, caps=caps) == 3
        assert tuple_multiplicity([f], rng, caps=caps) == 3
        estimate = d_multiplicity_estimate([f], 2, rng, trials=4, caps=caps)
        assert len(estimate.samples) == 4
        assert estimate.value == min(estimate.samples)

    def test_empty_tuple(self, rng):
        """Test the empty tuple has multiplicity 1"""
        assert tuple_multiplicity([], rng, nvars=3) == 1

    def test_map_multiplicity(self, polys, rng, caps):
        """Test the multiplicity of (z1, z2^2 - z1^2, z3^2 - z1^2) is 4"""
        assert map_multiplicity(polys("z1, z2^2 - z1^2, z3^2 - z1^2", 3), rng, caps) == 4


@pytest.mark.unit
class TestStandardBasis:
    """Test membership and certificates"""

    def test_membership(self, polys, caps):
        """Test local membership decisions"""
        basis = complete_basis(polys("z1^2, z2", 2), caps=caps)
        assert ideal_contains(basis, parse_poly("z1^3 + z1*z2", 2))
        assert not ideal_contains(basis, parse_poly("z1", 2))

    def test_local_units_divide(self, polys, caps):
        """Test that z1 lies in (z1 + z1^2) locally though not globally"""
        basis = complete_basis(polys("z1 + z1^2", 1), caps=caps)
        assert ideal_contains(basis, parse_poly("z1", 1))

    def test_certificate(self, polys, caps):
        """Test a membership certificate reproduces the target"""
        gens = polys("z1^2, z2", 2)
        basis = complete_basis(gens, caps=caps, track=True)
        nf = mora_normal_form(parse_poly("(z1 + z2)^2", 2), basis)
        cert = nf.certificate()
        assert cert.verify()
        assert cert.unit.is_unit()
        assert cert.residual().is_zero()

    def test_no_certificate_for_nonmember(self, polys, caps):
        """Test a nonzero remainder yields no certificate"""
        basis = complete_basis(polys("z1^2, z2", 2), caps=caps, track=True)
        with pytest.raises(DomainError):
            normal_form(parse_poly("z1", 2), basis).certificate()

    def test_no_certificate_without_tracking(self, polys, caps):
        """Test a basis completed without cofactors cannot certify membership"""
        for gens, target in [("z1", "z1^2"), ("z1, z2", "z1^2 + z2"), ("z1^2", "z1^3"), ("z1 + z1^2", "z1^2")]:
            nvars = 2 if "z2" in gens else 1
            basis = complete_basis(polys(gens, nvars), caps=caps)
            nf = mora_normal_form(parse_poly(target, nvars), basis)
            assert nf.remainder.is_zero()
            assert not nf.tracked
            with pytest.raises(DomainError):
                nf.certificate()

    def test_completed_bases_are_reused(self, polys, caps):
        """Test a repeated completion returns the stored basis and a tracked one serves untracked requests"""
        clear_basis_cache()
        gens = polys("z1^2 + z2^3, z1*z2", 2)
        tracked = complete_basis(gens, caps=caps, track=True)
        assert complete_basis(gens, caps=caps, track=True) is tracked
        untracked = complete_basis(gens, caps=caps)
        assert untracked.representations is None
        assert untracked.generators == tracked.generators
        assert basis_multiplicity(untracked) == basis_multiplicity(tracked) == 5
        clear_basis_cache()
        assert complete_basis(gens, caps=caps, track=True) is not tracked

    def test_multiplicity_needs_local_order(self, polys, caps):
        """Test counting standard monomials is refused under a global order"""
        with pytest.raises(DomainError):
            basis_multiplicity(complete_basis(polys("z1^2, z2", 2), MonomialOrder.degrevlex(), caps))

    def test_order_names(self):
        """Test monomial order names survive a round trip"""
        for order in (MonomialOrder.local(), MonomialOrder.degrevlex(), MonomialOrder.block(2)):
            assert MonomialOrder.from_name(order.name) == order

    def test_filtration_must_nest(self, polys):
        """Test a filtration stage must extend the previous one"""
        a, b = polys("z1, z2", 2)
        Filtration.from_lists([[a], [a, b]])
        with pytest.raises(DomainError):
            Filtration.from_lists([[a], [b]])


@pytest.mark.unit
class TestElimination:
    """Test elimination ideals"""

    def test_projection(self, polys, caps):
        """Test (z1^2, w - z1) eliminates to (w^2)"""
        gens = polys("z1^2, z2 - z1", 2)
        assert elimination_ideal(gens, keep_from=2, caps=caps) == [parse_poly("z1^2", 1)]

    def test_image_of_a_curve(self, polys, caps):
        """Test the image of t -> (t^2, t^3) is the cusp"""
        gens = polys("z2 - z1^2, z3 - z1^3", 3)
        kept = elimination_ideal(gens, keep_from=2, caps=caps)
        assert kept == [parse_poly("z1^3 - z2^2", 2)] or kept == [parse_poly("z2^2 - z1^3", 2)]


@pytest.mark.unit
class TestNullstellensatz:
    """Test the bounded radical membership search"""

    def test_minimal_power(self, polys, caps):
        """Test the smallest power is found with a verifying certificate"""
        gens = polys("z1^2, z2^2", 2)
        r, cert = radical_membership_power(parse_poly("z1*z2", 2), gens, 4, caps=caps)
        assert r == 2
        assert cert.verify()
        assert cert.target == parse_poly("z1^2*z2^2", 2)

    def test_member_has_root_one(self, polys, caps):
        """Test members of the ideal have r = 1"""
        r, _ = radical_membership_power(parse_poly("z2 + z1^2", 2), polys("z1^2, z2", 2), 2, caps=caps)
        assert r == 1

    def test_bound_within_n_mu(self, polys, caps):
        """Test r stays within n * mult(I)"""
        gens = polys("z1^3, z2", 2)
        r, _ = radical_membership_power(parse_poly("z1", 2), gens, 3, caps=caps)
        assert r == 3 <= 2 * 3

    def test_unit_not_in_radical(self, polys, caps):
        """Test a unit has no power in a proper ideal"""
        with pytest.raises(NotInRadicalError):
            radical_membership_power(parse_poly("1 + z1", 2), polys("z1, z2", 2), 1, caps=caps)

    def test_outside_radical(self, polys, caps):
        """Test exhausting the bound raises with the certified exponent"""
        with pytest.raises(NotInRadicalError) as exc:
            radical_membership_power(parse_poly("z2", 2), polys("z1^2, z1*z2", 2), max_power=5, caps=caps)
        assert exc.value.exponent == 5

    def test_infinite_multiplicity_rejected(self, polys, caps):
        """Test the search refuses an ideal of infinite multiplicity"""
        with pytest.raises(DomainError):
            radical_membership_power(parse_poly("z1", 2), polys("z1*z2", 2), INFINITY, caps=caps)


@pytest.mark.unit
class TestSiuSelection:
    """Test certified generic combinations"""

    def test_trailing_members_first(self, psi, rng, caps):
        """Test the last members of F are tried first"""
        selection = siu_select_with_coefficients([], psi, 3, rng, caps=caps)
        assert selection.combinations == psi
        assert selection.multiplicity == 8
        assert selection.bound == 8 ** 3
        assert selection.attempts == 1

    def test_bound_against_existing_tuple(self, psi, polys, rng, caps):
        """Test mult(f, G) <= mult(f) * nu^count"""
        f = polys("z1*z2*z3", 3)
        selection = siu_select_with_coefficients(f, psi, 2, rng, mu=3, nu=8, caps=caps)
        assert len(selection.combinations) == 2
        assert selection.multiplicity <= 3 * 8 ** 2

    def test_side_condition(self, psi, polys, rng, caps):
        """Test side conditions are certified too"""
        coords = polys("z1", 3)
        G = siu_select([], psi, 2, rng, caps=caps, side_conditions=[(coords, 64)])
        assert tuple_multiplicity(coords + G, rng, caps=caps) <= 64

    def test_infinite_family_rejected(self, polys, rng, caps):
        """Test selection refuses pre-multipliers of infinite multiplicity"""
        with pytest.raises(DomainError):
            siu_select_with_coefficients([], polys("z1*z2", 2), 1, rng, nu=INFINITY, caps=caps)

    def test_retry_cap(self, psi, rng):
        """Test an unattainable bound exhausts the retry budget"""
        caps = ResourceCaps(max_retries=2)
        with pytest.raises(ResourceCapError):
            siu_select_with_coefficients([], psi, 3, rng, mu=1, nu=1, caps=caps)
