"""
Test sparse polynomials, linear changes and parsing
"""
import pytest
from fractions import Fraction

from errors import DimensionError, DomainError, ParseError
from polyring import (INFINITY, LinearChange, Poly, RandomSource, apply_linear_change, combine, compose,
                      directional_jacobian_det, jacobian_det, parse_poly, parse_system, random_linear_combinations,
                      to_sympy, from_sympy)


@pytest.mark.unit
class TestPolyArithmetic:
    """Test exact arithmetic and inspection"""

    def test_parse_and_text(self):
        """Test parsing rational coefficients and printing them back"""
        p = parse_poly("z1^2 - 3/2*z2*z3", 3)
        assert p.coefficient((2, 0, 0)) == 1
        assert p.coefficient((0, 1, 1)) == Fraction(-3, 2)
        assert parse_poly(p.to_text(), 3) == p

    def test_ring_size_from_highest_variable(self):
        """Test that the ring size defaults to the largest index"""
        assert parse_poly("z1 + z4").nvars == 4
        assert parse_poly("7").nvars == 1

    def test_cancellation_removes_terms(self, z):
        """Test that cancelled terms disappear"""
        z1, z2 = z(2)
        p = (z1 + z2) * (z1 - z2) - z1 ** 2
        assert p == -(z2 ** 2)
        assert len(p) == 1
        assert (z1 - z1).is_zero()

    def test_orders_and_degrees(self, polys):
        """Test total and single-variable orders"""
        p, = polys("z1^3*z2 + z2^2 + z1^5", 2)
        assert p.degree() == 5
        assert p.order() == 2
        assert p.ord_in_variable(1) == 5
        assert p.ord_in_variable(2) == 2
        assert p.degree_in(1) == 5
        assert Poly.zero(2).order() == INFINITY

    def test_units_and_constants(self):
        """Test germ units"""
        assert parse_poly("1 + z1*z2", 2).is_unit()
        assert not parse_poly("z1 + z1*z2", 2).is_unit()
        assert Poly.constant(3, 5).is_constant()

    def test_power_and_derivative(self, z):
        """Test powers and partial derivatives"""
        z1, z2 = z(2)
        p = (z1 + z2) ** 3
        assert p.derivative(1) == ((z1 + z2) ** 2).scale(3)
        assert (z1 ** 0) == Poly.one(2)

    def test_compose(self, z):
        """Test substitution of polynomials for variables"""
        z1, z2 = z(2)
        p = z1 ** 2 + z2
        assert compose(p, [z1 + z2, z1 * z2]) == (z1 + z2) ** 2 + z1 * z2

    def test_ring_mismatch(self):
        """Test that mixing rings raises"""
        with pytest.raises(DimensionError):
            Poly.variable(2, 1) + Poly.variable(3, 1)
        with pytest.raises(DimensionError):
            Poly.variable(2, 3)

    def test_embed_and_drop(self, z):
        """Test moving polynomials between rings"""
        z1, z2 = z(2)
        big = (z1 * z2).embed(4, 2)
        assert big == Poly.monomial((0, 0, 1, 1))
        assert big.drop_leading(2) == z1 * z2
        with pytest.raises(DimensionError):
            big.drop_leading(3)

    def test_sympy_bridge(self, polys):
        """Test conversion to sympy and back"""
        p, = polys("z1^2*z2 - 1/3*z2 + 4", 2)
        sp = to_sympy(p)
        assert from_sympy(sp, sp.gens) == p


@pytest.mark.unit
class TestParsing:
    """Test input validation"""

    def test_system(self):
        """Test comma and semicolon separated systems share one ring"""
        fs = parse_system("z1^2; z2^3, z3")
        assert [f.nvars for f in fs] == [3, 3, 3]

    def test_float_rejected(self):
        """Test floating point coefficients are refused"""
        with pytest.raises(ParseError):
            parse_poly("0.5*z1")

    def test_unknown_symbol(self):
        """Test stray symbols are refused"""
        with pytest.raises(ParseError):
            parse_poly("z1 + x")

    def test_mixed_families(self):
        """Test z and w variables cannot be mixed"""
        with pytest.raises(ParseError):
            parse_system("z1, w2")

    def test_index_beyond_ring(self):
        """Test a variable outside the ring"""
        with pytest.raises(DimensionError):
            parse_poly("z3", 2)

    def test_empty_system(self):
        """Test an empty system"""
        with pytest.raises(ParseError):
            parse_system(" , ")


@pytest.mark.unit
class TestJacobians:
    """Test Jacobian determinants and coordinate frames"""

    def test_jacobian_of_squares(self, psi, z):
        """Test the Jacobian of (z1^2, z2^2, z3^2)"""
        z1, z2, z3 = z(3)
        assert jacobian_det(psi, [1, 2, 3]) == (z1 * z2 * z3).scale(8)

    def test_partial_jacobian(self, z):
        """Test a partial Jacobian in a subset of variables"""
        z1, z2, z3 = z(3)
        assert jacobian_det([z2 * z3, z3 ** 2], [2, 3]) == (z3 ** 2).scale(2)

    def test_arity_mismatch(self, z):
        """Test the Jacobian needs as many variables as functions"""
        with pytest.raises(DimensionError):
            jacobian_det(z(2), [1])

    def test_directional_matches_coordinate(self, z):
        """Test unit directions reproduce the ordinary Jacobian"""
        z1, z2 = z(2)
        fs = [z1 ** 2 + z2, z1 * z2]
        assert directional_jacobian_det(fs, [(1, 0), (0, 1)]) == jacobian_det(fs, [1, 2])

    def test_linear_change_pullback(self, psi, z):
        """Test p(Lz) for u = (z1, z2 + z1, z3 + z1)"""
        z1, z2, z3 = z(3)
        j1 = jacobian_det(psi, [1, 2, 3])
        change = LinearChange([[1, 0, 0], [1, 1, 0], [1, 0, 1]])
        assert apply_linear_change(j1, change) == (z1 * (z2 + z1) * (z3 + z1)).scale(8)

    def test_singular_change_rejected(self):
        """Test a singular matrix is not a change of coordinates"""
        with pytest.raises(DomainError):
            LinearChange([[1, 2], [2, 4]])

    def test_frame_coordinates(self):
        """Test coordinate functions are the rows of the inverse"""
        change = LinearChange([[1, 0], [1, 1]])
        u1, u2 = change.coordinate_functions()
        assert u1 == parse_poly("z1", 2)
        assert u2 == parse_poly("z2 - z1", 2)
        assert (change @ change.inverse()).is_identity()

    def test_frame_jacobian_is_constant_multiple(self, z):
        """Test the frame Jacobian differs from the textbook one by det L"""
        z1, z2 = z(2)
        change = LinearChange([[2, 1], [1, 3]])
        u1, u2 = change.coordinate_functions()
        fs = [u1 ** 2, u1 * u2 + u2 ** 3]
        in_frame = change.partial_jacobian(fs, [1, 2])
        textbook = jacobian_det(fs, [1, 2])
        assert in_frame == textbook.scale(change.determinant)


@pytest.mark.unit
class TestRandomSource:
    """Test reproducible randomness"""

    def test_same_seed_same_draws(self):
        """Test identical seeds give identical streams"""
        assert RandomSource(3).integers(10, 50) == RandomSource(3).integers(10, 50)

    def test_bounds_and_nonzero(self):
        """Test draws stay in range"""
        rng = RandomSource(11)
        values = rng.integers(200, 5)
        assert all(-5 <= v <= 5 for v in values)
        assert all(v != 0 for v in rng.nonzero_integers(50, 2))
        assert rng.draws >= 250

    def test_combinations(self, psi):
        """Test combinations with explicit coefficients"""
        z1, z2, z3 = (Poly.variable(3, i) for i in (1, 2, 3))
        assert combine(psi, [-1, 1, 0]) == z2 ** 2 - z1 ** 2
        assert len(random_linear_combinations(psi, 2, RandomSource(1))) == 2
