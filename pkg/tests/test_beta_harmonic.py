import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from conelab.beta_harmonic import (
    RYPoly,
    beta_apply,
    beta_basis,
    beta_kernel_dimension,
    beta_laplacian,
    field_norm_profile,
    hemisphere_moment,
    linfty_l2_ratio,
    mean_value_check,
    random_field,
    sphere_eigencheck,
    synthesize_field,
    weighted_inner,
)
from conelab.cone_spectrum import ConeSpec
from conelab.errors import PreconditionViolated, UnknownMode, UnsupportedDimension


def sympy_beta_laplacian(poly: RYPoly, beta):
    """Independent route: differentiate the polynomial symbolically in (r, y)."""
    r = sp.Symbol("r", positive=True)
    ys = sp.symbols(f"y0:{poly.l}")
    h = sum(sp.Rational(c.numerator, c.denominator) * r ** (2 * a) * sp.Mul(*[y**e for y, e in zip(ys, m)])
            for (a, m), c in poly.terms.items())
    b = sp.nsimplify(beta)
    out = r ** (-1 - b) * sp.diff(r ** (1 + b) * sp.diff(h, r), r) + sum(sp.diff(h, y, 2) for y in ys)
    return sp.expand(sp.simplify(out))


def test_representatives_beta1_l1():
    basis = beta_basis(1, 1, 2)
    assert [b.degree for b in basis] == [0, 1, 2]
    assert basis[0].poly.terms == {(0, (0,)): 1}
    assert basis[1].poly.terms == {(0, (1,)): 1}
    t = basis[2].poly.terms
    # proportional to y^2 - r^2 / 3
    assert t[(1, (0,))] / t[(0, (2,))] == Fraction(-1, 3)


def test_examples_of_beta_operator():
    h = RYPoly(1, {(0, (2,)): Fraction(1), (1, (0,)): Fraction(-1, 3)})
    assert beta_laplacian(h, 1).is_zero()
    for beta in (1, Fraction(1, 2), 5):
        r2 = beta_laplacian(RYPoly(1, {(1, (0,)): Fraction(1)}), beta)
        assert r2.terms == {(0, (0,)): 2 * (2 + beta)}
    assert beta_laplacian(RYPoly(2, {(0, (0, 0)): Fraction(7)}), 3).is_zero()


@pytest.mark.parametrize("l", [1, 2])
@pytest.mark.parametrize("beta", [1, 5, Fraction(1, 2), Fraction(7, 3)])
def test_basis_is_exactly_beta_harmonic(l, beta):
    basis = beta_basis(beta, l, 6)
    for b in basis:
        assert beta_apply(b).is_zero()
        assert b.poly.degree() == b.degree
    for b in basis[:: max(1, len(basis) // 6)]:
        assert sympy_beta_laplacian(b.poly, beta) == 0


@pytest.mark.parametrize("l", [1, 2])
def test_basis_size_matches_kernel_dimension(l):
    for beta in (1, Fraction(1, 2)):
        basis = beta_basis(beta, l, 6)
        for q in range(7):
            count = sum(1 for b in basis if b.degree == q)
            assert count == beta_kernel_dimension(beta, l, q)
            assert count == (1 if l == 1 else q + 1)


def test_kernel_dimension_examples():
    assert beta_kernel_dimension(1, 1, 2) == 1
    assert beta_kernel_dimension(math.sqrt(2), 2, 3) == 4


def test_l0_only_constants():
    basis = beta_basis(1, 0, 4)
    assert len(basis) == 1 and basis[0].degree == 0


def test_irrational_beta_is_harmonic_to_roundoff():
    for b in beta_basis(math.sqrt(2), 2, 5):
        assert beta_apply(b).is_zero(1e-12)


def test_unit_normalization():
    for l in (1, 2):
        for b in beta_basis(Fraction(5), l, 4):
            assert b.normalization**2 * weighted_inner(b.poly, b.poly, 5) == pytest.approx(1.0, rel=1e-12)


def test_hemisphere_moment_against_quadrature():
    from scipy import integrate

    # S^1_+ = {(cos t, sin t): |t| < pi/2}, omega_1 = cos t
    for c, e in [(2.0, (2,)), (3.5, (1,)), (1.0, (4,))]:
        val, _ = integrate.quad(lambda t: math.cos(t) ** c * math.sin(t) ** e[0], -math.pi / 2, math.pi / 2)
        assert hemisphere_moment(c, e) == pytest.approx(val, rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("l", [1, 2])
def test_orthogonality_across_degrees(l):
    basis = beta_basis(1, l, 5)
    for i, a in enumerate(basis):
        for b in basis[i + 1 :]:
            if a.degree != b.degree:
                assert abs(weighted_inner(a.poly, b.poly, 1)) < 1e-8


def test_mean_value_examples():
    one = beta_basis(1, 1, 0)[0]
    lhs, rhs = mean_value_check(one, 1.0)
    assert lhs == pytest.approx(rhs, rel=1e-12)
    y2 = beta_basis(1, 1, 2)[2]
    lhs, rhs = mean_value_check(y2, 1.0)
    assert lhs == 0.0 and abs(rhs) < 1e-6
    ypoly = beta_basis(1, 1, 1)[1]
    for rho in (0.3, 2.0):
        lhs, rhs = mean_value_check(ypoly, rho)
        assert lhs == 0.0 and abs(rhs) < 1e-12


@pytest.mark.parametrize("l", [1, 2])
def test_mean_value_equality(l):
    for b in beta_basis(Fraction(5), l, 4):
        lhs, rhs = mean_value_check(b, 0.7)
        assert abs(lhs - rhs) <= 1e-6 * max(1.0, abs(lhs))


def test_mean_value_unsupported_dimension():
    with pytest.raises(UnsupportedDimension):
        mean_value_check(beta_basis(1, 3, 1)[1], 1.0)


def test_sphere_eigencheck_examples():
    basis = beta_basis(1, 1, 2)
    assert sphere_eigencheck(basis[0]) == 0.0
    assert sphere_eigencheck(basis[1]) < 1e-4
    assert sphere_eigencheck(basis[2]) < 1e-4
    with pytest.raises(UnsupportedDimension):
        sphere_eigencheck(beta_basis(1, 3, 1)[1])


@pytest.mark.parametrize("l", [1, 2])
def test_sphere_eigen_relation(l):
    for b in beta_basis(Fraction(1, 2), l, 4):
        assert sphere_eigencheck(b) < 1e-4


def test_synthesize_examples():
    c = ConeSpec(3, 3, 1)
    f = synthesize_field(c, [(1, 0, 2.5)])
    r = np.array([0.5, 1.0, 3.0])
    expect = 2.5 * r**-2.0 * c.psi1 * beta_basis(1, 1, 0)[0].normalization
    assert np.allclose(f(r, 0.2, -0.4, np.zeros((3, 1))), expect, rtol=1e-14)
    assert synthesize_field(c, []).modes == ()
    assert synthesize_field(c, [(1, 0, 1), (1, 2, 1), (2, 0, 1)]).homogeneities() == [-2.0, 0.0, 0.0]
    with pytest.raises(UnknownMode):
        synthesize_field(c, [(1, 2, 1.0, 5)])
    with pytest.raises(UnknownMode):
        synthesize_field(c, [(0, 0, 1.0)])


def test_norm_single_mode_closed_form():
    # int over C cap B_rho of (a r^-2 psi_1 c0)^2 with c0^2 = 2/pi equals a^2 rho^4 / 4, done by hand
    f = synthesize_field(ConeSpec(3, 3, 1), [(1, 0, 2.0)])
    s = field_norm_profile(f, [0.5])[0]
    assert s.integral == pytest.approx(4 * 0.5**4 / 4, rel=1e-10)
    assert s.closed_form == pytest.approx(0.0625, rel=1e-14)


def test_norm_zero_field():
    f = synthesize_field(ConeSpec(3, 3, 1), [])
    assert all(s.integral == 0.0 for s in field_norm_profile(f, [0.3, 1.0]))


def test_norm_orthogonal_modes_add():
    c = ConeSpec(3, 3, 2)
    a = synthesize_field(c, [(1, 0, 1.0)])
    b = synthesize_field(c, [(2, 1, 0.7)])
    ab = synthesize_field(c, [(1, 0, 1.0), (2, 1, 0.7)])
    ia, ib, iab = (field_norm_profile(f, [0.8])[0].integral for f in (a, b, ab))
    assert iab == pytest.approx(ia + ib, rel=1e-10)


def test_norm_identity_random_fields():
    rng = np.random.default_rng(5)
    rho = np.linspace(0.1, 1.0, 10)
    for i in range(6):
        f = random_field(ConeSpec(3, 3, 1 + i % 2), rng, j_max=2, degree_max=2)
        prof = field_norm_profile(f, rho)
        for s in prof:
            assert s.integral == pytest.approx(s.closed_form, rel=1e-4)
        norm = [s.normalized for s in prof]
        assert np.all(np.diff(norm) >= -1e-12 * np.abs(norm[1:]))


def test_norm_domain():
    f = synthesize_field(ConeSpec(3, 3, 1), [(1, 0, 1.0)])
    with pytest.raises(PreconditionViolated):
        field_norm_profile(f, [1.5])


def test_sup_l2_ratio_bounded():
    rng = np.random.default_rng(2)
    ratios = [linfty_l2_ratio(random_field(ConeSpec(3, 3, 1), rng, j_max=2, degree_max=2)) for _ in range(50)]
    assert 0 < max(ratios) < 10


def test_as_dict_export():
    d = beta_basis(Fraction(1, 2), 1, 2)[2].as_dict()
    assert d["beta"] == "1/2" and d["l"] == 1 and d["degree"] == 2
    assert {m["a"] for m in d["monomials"]} == {0, 1}
    assert all(isinstance(m["num"], int) and isinstance(m["den"], int) for m in d["monomials"])
