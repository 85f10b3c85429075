import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from conelab.beta_harmonic import beta_apply, beta_basis, synthesize_field
from conelab.cone_spectrum import ConeSpec, spectrum
from conelab.excess import ModeVector, TestSurface, three_annulus_check, trap_distance

fixture_ok = settings(suppress_health_check=[HealthCheck.function_scoped_fixture], deadline=None)


@st.composite
def stable_cones(draw):
    p = draw(st.integers(1, 12))
    q = draw(st.integers(max(1, 6 - p), 12))
    return ConeSpec(p, q)


@given(stable_cones())
@settings(max_examples=60, deadline=None)
def test_growth_exponents_are_roots(cone):
    n = cone.n
    for e in spectrum(cone, 4):
        assert e.gamma_plus + e.gamma_minus == pytest.approx(-(n - 2), abs=1e-12)
        assert e.gamma_plus * e.gamma_minus == pytest.approx(-e.lam, abs=1e-9 * max(1, abs(e.lam)))
        assert e.beta == pytest.approx(e.gamma_plus - e.gamma_minus, abs=1e-12)
        if e.beta_exact is not None:
            assert float(e.beta_exact) == pytest.approx(e.beta, abs=1e-12)


@given(stable_cones())
@settings(max_examples=60, deadline=None)
def test_spectrum_is_increasing_with_lowest_constant(cone):
    table = spectrum(cone, 5)
    lams = [e.lam for e in table]
    assert all(a < b for a, b in zip(lams, lams[1:]))
    assert table[1].lam == -(cone.n - 1) and table[1].multiplicity == 1


@st.composite
def annulus_inputs(draw):
    m = draw(st.integers(1, 6))
    gaps = draw(st.lists(st.floats(0.05, 2.0), min_size=m, max_size=m))
    q0 = draw(st.floats(-5, 5))
    q = list(q0 + np.concatenate([[0.0], np.cumsum(gaps)]))
    b = draw(st.lists(st.floats(0, 10), min_size=m + 1, max_size=m + 1))
    k = draw(st.integers(0, m))
    gap = q[k + 1] - q[k] if k < m else 2.0
    eps = draw(st.floats(0.01, 0.99)) * gap / 3
    T = draw(st.floats(1.0, 4.0)) / eps
    t = draw(st.floats(-3, 3))
    return ModeVector(q, b), k, eps, T, t


@given(annulus_inputs())
@settings(max_examples=400, deadline=None)
def test_three_annulus_implication(args):
    modes, k, eps, T, t = args
    premise, conclusion = three_annulus_check(modes, k, eps, T, t)
    assert conclusion or not premise


def test_three_annulus_subnormal_amplitude():
    m = ModeVector([0.0, 1.0, 2.0], [0.0, 0.0, 1e-311])
    assert np.isfinite(m.log_psi(0.0))
    assert three_annulus_check(m, 2, 1 / 3, 3.0) == (False, False)


@given(st.lists(st.tuples(st.floats(-4, 4), st.floats(1e-3, 10)), min_size=1, max_size=5, unique_by=lambda x: x[0]),
       st.floats(-50, 50))
@settings(max_examples=200, deadline=None)
def test_log_psi_matches_direct_sum(pairs, s):
    pairs = sorted(pairs)
    q = [a for a, _ in pairs]
    assume(all(b - a > 1e-6 for a, b in zip(q, q[1:])))
    m = ModeVector(q, [b for _, b in pairs])
    direct = math.log(math.fsum(b * b * math.exp(2 * a * s) for a, b in pairs))
    assert m.log_psi(s) == pytest.approx(direct, rel=1e-12, abs=1e-12)


@given(st.fractions(Fraction(1, 4), Fraction(12)), st.integers(1, 3), st.integers(0, 3))
@settings(max_examples=40, deadline=None)
def test_basis_is_beta_harmonic(beta, l, q_max):
    for b in beta_basis(beta, l, q_max):
        assert beta_apply(b).is_zero()


@given(st.floats(0.1, 3.0), st.floats(-2, 2), st.floats(-2, 2))
@settings(max_examples=100, deadline=None)
def test_norm_adds_over_homogeneities(rho, a, b):
    cone = ConeSpec(3, 3, 1)
    fa = synthesize_field(cone, [(1, 0, a)])
    fb = synthesize_field(cone, [(2, 0, b)])
    both = synthesize_field(cone, [(1, 0, a), (2, 0, b)])
    total = fa.closed_form_norm(rho) + fb.closed_form_norm(rho)
    assert both.closed_form_norm(rho) == pytest.approx(total, rel=1e-12, abs=1e-300)


@given(st.floats(0.05, 50), st.one_of(st.floats(-0.7, -1e-4), st.floats(1e-4, 0.7)), st.floats(0.1, 10))
@fixture_ok
def test_parameter_scales_homogeneously(fol33, rho, w, c):
    t = fol33.parameter_polar(rho, w)
    tc = fol33.parameter_polar(c * rho, w)
    assert float(tc) == pytest.approx(c ** (1 - fol33.gamma) * float(t), rel=1e-9)
    assert np.sign(t) == -np.sign(w)


@given(st.floats(-3, 3).filter(lambda t: abs(t) > 1e-3), st.floats(-3, 3), st.floats(-3, 3))
@settings(fixture_ok, max_examples=30)
def test_trap_distance_is_one_lipschitz(fol33, t, lam1, lam2):
    M = TestSurface.leaf(fol33, t, 20.0, per_decade=100)
    U = ("ball", 20.0)
    assert trap_distance(M, lam1, U) == pytest.approx(abs(t - lam1), abs=1e-9 * max(1, abs(t)))
    assert abs(trap_distance(M, lam1, U) - trap_distance(M, lam2, U)) <= abs(lam1 - lam2) + 1e-12
