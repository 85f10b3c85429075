import json
import math

import numpy as np
import pytest

from conelab.beta_harmonic import random_field, synthesize_field
from conelab.cone_spectrum import ConeSpec
from conelab.errors import EmptyIntersection, InsufficientScales, PreconditionViolated
from conelab.excess import (
    ModeVector,
    TestSurface,
    dichotomy_experiment,
    excess,
    homogeneity_gap,
    mode_vector,
    negativity_radius,
    scale_region,
    three_annulus_check,
    three_annulus_trials,
    trap_distance,
)


def test_three_annulus_example():
    m = ModeVector([-2.0, 0.0], [1.0, 1.0])
    # psi(2) = e^-8 + 1, premise threshold 2 e^-6; psi(4) = e^-16 + 1, conclusion threshold e^-2 psi(2)
    assert m.psi(2.0) == pytest.approx(1 + math.exp(-8), rel=1e-15)
    assert three_annulus_check(m, 0, 0.5, 2.0, 0.0) == (True, True)


def test_three_annulus_zero_amplitudes():
    assert three_annulus_check(ModeVector([-1.0, 1.0], [0.0, 0.0]), 0, 0.5, 2.0) == (True, True)


def test_three_annulus_single_mode_premise_false():
    assert three_annulus_check(ModeVector([-2.0], [1.0]), 0, 0.5, 2.0)[0] is False


def test_three_annulus_preconditions():
    m = ModeVector([-2.0, 0.0], [1.0, 1.0])
    with pytest.raises(PreconditionViolated):
        three_annulus_check(m, 0, 0.7, 2.0)  # 3 eps > gap
    with pytest.raises(PreconditionViolated):
        three_annulus_check(m, 0, 0.5, 1.5)  # T < 1/eps
    with pytest.raises(PreconditionViolated):
        ModeVector([0.0, 0.0], [1.0, 1.0])


def test_log_space_evaluation_survives_large_t():
    m = ModeVector([-2.0, 3.0], [1.0, 1e-3])
    assert np.isfinite(m.log_psi(500.0))
    assert three_annulus_check(m, 0, 1.0, 200.0, 100.0) == (True, True)


def test_trials_zero_failures_and_determinism():
    a = three_annulus_trials(20_000, 7, keep_records=True)
    b = three_annulus_trials(20_000, 7, keep_records=True)
    assert a.failures == 0 and a.premise_true > 0
    assert a.jsonl() == b.jsonl()
    recs = [json.loads(line) for line in a.jsonl().splitlines()[:500]]
    assert set(recs[0]) >= {"seed", "q", "b", "k", "eps", "T", "premise", "conclusion"}
    for rec in recs:
        m = ModeVector(rec["q"], rec["b"])
        got = three_annulus_check(m, rec["k"], rec["eps"], rec["T"], rec["t"])
        assert got == (rec["premise"], rec["conclusion"])


def test_mode_vector_from_field():
    f = synthesize_field(ConeSpec(3, 3, 1), [(1, 0, 2.0), (1, 2, 1.0), (2, 0, 1.0)])
    m = mode_vector(f)
    assert m.q.tolist() == [-2.0, 0.0]
    assert m.b[0] == pytest.approx(2.0 / math.sqrt(4.0))
    assert m.b[1] == pytest.approx(math.sqrt(2.0 / 8.0))


def test_leaf_is_its_own_trap(fol33):
    M = TestSurface.leaf(fol33, 0.8, 20.0)
    assert trap_distance(M, 0.8, ("ball", 20.0)) < 1e-9
    assert trap_distance(M, 0.0, ("annulus", 3.0, 10.0)) == pytest.approx(0.8, rel=1e-9)


def test_excess_of_cone_about_a_leaf(fol33):
    C = TestSurface.leaf(fol33, 0.0, 10.0)
    assert excess(C, 0.5, 10.0) == pytest.approx(5e-4, abs=1e-8)
    assert excess(C, 0.0, 10.0) == 0.0
    for R in (2.0, 50.0):
        C = TestSurface.leaf(fol33, 0.0, R)
        assert excess(C, -1.3, R) == pytest.approx(R**-3 * 1.3, abs=1e-8 * R**-3)


def test_triangle_inequality(fol33):
    rng = np.random.default_rng(4)
    M = TestSurface.union(TestSurface.leaf(fol33, 0.3, 10.0, per_decade=200),
                          TestSurface.leaf(fol33, -1.2, 10.0, per_decade=200))
    for _ in range(100):
        lam, lam2 = rng.uniform(-2, 2, size=2)
        U = ("ball", 10.0)
        assert trap_distance(M, lam, U) <= trap_distance(M, lam2, U) + abs(lam - lam2) + 1e-15


@pytest.mark.parametrize("c", [0.5, 2.0, 10.0])
def test_scaling_law(fol33_l1, c):
    f = synthesize_field(fol33_l1.cone, [(1, 0, 1.0), (2, 1, 0.5)])
    M = TestSurface.jacobi_graph(fol33_l1, f, 0.05, 10.0)
    lam, U = 0.01, ("annulus", 1.0, 9.0)
    d = trap_distance(M, lam, U)
    dc = trap_distance(M.scaled(c), c**3 * lam, scale_region(U, c))
    assert dc == pytest.approx(c**3 * d, rel=1e-9)
    assert excess(M.scaled(c), c**3 * lam, 10.0 * c) == pytest.approx(excess(M, lam, 10.0), rel=1e-9)


def test_jacobi_graph_distance_is_asymptotically_linear(fol33):
    # leaves deviate from t r^gamma by a relative O((r / t^(1/3))^-1) term, so the
    # departure from linearity in delta shrinks like delta^(1/3)
    f = synthesize_field(fol33.cone, [(1, 0, 1.0)])
    U = ("annulus", 5.0, 10.0)
    errs = []
    for d in (1e-3, 1e-4, 1e-5):
        d1 = trap_distance(TestSurface.jacobi_graph(fol33, f, d, 10.0), 0.0, U)
        d2 = trap_distance(TestSurface.jacobi_graph(fol33, f, 2 * d, 10.0), 0.0, U)
        errs.append(d2 / d1 - 2.0)
    assert 0 < errs[-1] < 1e-3
    for a, b in zip(errs, errs[1:]):
        assert b / a == pytest.approx(10 ** (-1 / 3), rel=0.1)


def test_empty_intersection(fol33):
    M = TestSurface.leaf(fol33, 1.0, 10.0)
    with pytest.raises(EmptyIntersection):
        trap_distance(M, 0.0, ("annulus", 20.0, 30.0))
    with pytest.raises(EmptyIntersection):
        TestSurface.leaf(fol33, 1000.0, 5.0)


def test_region_by_callable(fol33):
    M = TestSurface.leaf(fol33, 0.5, 10.0)
    assert trap_distance(M, 0.0, lambda rho, y: rho < 5.0) == pytest.approx(0.5, rel=1e-9)


def test_homogeneity_gap():
    assert homogeneity_gap(ConeSpec(3, 3)) == (-2.0, 0.0)
    assert homogeneity_gap(ConeSpec(3, 3, 1)) == (-2.0, -1.0)


def test_dichotomy_pure_mode(c33):
    f = synthesize_field(c33, [(1, 0, 0.7)])
    R = [10.0**k for k in range(1, 6)]
    rep = dichotomy_experiment(f, R)
    assert np.allclose(rep.N, 0.7 * c33.psi1 * np.array(R) ** -3.0, rtol=1e-12)
    assert rep.decay_ceiling_ok and rep.failures == 0 and not rep.triggered.any()
    assert rep.eps1 is None and rep.summary()["eps1"] == "unavailable"


def test_dichotomy_mixed_modes(c33):
    f = synthesize_field(c33, [(1, 0, 1.0), (2, 0, 1.0)])
    rep = dichotomy_experiment(f, [10.0**k for k in range(1, 7)])
    assert rep.slopes[1] == pytest.approx(-1.0, abs=1e-2)  # between 10^2 and 10^3
    assert rep.growth_floor_ok and rep.lower_bound_monotone and rep.failures == 0
    rows = rep.to_csv().splitlines()
    assert rows[0] == "R,N,slope,condition_triggered" and len(rows) == 7


def test_dichotomy_zero_field(c33):
    rep = dichotomy_experiment(synthesize_field(c33, []), [1.0, 10.0, 100.0])
    assert rep.failures == 0 and not rep.triggered.any()


def test_dichotomy_scale_checks(c33):
    f = synthesize_field(c33, [(1, 0, 1.0)])
    with pytest.raises(InsufficientScales):
        dichotomy_experiment(f, [1.0, 10.0])
    with pytest.raises(InsufficientScales):
        dichotomy_experiment(f, [1.0, 2.0, 4.0])
    with pytest.raises(InsufficientScales):
        dichotomy_experiment(f, [1.0, 10.0, 50.0])


def test_negativity_examples(c33):
    assert negativity_radius(synthesize_field(c33, [(1, 0, 2.0)]), 1e10) is None
    assert negativity_radius(synthesize_field(c33, [(1, 0, -1.0)]), 1e6) == 1.0
    r = negativity_radius(synthesize_field(c33, [(1, 0, 1.0), (2, 0, 0.1)]), 1e8)
    assert r is not None and r > 1.0
    with pytest.raises(PreconditionViolated):
        negativity_radius(synthesize_field(c33, []), 10.0)


def test_negativity_random_fields():
    rng = np.random.default_rng(9)
    for i in range(40):
        f = random_field(ConeSpec(3, 3, i % 2), rng, require_higher=True)
        assert negativity_radius(f, 1e8) is not None
