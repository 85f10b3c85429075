import math

import numpy as np
import pytest

from conelab.cone_spectrum import ConeSpec, spectrum
from conelab.curvature import (
    SurfacePatch,
    WarpSpec,
    fd_mean_curvature,
    graphical_mc,
    jacobi_operator_radial,
    linearized_mc_mode,
    random_warp_config,
    supersolution_check_Fa,
    warped_mean_curvature,
    warped_oracle_error,
)
from conelab.errors import PreconditionViolated, StepUnderflow
from conelab.foliation import _sphere_point, leaf_height


def circle_patch():
    return SurfacePatch(
        F=lambda u: np.array([np.cos(u[0]), np.sin(u[0])]),
        dF=lambda u: np.array([[-np.sin(u[0]), np.cos(u[0])]]),
        d2F=lambda u: np.array([[[-np.cos(u[0]), -np.sin(u[0])]]]),
        orient=lambda u: np.array([np.cos(u[0]), np.sin(u[0])]),
    )


@pytest.mark.parametrize("k", [1, 2, 3])
def test_fd_round_sphere(k):
    z = np.array([1.1] * k)
    x = _sphere_point(z)
    assert fd_mean_curvature(_sphere_point, z, orient=x) == pytest.approx(k, abs=1e-9)
    assert fd_mean_curvature(_sphere_point, z, orient=-x) == pytest.approx(-k, abs=1e-9)


def test_fd_plane():
    X = lambda z: np.array([z[0], z[1], 0.3 * z[0] - 0.2 * z[1] + 1.0])
    assert abs(fd_mean_curvature(X, [0.4, -0.7])) < 1e-9


def test_fd_simons_cone_is_minimal():
    c = ConeSpec(3, 3)

    def X(z):
        return np.concatenate([z[0] * c.a * _sphere_point(z[1:4]), z[0] * c.b * _sphere_point(z[4:7])])

    for z in ([1.0] + [1.3] * 6, [2.5, 0.4, 1.0, 2.0, 1.2, 0.7, 2.9]):
        assert abs(fd_mean_curvature(X, z)) < 1e-8


def test_fd_degenerate_chart():
    with pytest.raises(StepUnderflow):
        fd_mean_curvature(lambda z: np.array([z[0], z[0], 0.0]), [0.0, 0.0])


def test_warped_constant_reduction():
    rng = np.random.default_rng(3)
    for _ in range(10):
        spec, u, y = random_warp_config(rng)
        c = float(rng.uniform(0.5, 3.0))
        const = WarpSpec(lambda y: c, lambda y: np.zeros(y.size), lambda y: np.zeros((y.size, y.size)), spec.patch)
        _, _, g, h, _ = spec.patch.geometry(u)
        assert warped_mean_curvature(const, u, y) == np.trace(np.linalg.solve(g, h)) / c


def test_warped_catenoid_like_example():
    """Circle warped by sqrt(1 + y^2): principal curvatures -1 and +1 cancel at y = 0."""
    spec = WarpSpec(lambda y: np.sqrt(1 + y[0] ** 2), lambda y: np.array([y[0] / np.sqrt(1 + y[0] ** 2)]),
                    lambda y: np.array([[(1 + y[0] ** 2) ** -1.5]]), circle_patch())
    assert warped_mean_curvature(spec, [0.3], [0.0]) == pytest.approx(0.0, abs=1e-14)
    _, oracle, _ = warped_oracle_error(spec, [0.3], [0.0])
    assert abs(oracle) < 1e-8


def test_warped_linear_cone_example():
    """Circle warped by 1 + 0.1 y is a right circular cone; its parallel has curvature 1/sqrt(1.01)."""
    spec = WarpSpec(lambda y: 1 + 0.1 * y[0], lambda y: np.array([0.1]), lambda y: np.zeros((1, 1)),
                    circle_patch())
    value = warped_mean_curvature(spec, [0.8], [0.0])
    assert value == pytest.approx(1 / math.sqrt(1.01), rel=1e-14)
    formula, oracle, rel = warped_oracle_error(spec, [0.8], [0.0])
    assert rel < 1e-5


def test_warped_random_configurations():
    rng = np.random.default_rng(11)
    errs = [warped_oracle_error(*random_warp_config(rng))[2] for _ in range(100)]
    assert max(errs) <= 1e-5


def test_warped_rejects_nonpositive_f():
    spec = WarpSpec(lambda y: -1.0, lambda y: np.zeros(1), lambda y: np.zeros((1, 1)), circle_patch())
    with pytest.raises(PreconditionViolated):
        warped_mean_curvature(spec, [0.0], [0.0])


def test_graphical_mc_zero_graph(c33, fol33):
    r = np.geomspace(2, 500, 9)
    assert np.max(np.abs(graphical_mc(c33, lambda x: 0 * x)(r))) < 1e-12
    assert np.max(np.abs(graphical_mc(fol33.plus, lambda x: 0 * x)(r))) < 1e-8


def test_graphical_mc_leaf_over_cone(c33, fol33):
    res = graphical_mc(c33, leaf_height(fol33.plus))(np.geomspace(5, 500, 9))
    assert np.max(np.abs(res)) < 1e-6


@pytest.mark.parametrize("p,q,order", [(3, 3, 3.0), (1, 5, 2.0)])
def test_graphical_mc_quadratic_vanishing(p, q, order):
    """On C_{3,3} the reflection u <-> v makes the operator odd, so the residual is cubic."""
    cone = ConeSpec(p, q)
    gamma = spectrum(cone).gamma
    deltas = np.array([1e-2, 1e-3, 1e-4])
    res = np.array([np.max(np.abs(graphical_mc(cone, lambda x, d=d: d * x**gamma)([0.5, 1.0]))) for d in deltas])
    fitted = np.polyfit(np.log(deltas), np.log(res), 1)[0]
    assert fitted >= 1.9
    assert fitted == pytest.approx(order, abs=0.05)
    assert np.max(res / deltas**2) <= 2 * (res / deltas**2)[0]


def test_linearization_on_cone(c33):
    r = np.geomspace(0.5, 500, 9)
    assert np.all(linearized_mc_mode(c33, 1, -2.0)(r) == 0.0)
    assert np.allclose(linearized_mc_mode(c33, 1, -1.5)(r), 0.75 * r**-3.5, rtol=1e-15, atol=0)
    numeric = linearized_mc_mode(c33, 1, -1.5, numeric=True)(r)
    assert np.max(np.abs(numeric / (0.75 * r**-3.5) - 1)) < 1e-8


def test_linearization_on_leaf(fol33):
    r = np.geomspace(10, 500, 8)
    lin = linearized_mc_mode(fol33.plus, 1, -1.5)(r) * r**3.5
    direct = jacobi_operator_radial(fol33.plus, lambda x: x**-1.5, r) * r**3.5
    assert np.all(lin > 0)
    assert np.max(np.abs(lin - direct)) < 1e-5
    assert abs(lin[-1] - 0.75) < 1e-3
    err = np.abs(lin - 0.75)
    assert np.all(err[1:] <= np.maximum(err[:-1], 1e-8))


def test_supersolution_on_cone(c33):
    assert supersolution_check_Fa(c33, -1.5).margin == 0.75
    with pytest.raises(PreconditionViolated):
        supersolution_check_Fa(c33, -2.0)
    with pytest.raises(PreconditionViolated):
        supersolution_check_Fa(c33, 0.5)


def test_supersolution_on_leaf(fol33):
    tail = supersolution_check_Fa(fol33.plus, -1.5, r_min=10)
    assert 0.7 <= tail.margin < 0.75
    full = supersolution_check_Fa(fol33.plus, -1.5)
    assert 1.0 < full.inner_radius < 3.0
    outside = full.radii >= full.inner_radius
    assert np.all(full.values[outside] > 0)
