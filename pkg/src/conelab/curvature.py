"""Mean-curvature computations.

Convention throughout: second fundamental form h_ij = -d_ij F . nu, mean
curvature M = g^ij h_ij.  A round sphere with outward normal therefore has
M = +n/R.

Two independent routes are kept side by side: the closed warped-product
formula (``warped_mean_curvature``) and a brute finite-difference evaluator
(``fd_mean_curvature``) that only ever sees a parametrization.  The latter
also serves as the oracle for the profile ODE of the foliation module.

``graphical_mc`` reports the mean curvature of a normal graph with the
opposite sign, so that its linearization at zero is the Jacobi operator
L = Delta + |A|^2 itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cone_spectrum import ConeSpec, radial_jacobi_coefficient, spectrum
from .errors import DegenerateMetric, GraphFailure, PreconditionViolated, StepUnderflow

FD_STEP = 1e-4
# integer stencil numerators; the common factor 1/12 is applied after summation
# so that no rounded weights enter the extended-precision path
_N1 = (1, -8, 0, 8, -1)
_N2 = (-1, 16, -30, 16, -1)
_W1 = np.array(_N1) / 12.0
_W2 = np.array(_N2) / 12.0
_OFFSETS = np.arange(-2, 3)


# ---------------------------------------------------------------------------
# finite-difference oracle


def _unit_normal(J: np.ndarray, orient: np.ndarray | None) -> np.ndarray:
    """Unit normal to the rows of the k x (k+1) Jacobian J."""
    _, sv, vt = np.linalg.svd(J)
    if sv[-1] <= 1e-12 * sv[0]:
        raise StepUnderflow("parametrization is degenerate at this point")
    nu = vt[-1]
    if orient is not None:
        if nu @ orient < 0:
            nu = -nu
    elif np.linalg.det(np.vstack([J, nu])) < 0:
        nu = -nu
    return nu


def fd_mean_curvature(
    X: Callable[[np.ndarray], np.ndarray],
    point,
    orient=None,
    step: float = FD_STEP,
    extended: bool = True,
) -> float:
    """Mean curvature of the hypersurface parametrized by X at parameter ``point``.

    First and second derivatives come from five-point central differences
    (mixed derivatives from the tensor product of the first-derivative
    stencil).  With ``extended`` the stencil is evaluated in long double,
    which keeps the O(eps/step^2) roundoff well below 1e-9 for step 1e-4.
    ``orient`` selects the normal with positive inner product; by default
    det[dX; nu] > 0.
    """
    dtype = np.longdouble if extended else np.float64
    u0 = np.asarray(point, dtype=dtype)
    k = u0.size
    h = dtype(step)
    cache: dict[tuple, np.ndarray] = {}

    def Xat(off: tuple) -> np.ndarray:
        if off not in cache:
            du = np.zeros(k, dtype=dtype)
            for i, o in off:
                du[i] += o * h
            cache[off] = np.asarray(X(u0 + du), dtype=dtype)
        return cache[off]

    base = Xat(())
    if not np.all(np.isfinite(base.astype(float))):
        raise StepUnderflow("parametrization is not finite at the point")
    J = np.empty((k, base.size), dtype=dtype)
    H = np.empty((k, k, base.size), dtype=dtype)
    for i in range(k):
        J[i] = sum(w * Xat(((i, int(o)),)) for w, o in zip(_N1, _OFFSETS) if w) / (12 * h)
        H[i, i] = sum(w * Xat(((i, int(o)),) if o else ()) for w, o in zip(_N2, _OFFSETS)) / (12 * h**2)
        for j in range(i):
            acc = np.zeros(base.size, dtype=dtype)
            for wi, oi in zip(_N1, _OFFSETS):
                if not wi:
                    continue
                for wj, oj in zip(_N1, _OFFSETS):
                    if wj:
                        acc += wi * wj * Xat(((i, int(oi)), (j, int(oj))))
            H[i, j] = H[j, i] = acc / (144 * h**2)
    Jf = J.astype(float)
    nu = _unit_normal(Jf, None if orient is None else np.asarray(orient, float))
    g = Jf @ Jf.T
    hij = -(H.astype(float) @ nu)
    return float(np.trace(np.linalg.solve(g, hij)))


def _d5(f, x, h):
    fm2, fm1, f0, fp1, fp2 = f(x - 2 * h), f(x - h), f(x), f(x + h), f(x + 2 * h)
    d1 = (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * h)
    d2 = (-fm2 + 16 * fm1 - 30 * f0 + 16 * fp1 - fp2) / (12 * h * h)
    return f0, d1, d2


def profile_mean_curvature(position, tau, p: int, q: int, step: float = 1e-3) -> np.ndarray:
    """Mean curvature of the SO(p+1) x SO(q+1) orbit hypersurface of a profile curve.

    ``position(tau) -> (u, v)`` is any parametrization of the profile; only
    positions are used, derivatives come from five-point differences.  The
    normal is the left normal (-v', u')/|c'|, so the sphere terms enter as
    p nu_u / u + q nu_v / v.
    """
    tau = np.asarray(tau, float)
    u, u1, u2 = _d5(lambda x: position(x)[0], tau, step)
    v, v1, v2 = _d5(lambda x: position(x)[1], tau, step)
    speed = np.hypot(u1, v1)
    nu_u, nu_v = -v1 / speed, u1 / speed
    h_curve = -(u2 * nu_u + v2 * nu_v) / speed**2
    return h_curve + p * nu_u / u + q * nu_v / v


# ---------------------------------------------------------------------------
# warped products


@dataclass(frozen=True)
class SurfacePatch:
    """Chart F: U subset R^n -> R^(n+1), optionally with exact derivatives.

    ``dF(u)`` returns the n x (n+1) matrix of first derivatives, ``d2F(u)``
    the n x n x (n+1) array of second derivatives.  Missing derivatives are
    taken by five-point differences.
    """

    F: Callable[[np.ndarray], np.ndarray]
    dF: Callable[[np.ndarray], np.ndarray] | None = None
    d2F: Callable[[np.ndarray], np.ndarray] | None = None
    orient: Callable[[np.ndarray], np.ndarray] | None = None

    def jets(self, u):
        u = np.asarray(u, float)
        k = u.size
        if self.dF is not None and self.d2F is not None:
            return self.F(u), np.asarray(self.dF(u), float), np.asarray(self.d2F(u), float)
        h = FD_STEP
        eye = np.eye(k) * h
        J = np.array([sum(w * self.F(u + o * eye[i]) for w, o in zip(_W1, _OFFSETS) if w) / h for i in range(k)])
        H = np.empty((k, k, J.shape[1]))
        for i in range(k):
            for j in range(k):
                H[i, j] = sum(
                    wi * wj * self.F(u + oi * eye[i] + oj * eye[j])
                    for wi, oi in zip(_W1, _OFFSETS)
                    if wi
                    for wj, oj in zip(_W1, _OFFSETS)
                    if wj
                ) / h**2 if i != j else sum(w * self.F(u + o * eye[i]) for w, o in zip(_W2, _OFFSETS)) / h**2
        return self.F(u), J, H

    def geometry(self, u):
        """(x, nu, g, h) at parameter u."""
        x, J, H = self.jets(u)
        nu = _unit_normal(J, None if self.orient is None else self.orient(u))
        return np.asarray(x, float), nu, J @ J.T, -(H @ nu), J


@dataclass(frozen=True)
class WarpSpec:
    """Data for S~ = union_y (f(y) S) x {y}."""

    f: Callable[[np.ndarray], float]
    Df: Callable[[np.ndarray], np.ndarray]
    D2f: Callable[[np.ndarray], np.ndarray]
    patch: SurfacePatch

    def parametrization(self, n: int):
        """X~(u, y) = (f(y) F(u), y) as a map on R^(n+l)."""

        def X(z):
            u, y = z[:n], z[n:]
            return np.concatenate([self.f(y) * self.patch.F(u), y])

        return X


def warped_mean_curvature(spec: WarpSpec, u, y) -> float:
    """Mean curvature of S~ at (f(y) F(u), y), normal on the side of nu.

    Evaluates

        (1/sqrt(E)) [ M_S / f + |Df|^2 h_S(x^T, x^T) / (f E)
                      + (x.nu) (-delta_ab + (x.nu)^2 D_a f D_b f / E) D^2_ab f ],

    with E = 1 + |Df|^2 (x.nu)^2 and x^T the tangential part of x.
    """
    y = np.atleast_1d(np.asarray(y, float))
    x, nu, g, h, J = spec.patch.geometry(u)
    f = float(spec.f(y))
    if f <= 0:
        raise PreconditionViolated("warping function must be positive")
    Df = np.atleast_1d(np.asarray(spec.Df(y), float))
    D2f = np.atleast_2d(np.asarray(spec.D2f(y), float))
    xn = float(x @ nu)
    Df2 = float(Df @ Df)
    E = 1.0 + Df2 * xn**2
    if not E > 0:
        raise DegenerateMetric(f"E = {E}")
    M_S = float(np.trace(np.linalg.solve(g, h)))
    c = np.linalg.solve(g, J @ x)  # x^T = c_i d_i F
    hTT = float(c @ h @ c)
    warp = -np.trace(D2f) + xn**2 * float(Df @ D2f @ Df) / E
    if Df2 == 0.0:
        return M_S / f + xn * warp
    return (M_S / f + Df2 * hTT / (f * E) + xn * warp) / np.sqrt(E)


def random_warp_config(rng: np.random.Generator):
    """Random (WarpSpec, u, y): a rotated, shifted cubic graph patch in R^(k+1), k in {1, 2},
    warped by a positive quadratic f on R^l, l in {1, 2}.  All derivatives are exact."""
    k, l = int(rng.integers(1, 3)), int(rng.integers(1, 3))
    A = rng.normal(size=(k, k))
    A = (A + A.T) / 2
    C = rng.normal(scale=0.3, size=(k, k, k))
    C = (C + C.transpose(1, 0, 2) + C.transpose(2, 1, 0) + C.transpose(0, 2, 1) + C.transpose(1, 2, 0)
         + C.transpose(2, 0, 1)) / 6
    Q, _ = np.linalg.qr(rng.normal(size=(k + 1, k + 1)))
    x0 = rng.normal(size=k + 1)

    def phi_jets(u):
        val = u @ A @ u / 2 + np.einsum("ijk,i,j,k", C, u, u, u) / 6
        grad = A @ u + np.einsum("ijk,j,k->i", C, u, u) / 2
        hess = A + np.einsum("ijk,k->ij", C, u)
        return val, grad, hess

    def F(u):
        return x0 + Q @ np.append(u, phi_jets(u)[0])

    def dF(u):
        grad = phi_jets(u)[1]
        return np.hstack([np.eye(k), grad[:, None]]) @ Q.T

    def d2F(u):
        hess = phi_jets(u)[2]
        out = np.zeros((k, k, k + 1))
        out[:, :, k] = hess
        return out @ Q.T

    c0 = rng.uniform(0.5, 2.0)
    a = rng.normal(scale=0.5, size=l)
    B = rng.normal(scale=0.5, size=(l, l))
    B = (B + B.T) / 2
    f = lambda y: c0 + a @ y + y @ B @ y / 2
    Df = lambda y: a + B @ y
    D2f = lambda y: B
    u = rng.uniform(-0.5, 0.5, size=k)
    y = rng.uniform(-0.3, 0.3, size=l)
    while f(y) <= 0.1:
        y = y / 2
    return WarpSpec(f, Df, D2f, SurfacePatch(F, dF, d2F)), u, y


def warped_oracle_error(spec: WarpSpec, u, y) -> tuple[float, float, float]:
    """(formula, oracle, relative error) with the oracle taken on the full warped parametrization."""
    u, y = np.atleast_1d(np.asarray(u, float)), np.atleast_1d(np.asarray(y, float))
    formula = warped_mean_curvature(spec, u, y)
    _, nu, _, _, _ = spec.patch.geometry(u)
    X = spec.parametrization(u.size)
    oracle = fd_mean_curvature(X, np.concatenate([u, y]), orient=np.concatenate([nu, np.zeros(y.size)]))
    return formula, oracle, abs(formula - oracle) / max(abs(oracle), 1.0)


# ---------------------------------------------------------------------------
# equivariant normal graphs over the cone and its leaves


def _theta_rhs(p, q, u, v, th):
    return q * np.cos(th) / v - p * np.sin(th) / u


def _theta_rhs_ds(p, q, u, v, th, dth):
    return (
        p * np.sin(th) / u**2 * np.cos(th)
        - q * np.cos(th) / v**2 * np.sin(th)
        + (-q * np.sin(th) / v - p * np.cos(th) / u) * dth
    )


def _base_geometry(base, rho, lam: float = 1.0):
    """(u, v, theta, theta', theta'', sigma, p, q) of the base hypersurface at radii rho.

    sigma = +-1 makes sigma * (-sin theta, cos theta) the graph direction,
    which is the cone normal pointing to the H_+ side (towards the u axis).
    """
    rho = np.asarray(rho, float)
    if isinstance(base, ConeSpec):
        phi = base.cone_angle
        u, v = rho * np.cos(phi), rho * np.sin(phi)
        th = np.full_like(rho, phi)
        zero = np.zeros_like(rho)
        return u, v, th, zero, zero, -1, base.p, base.q
    curve = base
    if lam != 1.0:
        if np.sign(lam) != curve.sign:
            raise PreconditionViolated("leaf curve lies on the other side of the cone")
        curve = curve.scaled(abs(lam) ** (1.0 / (1.0 - curve.gamma)))
    p, q = curve.cone.p, curve.cone.q
    u, v, th = curve.state_at_rho(rho)
    dth = _theta_rhs(p, q, u, v, th)
    ddth = _theta_rhs_ds(p, q, u, v, th, dth)
    # tangent direction is outward (rho increasing); the left normal points away
    # from the u axis, so sigma = -1 on both sides for outward parametrizations
    return u, v, th, dth, ddth, -1, p, q


def _graph_mc_from_jets(u, v, th, dth, ddth, sigma, p, q, g, g1, g2):
    """Mean curvature (M = g^ij h_ij, normal along the graph direction) of P = X + g nu_b.

    X is parametrized by base arclength; g, g1, g2 are the graph height and its
    first two arclength derivatives.
    """
    T = np.stack([np.cos(th), np.sin(th)])
    N = np.stack([-np.sin(th), np.cos(th)])
    nu_b = sigma * N
    a = 1.0 - sigma * g * dth
    P1 = a * T + g1 * nu_b
    P2 = -sigma * (2 * g1 * dth + g * ddth) * T + (sigma * a * dth + g2) * nu_b
    Pu = u + g * nu_b[0]
    Pv = v + g * nu_b[1]
    speed = np.hypot(P1[0], P1[1])
    nu_P = sigma * np.stack([-P1[1], P1[0]]) / speed
    h_curve = -(P2[0] * nu_P[0] + P2[1] * nu_P[1]) / speed**2
    return h_curve + p * nu_P[0] / Pu + q * nu_P[1] / Pv


def _radial_jets(fn, rho, rel_step=1e-3):
    h = rel_step * rho
    return _d5(fn, rho, h)


def graphical_mc(base, g: Callable, lam: float = 1.0, graph_limit: float = 0.5):
    """Mean-curvature residual of graph_{base}(g(|x|) psi_1) as a function of radius.

    ``base`` is a ConeSpec (the cone itself) or a ProfileCurve (the leaf
    H(lam) obtained by scaling that curve).  ``g`` maps radius to the graph
    height divided by psi_1.  The returned callable evaluates, at base points
    of the given radii, minus the mean curvature of the graph with respect to
    the normal along the graph direction; with that sign the derivative at
    g = 0 is the Jacobi operator of the base.
    """
    cone = base if isinstance(base, ConeSpec) else base.cone
    psi1 = cone.psi1

    def residual(rho):
        rho = np.atleast_1d(np.asarray(rho, float))
        u, v, th, dth, ddth, sigma, p, q = _base_geometry(base, rho, lam)
        G, G1, G2 = _radial_jets(lambda r: psi1 * np.asarray(g(r), float), rho)
        # derivatives along the base curve: rho' = cos(alpha), rho'' from the frame
        X_dot_T = u * np.cos(th) + v * np.sin(th)
        X_dot_N = -u * np.sin(th) + v * np.cos(th)
        rho1 = X_dot_T / rho
        rho2 = (1.0 + dth * X_dot_N) / rho - rho1**2 / rho
        g0, g1, g2 = G, G1 * rho1, G2 * rho1**2 + G1 * rho2
        if np.any(np.abs(g0) > graph_limit * rho) or np.any(np.abs(g1) > graph_limit):
            raise GraphFailure("graph height too large for a normal graph")
        return -_graph_mc_from_jets(u, v, th, dth, ddth, sigma, p, q, g0, g1, g2)

    return residual


def jacobi_operator_radial(base, f: Callable, rho, lam: float = 1.0) -> np.ndarray:
    """L f = Delta f + |A|^2 f for f = f(|x|) on the cone or a leaf, in closed form.

    Independent of ``graphical_mc``: uses Delta f = f_ss + (p u'/u + q v'/v) f_s
    and |A|^2 = theta'^2 + p sin^2 theta / u^2 + q cos^2 theta / v^2.
    """
    rho = np.atleast_1d(np.asarray(rho, float))
    u, v, th, dth, _, _, p, q = _base_geometry(base, rho, lam)
    F0, F1, F2 = _radial_jets(lambda r: np.asarray(f(r), float), rho)
    X_dot_T = u * np.cos(th) + v * np.sin(th)
    X_dot_N = -u * np.sin(th) + v * np.cos(th)
    rho1 = X_dot_T / rho
    rho2 = (1.0 + dth * X_dot_N) / rho - rho1**2 / rho
    fs, fss = F1 * rho1, F2 * rho1**2 + F1 * rho2
    lap = fss + (p * np.cos(th) / u + q * np.sin(th) / v) * fs
    A2 = dth**2 + p * np.sin(th) ** 2 / u**2 + q * np.cos(th) ** 2 / v**2
    return lap + A2 * F0


def _linearization(base, F: Callable, rho, lam: float, rel_size: float) -> np.ndarray:
    """Central difference of graphical_mc at 0 in direction F psi_1, divided by psi_1."""
    rho = np.atleast_1d(np.asarray(rho, float))
    psi1 = (base if isinstance(base, ConeSpec) else base.cone).psi1
    out = np.empty_like(rho)
    for i, r in enumerate(rho):
        Fr = abs(float(F(r))) or 1.0
        delta = rel_size * r / Fr
        plus = graphical_mc(base, lambda x: delta * F(x), lam)(r)[0]
        minus = graphical_mc(base, lambda x: -delta * F(x), lam)(r)[0]
        out[i] = (plus - minus) / (2 * delta * psi1)
    return out


def linearized_mc_mode(base, j: int, a_exp: float, lam: float = 1.0, numeric: bool | None = None):
    """Coefficient function rho -> L(r^a psi_j)/psi_j on the cone or a leaf.

    On the cone the exact radial coefficient kappa r^(a-2) is returned unless
    ``numeric`` is set, in which case (j = 1 only) the finite-difference
    linearization of ``graphical_mc`` is used.  On leaves only j = 1 is
    available, since graphs are kept equivariant.
    """
    cone = base if isinstance(base, ConeSpec) else base.cone
    if isinstance(base, ConeSpec) and not numeric:
        kappa = radial_jacobi_coefficient(cone, j, a_exp)
        return lambda rho: kappa * np.asarray(rho, float) ** (a_exp - 2)
    if j != 1:
        raise PreconditionViolated("numerical linearization supports the equivariant mode j = 1 only")
    return lambda rho: _linearization(base, lambda r: r**a_exp, rho, lam, 1e-4)


@dataclass(frozen=True)
class SupersolutionReport:
    margin: float
    inner_radius: float
    radii: np.ndarray
    values: np.ndarray

    @property
    def positive(self) -> bool:
        return self.margin > 0


def supersolution_check_Fa(base, a_exp: float, lam: float = 1.0, radii=None, r_min: float | None = None):
    """Check L_{H(lam)}(F_a) >= |x|^(a-2)/c for F_a = |x|^a psi_1.

    Returns the scaled values |x|^(2-a) L F_a / psi_1 at the sample radii,
    the smallest radius beyond which they stay positive, and the margin
    (their minimum over r >= r_min, default: that inner radius).
    """
    cone = base if isinstance(base, ConeSpec) else base.cone
    gamma = spectrum(cone).gamma
    if not gamma < a_exp < 0:
        raise PreconditionViolated(f"need gamma = {gamma} < a < 0, got a = {a_exp}")
    if isinstance(base, ConeSpec):
        kappa = radial_jacobi_coefficient(cone, 1, a_exp)
        radii = np.geomspace(1.0, 1e3, 61) if radii is None else np.asarray(radii, float)
        values = np.full_like(radii, kappa)
    else:
        if radii is None:
            c = abs(lam) ** (1.0 / (1.0 - gamma))
            rmax = base.rho_max * c
            radii = np.geomspace(c * base.rho_min * 1.001, rmax / 1.01, 121)
        radii = np.asarray(radii, float)
        values = linearized_mc_mode(base, 1, a_exp, lam)(radii) * radii ** (2 - a_exp)
    bad = np.nonzero(values <= 0)[0]
    inner = float(radii[0]) if bad.size == 0 else float(radii[min(bad[-1] + 1, radii.size - 1)])
    lo = inner if r_min is None else r_min
    sel = radii >= lo
    margin = float(values[sel].min()) if np.any(sel) else float("nan")
    return SupersolutionReport(margin, inner, radii, values)
