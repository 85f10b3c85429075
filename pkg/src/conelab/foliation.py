"""Leaves of the Hardt-Simon foliation for C_{p,q} by equivariant ODE shooting.

Profiles live in the quadrant (u, v) = (|x_1..x_{p+1}|, |x_{p+2}..x_{n+1}|).
A leaf is an arclength curve with u' = cos(theta), v' = sin(theta) and
zero mean curvature of its orbit hypersurface.  The sign pattern of the
theta equation is not taken on faith: both candidates are started from the
axis and the one whose lift has vanishing mean curvature (by the
finite-difference oracle in ``curvature``) is kept.

Integration runs in three pieces.  Near the axis a truncated power series
removes the 0/0 in the v-term.  Away from the axis an explicit solver runs
in arclength until the polar angle reaches half the cone angle.  The tail
is integrated in log-polar form around the cone ray,

    t = log(rho), w = phi - phi_c, alpha = theta - phi,
    w' = tan(alpha), alpha' = G(w) - n tan(alpha),

so that the exponentially small offset w from the cone keeps full relative
precision out to large radii.

Sign +1 is the leaf capping on the u-axis (below the ray v/u = sqrt(q/p));
sign -1 caps on the v-axis and is obtained by solving for C_{q,p} and
swapping coordinates.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq, least_squares
from scipy.special import roots_legendre

from .cone_spectrum import ConeSpec, SpectralTable, ball_volume, sphere_area, spectrum
from .curvature import fd_mean_curvature, profile_mean_curvature
from .errors import (
    GraphFailure,
    InsufficientTail,
    IntegrationDiverged,
    OutOfDomain,
    PreconditionViolated,
    SideViolation,
)

SERIES_ORDER = 10  # truncation of the internal power-series arithmetic
SERIES_TERMS = 4  # odd terms of theta - pi/2 actually used: s, s^3, s^5, s^7
SERIES_S0 = 0.02
RTOL = 1e-12
PHASE1_MAX_STEP = 0.005
PHASE2_MAX_STEP = 0.01
TAIL_SAMPLE_STEP = 0.01  # spacing of exported tail samples in log(rho)
RESIDUAL_STEP = 1e-3


# ---------------------------------------------------------------------------
# axis series


def _mul(a, b):
    return np.convolve(a, b)[: SERIES_ORDER]


def _compose(x, coeffs):
    """sum_k coeffs[k] x^k for a series x with x[0] = 0."""
    out = np.zeros(SERIES_ORDER)
    pw = np.zeros(SERIES_ORDER)
    pw[0] = 1.0
    for c in coeffs:
        out += c * pw
        pw = _mul(pw, x)
    return out


_SIN = [0.0 if k % 2 == 0 else (-1) ** (k // 2) / math.factorial(k) for k in range(SERIES_ORDER)]
_COS = [0.0 if k % 2 else (-1) ** (k // 2) / math.factorial(k) for k in range(SERIES_ORDER)]


def _integrate(a):
    out = np.zeros(SERIES_ORDER)
    out[1:] = a[:-1] / np.arange(1, SERIES_ORDER)
    return out


def _reciprocal(a):
    out = np.zeros(SERIES_ORDER)
    out[0] = 1.0 / a[0]
    for k in range(1, SERIES_ORDER):
        out[k] = -np.dot(a[1 : k + 1], out[k - 1 :: -1][:k]) / a[0]
    return out


def _position_series(x):
    sx, cx = _compose(x, _SIN), _compose(x, _COS)
    u = _integrate(-sx)
    u[0] = 1.0
    return u, _integrate(cx), sx, cx


def _rhs_series(x, p, q, signs):
    """Series of theta' for theta = pi/2 + x, starting at (u, v) = (1, 0)."""
    sq, sp = signs
    u, v, sx, cx = _position_series(x)
    # cos(theta)/v = -sin(x)/v; both numerator and v vanish at s = 0
    ratio = _mul(np.append(sx[1:], 0.0), _reciprocal(np.append(v[1:], 0.0)))
    return sq * q * (-ratio) + sp * p * _mul(cx, _reciprocal(u))


def _axis_series(p: int, q: int, signs) -> np.ndarray:
    """Coefficients of x(s) = theta(s) - pi/2, solved order by order."""
    x = np.zeros(SERIES_ORDER)
    for k in range(SERIES_ORDER - 1):
        x[k + 1] = 0.0
        r0 = _rhs_series(x, p, q, signs)[k]
        x[k + 1] = 1.0
        slope = _rhs_series(x, p, q, signs)[k] - r0
        denom = (k + 1) - slope
        if abs(denom) < 1e-12:
            raise IntegrationDiverged("axis series is resonant for this sign pattern")
        x[k + 1] = r0 / denom
    return x


class _AxisSeries:
    def __init__(self, p, q, signs):
        x = _axis_series(p, q, signs)
        keep = np.zeros(SERIES_ORDER)
        idx = np.arange(1, 2 * SERIES_TERMS, 2)
        keep[idx] = x[idx]
        self.x = keep
        u, v, _, _ = _position_series(keep)
        # positions are consistent to the order of the theta truncation
        self.u = u[: 2 * SERIES_TERMS + 1]
        self.v = v[: 2 * SERIES_TERMS + 1]

    @staticmethod
    def _ev(c, s):
        return np.polynomial.polynomial.polyval(s, c)

    def __call__(self, s):
        return self._ev(self.u, s), self._ev(self.v, s), math.pi / 2 + self._ev(self.x, s)


# ---------------------------------------------------------------------------
# canonical (u-axis capping) leaf


def _sphere_point(angles):
    d = len(angles)
    x = np.ones(d + 1, dtype=np.result_type(angles, float))
    for i in range(d):
        x[i] *= np.cos(angles[i])
        x[i + 1 :] *= np.sin(angles[i])
    return x


def _lifted_mean_curvature(p, q, position, s):
    """Mean curvature of the orbit hypersurface, computed on an explicit lift to R^(n+1)."""

    def X(z):
        u, v = position(float(z[0]))
        return np.concatenate([u * _sphere_point(z[1 : p + 1]), v * _sphere_point(z[p + 1 :])])

    # angles near the equator keep the lifted metric well conditioned
    z = np.array([s] + [1.3] * (p + q))
    return fd_mean_curvature(X, z, step=3e-3, extended=False)


def _rhs_theta(signs, p, q):
    sq, sp = signs

    def f(s, y):
        u, v, th = y
        return [math.cos(th), math.sin(th), sq * q * math.cos(th) / v + sp * p * math.sin(th) / u]

    return f


@lru_cache(maxsize=None)
def profile_sign_convention(p: int, q: int) -> tuple[int, int]:
    """Sign pattern (s_q, s_p) with theta' = s_q q cos/v + s_p p sin/u that is minimal.

    Each candidate is started from the axis and integrated a short way; the
    lifted hypersurface is then fed to the finite-difference curvature
    oracle.  Exactly one candidate must pass.
    """
    good = []
    for signs in ((1, -1), (-1, 1)):
        try:
            ser = _AxisSeries(p, q, signs)
        except IntegrationDiverged:
            continue
        y0 = ser(SERIES_S0)
        sol = solve_ivp(_rhs_theta(signs, p, q), (SERIES_S0, 0.3), y0, method="DOP853",
                        rtol=RTOL, atol=1e-14, max_step=PHASE1_MAX_STEP, dense_output=True)
        if sol.status != 0:
            continue
        pos = lambda s: tuple(sol.sol(s)[:2])
        res = max(abs(_lifted_mean_curvature(p, q, pos, s)) for s in (0.2, 0.25))
        if res < 1e-6:
            good.append(signs)
    if len(good) != 1:
        raise IntegrationDiverged(f"could not fix the profile sign convention (passing: {good})")
    return good[0]


@dataclass(frozen=True, eq=False)
class _CanonicalLeaf:
    p: int
    q: int
    phic: float
    series: _AxisSeries
    s0: float
    sol1: object
    s1: float
    t1: float
    sol2: object
    t_end: float
    _inverse: CubicSpline = field(repr=False)
    _x_range: tuple = field(repr=False)
    _tail_slope: float = field(repr=False)

    # positions ------------------------------------------------------------
    def state_s(self, s):
        """(u, v, theta) at arclength s <= s1, series below s0."""
        s = np.asarray(s, float)
        out = np.empty((3,) + s.shape)
        near = s < self.s0
        if np.any(near):
            u, v, th = self.series(s[near])
            out[0][near], out[1][near], out[2][near] = u, v, th
        if np.any(~near):
            out[:, ~near] = self.sol1.sol(s[~near])
        return out

    def state_t(self, t):
        """(u, v, theta, s) at log-radius t in the tail."""
        w, al, s = self.sol2.sol(np.asarray(t, float))
        rho = np.exp(t)
        phi = self.phic + w
        return rho * np.cos(phi), rho * np.sin(phi), phi + al, s

    def polar_t(self, t):
        w, al, s = self.sol2.sol(np.asarray(t, float))
        return w, al, s

    def s_at_rho(self, rho: float) -> float:
        if rho <= 1.0:
            return 0.0
        f = lambda s: math.hypot(*self.state_s(np.array([s]))[:2, 0]) - rho
        return brentq(f, 0.0, self.s1, xtol=1e-15, rtol=1e-15)

    def state_rho(self, rho):
        rho = np.atleast_1d(np.asarray(rho, float))
        t = np.log(rho)
        out = np.empty((3, rho.size))
        tail = t >= self.t1
        if np.any(tail):
            u, v, th, _ = self.state_t(t[tail])
            out[0][tail], out[1][tail], out[2][tail] = u, v, th
        for i in np.nonzero(~tail)[0]:
            out[:, i] = self.state_s(np.array([self.s_at_rho(rho[i])]))[:, 0]
        return out

    # foliation parameter support ------------------------------------------
    def log_rho_of_w(self, w):
        """log(rho) of the leaf point with angular offset w < 0 from the cone."""
        x = np.log(-np.asarray(w, float))
        lo, hi = self._x_range
        out = self._inverse(np.clip(x, lo, hi))
        below = x < lo
        if np.any(below):
            out = np.where(below, self.t_end + (x - lo) * self._tail_slope, out)
        return out


def _build_inverse(sol1, series, s0, s1, sol2, t1, t_end, phic):
    s_a = np.linspace(0.0, s0, 60)[1:]
    s_b = np.linspace(s0, s1, 3000)
    ua, va, _ = series(s_a)
    ub, vb, _ = sol1.sol(s_b)
    uu, vv = np.concatenate([[1.0], ua, ub]), np.concatenate([[0.0], va, vb])
    t_head = np.log(np.hypot(uu, vv))
    w_head = np.arctan2(vv, uu) - phic
    t_tail = np.arange(t1, t_end, 0.004)
    w_tail = sol2.sol(t_tail)[0]
    t_all = np.concatenate([t_head, t_tail, [t_end]])
    w_all = np.concatenate([w_head, w_tail, [sol2.sol(t_end)[0]]])
    x = np.log(-w_all)
    order = np.argsort(x)
    x, t_all = x[order], t_all[order]
    keep = np.concatenate([[True], np.diff(x) > 1e-13])
    x, t_all = x[keep], t_all[keep]
    if np.any(np.diff(t_all) >= 0):
        raise IntegrationDiverged("leaf is not a radial graph over the cone ray")
    spline = CubicSpline(x, t_all)
    slope = float(spline(x[0], 1))
    return spline, (float(x[0]), float(x[-1])), slope


@lru_cache(maxsize=None)
def _solve_canonical(p: int, q: int, s_max: float, rtol: float) -> _CanonicalLeaf:
    signs = profile_sign_convention(p, q)
    sq, sp = signs
    phic = math.atan2(math.sqrt(q), math.sqrt(p))
    n = p + q + 1
    series = _AxisSeries(p, q, signs)
    s0 = min(SERIES_S0, s_max / 4)

    def half_angle(s, y):
        return math.atan2(y[1], y[0]) - phic / 2

    half_angle.terminal, half_angle.direction = True, 1

    def hit_axis(s, y):
        return min(y[0], y[1])

    hit_axis.terminal = True
    sol1 = solve_ivp(_rhs_theta(signs, p, q), (s0, max(50.0, s_max)), series(s0), method="DOP853",
                     rtol=rtol, atol=1e-14, max_step=PHASE1_MAX_STEP, dense_output=True,
                     events=(half_angle, hit_axis))
    if sol1.status < 0:
        raise IntegrationDiverged(f"near-axis integration failed: {sol1.message}")
    if sol1.t_events[1].size or not sol1.t_events[0].size:
        raise IntegrationDiverged("profile did not leave the axis region towards the cone")
    s1 = float(sol1.t[-1])
    u1, v1, th1 = sol1.y[:, -1]
    t1 = math.log(math.hypot(u1, v1))
    phi1 = math.atan2(v1, u1)

    # along the tail, d theta/dt = sigma [G(w) - (p+q) tan(alpha)] with sigma the
    # overall sign of the theta equation; G = q cot(phi) - p tan(phi) without cancellation
    sigma = sq
    if sp != -sq:
        raise IntegrationDiverged("unexpected sign pattern")

    def G(w):
        return -2 * (p + q) * math.sin(2 * phic + w) * math.sin(w) / math.sin(2 * phic + 2 * w)

    def f2(t, y):
        w, al, _ = y
        ta = math.tan(al)
        return [ta, sigma * G(w) - (sigma * (p + q) + 1) * ta, math.exp(t) / math.cos(al)]

    def reach(t, y):
        return y[2] - s_max

    reach.terminal = True

    def cross(t, y):
        return y[0]

    cross.terminal = True

    def turn(t, y):
        return math.cos(y[1]) - 1e-3

    turn.terminal = True
    sol2 = solve_ivp(f2, (t1, math.log(s_max) + 10), [phi1 - phic, th1 - phi1, s1], method="DOP853",
                     rtol=rtol, atol=1e-30, max_step=PHASE2_MAX_STEP, dense_output=True,
                     events=(reach, cross, turn))
    if sol2.status < 0:
        raise IntegrationDiverged(f"tail integration failed: {sol2.message}")
    if sol2.t_events[1].size:
        raise SideViolation(
            f"profile of C_{{{p},{q}}} crosses the cone ray at radius {math.exp(sol2.t_events[1][0]):.4g}"
        )
    if sol2.t_events[2].size:
        raise IntegrationDiverged("profile turned back towards the origin")
    if not sol2.t_events[0].size:
        raise IntegrationDiverged("tail integration ended before reaching s_max")
    t_end = float(sol2.t[-1])
    inverse, x_range, slope = _build_inverse(sol1, series, s0, s1, sol2, t1, t_end, phic)
    return _CanonicalLeaf(p, q, phic, series, s0, sol1, s1, t1, sol2, t_end, inverse, x_range, slope)


def _canonical_samples(leaf: _CanonicalLeaf):
    """Sample table (s, u, v, theta, rho, w, residual) in canonical coordinates."""
    p, q = leaf.p, leaf.q
    s_a = leaf.s0 * np.array([0.5, 0.75])
    s_b = np.linspace(leaf.s0, leaf.s1, 200)
    t_c = np.arange(leaf.t1, leaf.t_end, TAIL_SAMPLE_STEP)[1:]
    t_c = np.append(t_c, leaf.t_end)
    head = np.concatenate([s_a, s_b])
    uh, vh, thh = leaf.state_s(head)

    def pos_head(s):
        st = leaf.state_s(np.asarray(s, float))
        return st[0], st[1]

    def pos_tail(t):
        u, v, _, _ = leaf.state_t(t)
        return u, v

    res_h = profile_mean_curvature(pos_head, head, p, q, RESIDUAL_STEP)
    # the stencil may reach below s = 0 for the first samples; the series is odd/even there
    ut, vt, tht, st = leaf.state_t(t_c)
    res_t = profile_mean_curvature(pos_tail, t_c, p, q, RESIDUAL_STEP)
    w_t, _, _ = leaf.polar_t(t_c)
    s = np.concatenate([head, st])
    u = np.concatenate([uh, ut])
    v = np.concatenate([vh, vt])
    th = np.concatenate([thh, tht])
    rho = np.concatenate([np.hypot(uh, vh), np.exp(t_c)])
    w = np.concatenate([np.arctan2(vh, uh) - leaf.phic, w_t])
    res = np.concatenate([res_h, res_t])
    return s, u, v, th, rho, w, res


# ---------------------------------------------------------------------------
# public curve object


@dataclass(frozen=True, eq=False)
class ProfileCurve:
    """A leaf profile H_sign (times a scale) with samples and dense evaluation.

    Sample arrays are in actual (u, v) coordinates of ``cone``; ``rho`` and
    ``w`` are the polar radius and the signed angular offset from the cone ray
    (w < 0 below the ray, on the sign +1 side).
    """

    cone: ConeSpec
    sign: int
    s: np.ndarray
    u: np.ndarray
    v: np.ndarray
    theta: np.ndarray
    rho: np.ndarray
    w: np.ndarray
    residual: np.ndarray
    u0: float
    _leaf: _CanonicalLeaf = field(repr=False)

    @property
    def gamma(self) -> float:
        return spectrum(self.cone).gamma

    @property
    def samples(self):
        return list(zip(self.s, self.u, self.v, self.theta))

    @property
    def rho_min(self) -> float:
        return self.u0

    @property
    def rho_max(self) -> float:
        return float(self.rho[-1])

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residual)))

    def _swap(self, u, v, th):
        if self.sign > 0:
            return u, v, th
        return v, u, math.pi / 2 - th

    def scaled(self, c: float) -> "ProfileCurve":
        """The curve c * H_sign (a leaf H(c^(1-gamma) * sign))."""
        if not c > 0:
            raise PreconditionViolated("scale must be positive")
        return ProfileCurve(self.cone, self.sign, self.s * c, self.u * c, self.v * c, self.theta,
                            self.rho * c, self.w, self.residual / c, self.u0 * c, self._leaf)

    def state_at_rho(self, rho):
        """(u, v, theta) of the leaf point at distance rho from the origin."""
        rho = np.asarray(rho, float)
        u, v, th = self._leaf.state_rho(rho / self.u0)
        u, v, th = self._swap(u, v, th)
        return u * self.u0, v * self.u0, th

    def w_at_rho(self, rho):
        """Signed angular offset from the cone ray at distance rho."""
        u, v, _ = self.state_at_rho(rho)
        return np.arctan2(v, u) - self.cone.cone_angle

    def log_rho_of_w(self, w):
        """log(rho) of the leaf point whose angular offset is w (w*sign < 0)."""
        w = np.asarray(w, float)
        wc = w if self.sign > 0 else -w
        if np.any(wc >= 0):
            raise OutOfDomain("offset lies on the other side of the cone")
        return math.log(self.u0) + self._leaf.log_rho_of_w(wc)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["s", "u", "v", "theta", "residual"])
        for row in zip(self.s, self.u, self.v, self.theta, self.residual):
            wr.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


def solve_profile(cone: ConeSpec, sign: int = 1, s_max: float = 1e3, tol: float = 1e-8,
                  rtol: float = RTOL) -> ProfileCurve:
    """Integrate the leaf H_sign with axis crossing at distance u0 = 1."""
    spectrum(cone)  # raises NotStrictlyStable
    if sign not in (1, -1):
        raise PreconditionViolated("sign must be +1 or -1")
    if not s_max > 0:
        raise PreconditionViolated("s_max must be positive")
    if not 0 < tol <= 1e-6:
        raise PreconditionViolated("tol must lie in (0, 1e-6]")
    p, q = (cone.p, cone.q) if sign > 0 else (cone.q, cone.p)
    leaf = _solve_canonical(p, q, float(s_max), float(rtol))
    s, u, v, th, rho, w, res = _canonical_samples(leaf)
    if np.any(w >= 0):
        raise SideViolation("sampled profile touches the cone")
    if sign < 0:
        u, v, th, w = v, u, math.pi / 2 - th, -w
    worst = float(np.max(np.abs(res)))
    if not worst < tol:
        raise IntegrationDiverged(f"mean-curvature residual {worst:.3e} exceeds tol {tol:.1e}")
    return ProfileCurve(cone, sign, s, u, v, th, rho, w, res, 1.0, leaf)


# ---------------------------------------------------------------------------
# asymptotics


@dataclass(frozen=True)
class LeafGraphFit:
    R0: float
    gamma_hat: float
    a_hat: float
    alpha0_hat: float
    residuals: np.ndarray
    radii: np.ndarray

    def as_dict(self) -> dict:
        return {"R0": self.R0, "gamma_hat": self.gamma_hat, "a_hat": self.a_hat, "alpha0_hat": self.alpha0_hat}


def graph_height(curve: ProfileCurve):
    """(r, Psi): cone radius and signed normal height of the tail samples.

    Psi is measured along the cone normal pointing to the sign +1 side.
    """
    r = curve.rho * np.cos(curve.w)
    psi = -curve.rho * np.sin(curve.w)
    return r, psi


def leaf_height(curve: ProfileCurve):
    """g(r) with the tail of ``curve`` equal to the graph of g(r) psi_1 over the cone."""
    r, psi = graph_height(curve)
    sel = r > graphability_radius(curve)
    spline = CubicSpline(np.log(r[sel]), psi[sel] / curve.cone.psi1)
    return lambda x: spline(np.log(x))


def graphability_radius(curve: ProfileCurve) -> float:
    """Smallest sampled cone radius beyond which the projection to the cone is monotone."""
    r, _ = graph_height(curve)
    bad = np.nonzero(np.diff(r) <= 0)[0]
    return float(r[0] if bad.size == 0 else r[bad[-1] + 1])


def fit_leaf_asymptotics(curve: ProfileCurve, table: SpectralTable | None = None,
                         min_samples: int = 50) -> LeafGraphFit:
    """Two-term fit log|Psi| = log A + g log r + log(1 + B r^(-alpha)) on the outer two decades."""
    table = table if table is not None else spectrum(curve.cone)
    r, psi = graph_height(curve)
    r_max = float(r[-1])
    if r_max < 100 * curve.u0:
        raise InsufficientTail(f"max radius {r_max:.3g} below 100 u0")
    R0 = graphability_radius(curve)
    sel = (r >= max(r_max / 100, R0)) & (np.abs(psi) > 0)
    if sel.sum() < min_samples:
        raise InsufficientTail(f"only {sel.sum()} tail samples beyond the graphability radius")
    L, Y = np.log(r[sel]), np.log(np.abs(psi[sel]))
    Lc = L - L[-1]  # centre at r_max so B is O(1)
    g0, c0 = np.polyfit(Lc, Y, 1)

    # correction term written as B (r/r_max)^(-alpha)
    def resid2(x):
        la, g, B, al = x
        return la + g * Lc + np.log1p(B * np.exp(-al * Lc)) - Y

    sol = least_squares(resid2, [c0, g0, 1e-3, 1.0],
                        bounds=([-np.inf, -np.inf, -0.9, 0.05], [np.inf, np.inf, 1e3, 5.0]),
                        x_scale="jac", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=10000)
    la, g, B, al = sol.x
    A = math.exp(la - g * L[-1])
    a_hat = math.copysign(A, float(np.median(psi[sel]))) / curve.cone.psi1
    return LeafGraphFit(R0=R0, gamma_hat=float(g), a_hat=float(a_hat), alpha0_hat=float(al),
                        residuals=sol.fun.copy(), radii=r[sel].copy())


# ---------------------------------------------------------------------------
# the foliation


@dataclass(frozen=True, eq=False)
class Foliation:
    """H(t) = |t|^(1/(1-gamma)) H_sign(t), t in R, with H(0) the cone."""

    plus: ProfileCurve
    minus: ProfileCurve | None
    table: SpectralTable

    @classmethod
    def compute(cls, cone: ConeSpec, s_max: float = 1e3, tol: float = 1e-8) -> "Foliation":
        plus = solve_profile(cone, 1, s_max, tol)
        try:
            minus = solve_profile(cone, -1, s_max, tol)
        except SideViolation:
            minus = None
        return cls(plus, minus, spectrum(cone))

    @property
    def cone(self) -> ConeSpec:
        return self.plus.cone

    @property
    def gamma(self) -> float:
        return self.table.gamma

    def curve(self, sign: int) -> ProfileCurve:
        c = self.plus if sign > 0 else self.minus
        if c is None:
            raise OutOfDomain("no foliation leaf computed on this side of the cone")
        return c

    def leaf_scale(self, t: float) -> float:
        return abs(t) ** (1.0 / (1.0 - self.gamma))

    def leaf(self, t: float) -> ProfileCurve:
        if t == 0:
            raise PreconditionViolated("H(0) is the cone")
        return self.curve(1 if t > 0 else -1).scaled(self.leaf_scale(t))

    def leaf_w(self, t: float, rho):
        """Angular offset of H(t) from the cone at radii rho (0 for t = 0)."""
        rho = np.asarray(rho, float)
        if t == 0:
            return np.zeros_like(rho)
        return self.leaf(t).w_at_rho(rho)

    def parameter_polar(self, rho, w, cone_tol: float = 1e-10):
        """Foliation parameter of points given by radius rho and offset w."""
        rho = np.asarray(rho, float)
        w = np.asarray(w, float)
        if np.any(rho <= 0):
            raise OutOfDomain("point projects to the origin of the quadrant")
        rho, w = np.broadcast_arrays(rho, w)
        out = np.zeros(rho.shape)
        one = 1.0 - self.gamma
        for sgn in (1, -1):
            sel = (sgn * w < 0) & (np.abs(w) > cone_tol)
            if np.any(sel):
                curve = self.curve(sgn)
                log_c = np.log(rho[sel]) - curve.log_rho_of_w(w[sel])
                out[sel] = sgn * np.exp(one * log_c)
        return out

    def parameter(self, u, v, cone_tol: float = 1e-10):
        u, v = np.asarray(u, float), np.asarray(v, float)
        w = np.arctan2(v, u) - self.cone.cone_angle
        return self.parameter_polar(np.hypot(u, v), w, cone_tol)


def reduce_point(cone: ConeSpec, x) -> tuple[float, float]:
    """(u, v) quadrant coordinates of a point x in R^(n+1)."""
    x = np.asarray(x, float)
    if x.shape[-1] != cone.n + 1:
        raise PreconditionViolated(f"expected a point of R^{cone.n + 1}")
    return float(np.linalg.norm(x[: cone.p + 1])), float(np.linalg.norm(x[cone.p + 1 :]))


def foliation_parameter(point, curve_pair, table: SpectralTable | None = None, cone_tol: float = 1e-10) -> float:
    """Unique t with the point on H(t) x R^l; ``point`` is (x, y) or just x."""
    plus, minus = curve_pair
    table = table if table is not None else spectrum(plus.cone)
    x = point[0] if isinstance(point, tuple) else point
    u, v = reduce_point(plus.cone, x)
    if u == 0.0 and v == 0.0:
        raise OutOfDomain("point projects to the origin of the quadrant")
    return float(Foliation(plus, minus, table).parameter(u, v, cone_tol))


# ---------------------------------------------------------------------------
# Phi expansion


@dataclass(frozen=True)
class PhiExpansion:
    eps_list: np.ndarray
    radii: np.ndarray  # cone radius r of the base points
    phi_eps: np.ndarray  # shape (len(eps_list), len(radii))
    phi_plus: np.ndarray  # extrapolated first-order term
    phi_plus_exact: np.ndarray  # dilation field x . nu, an independent value of the same quantity
    v_eps: np.ndarray  # (phi_eps - eps phi_plus) / eps^2
    tail_ratio: np.ndarray  # phi_plus / (r^gamma psi_1)
    remainder_order: float
    normalization: float  # scale c turning the u0 = 1 leaf into the unit-coefficient leaf


def _leaf_scale_log(curve: ProfileCurve, rho, w):
    """log of c with (rho, w) on c * curve."""
    return np.log(rho) - curve.log_rho_of_w(w)


def phi_expansion(curve: ProfileCurve, eps_list, radii=None, table: SpectralTable | None = None) -> PhiExpansion:
    """Normal graph Phi_eps of (1+eps) H_+ over H_+ and its first-order term.

    The leaf is first rescaled so that its tail reads r^gamma psi_1 + ... with
    unit coefficient (the fitted a_hat is divided out).  Phi_eps is found on
    the normal line through each base point by root-finding on the leaf scale;
    the first-order term is extracted by polynomial extrapolation in eps and
    compared with the exact dilation field x . nu.
    """
    table = table if table is not None else spectrum(curve.cone)
    eps_arr = np.asarray(list(eps_list), float)
    if np.any(np.abs(eps_arr) > 0.1):
        raise PreconditionViolated("|eps| must be <= 0.1")
    if curve.sign < 0:
        raise PreconditionViolated("expansion is taken over H_+")
    gamma = table.gamma
    fit = fit_leaf_asymptotics(curve, table)
    c = abs(fit.a_hat) ** (-1.0 / (1.0 - gamma))
    leaf = curve.scaled(c)
    if radii is None:
        radii = np.geomspace(10.0, 100.0, 41)
    rho = np.asarray(radii, float)
    if rho.max() * 1.2 > leaf.rho_max:
        raise PreconditionViolated("curve tail too short for the requested radii")
    u, v, th = leaf.state_at_rho(rho)
    w = np.arctan2(v, u) - leaf.cone.cone_angle
    phic = leaf.cone.cone_angle
    # unit normal oriented away from the cone, towards the u axis
    N = np.stack([-np.sin(th), np.cos(th)])
    n_c = np.array([math.sin(phic), -math.cos(phic)])
    N = N * np.sign(n_c @ N)
    phi_eps = np.zeros((eps_arr.size, rho.size))
    for i, eps in enumerate(eps_arr):
        if eps == 0:
            continue
        target = math.log1p(eps)
        for k in range(rho.size):
            def g(h):
                P = np.array([u[k], v[k]]) + h * N[:, k]
                wp = math.atan2(P[1], P[0]) - phic
                if wp >= 0:
                    return -np.inf if eps > 0 else np.inf
                return float(_leaf_scale_log(leaf, math.hypot(P[0], P[1]), wp)) - target

            guess = eps * float(np.array([u[k], v[k]]) @ N[:, k])
            lo, hi = sorted((0.0, 3.0 * guess))
            try:
                phi_eps[i, k] = brentq(g, lo, hi, xtol=1e-15, rtol=1e-14)
            except ValueError as exc:
                raise GraphFailure(f"(1+eps)H_+ is not a graph over H_+ at r = {rho[k]:.3g}") from exc
    nz = eps_arr != 0
    e = eps_arr[nz]
    quot = phi_eps[nz] / e[:, None]
    deg = min(len(e) - 1, 3)
    if deg >= 1:
        V = np.vander(e, deg + 1, increasing=True)
        coef, *_ = np.linalg.lstsq(V, quot, rcond=None)
        phi_plus = coef[0]
    else:
        phi_plus = quot[0] if len(e) else np.zeros_like(rho)
    exact = u * N[0] + v * N[1]
    v_eps = np.zeros_like(phi_eps)
    v_eps[nz] = (phi_eps[nz] - e[:, None] * exact) / e[:, None] ** 2
    r_cone = rho * np.cos(w)
    tail_ratio = phi_plus / (r_cone**gamma * leaf.cone.psi1)
    if len(e) >= 2:
        rem = np.max(np.abs(phi_eps[nz] - e[:, None] * exact), axis=1)
        order = float(np.polyfit(np.log(np.abs(e)), np.log(rem), 1)[0])
    else:
        order = float("nan")
    return PhiExpansion(eps_arr, r_cone, phi_eps, phi_plus, exact, v_eps, tail_ratio, order, c)


# ---------------------------------------------------------------------------
# density ratio


def _gauss(n=8):
    return roots_legendre(n)


def _segments_integral(f, edges, nodes=8):
    x, wts = _gauss(nodes)
    a, b = edges[:-1], edges[1:]
    mid, half = (a + b) / 2, (b - a) / 2
    pts = mid[:, None] + half[:, None] * x[None, :]
    vals = np.asarray(f(pts.ravel()), float).reshape(pts.shape)
    return float(np.sum(half[:, None] * wts[None, :] * vals))


def _segments_integral_to_end(f, edges, nodes=8):
    """Integral over [edges[0], edges[-1]] after x = end - tau^2.

    This removes a square-root endpoint singularity of f at the right end.
    """
    end = edges[-1]
    tau = np.sqrt(np.maximum(end - np.asarray(edges, float), 0.0))[::-1]
    return _segments_integral(lambda t: 2 * t * f(end - t * t), tau, nodes)


def density_ratio(curve: ProfileCurve, R: float, l: int | None = None) -> float:
    """Area of (curve orbit) x R^l inside B_R divided by omega_{n+l} R^(n+l)."""
    cone = curve.cone
    l = cone.l if l is None else l
    if R > curve.rho_max:
        raise PreconditionViolated("R exceeds the computed extent of the curve")
    leaf, c = curve._leaf, curve.u0
    Rc = R / c
    if Rc <= 1.0:
        return 0.0
    p, q = (cone.p, cone.q) if curve.sign > 0 else (cone.q, cone.p)
    orbit = sphere_area(p) * sphere_area(q)

    def weight(rho):
        if l == 0:
            return 1.0
        return ball_volume(l) * np.clip(Rc**2 - rho**2, 0.0, None) ** (l / 2)

    def head(s):
        u, v, _ = leaf.state_s(s)
        return u**p * v**q * weight(np.hypot(u, v))

    def tail(t):
        w, al, _ = leaf.polar_t(t)
        rho = np.exp(t)
        return (rho * np.cos(leaf.phic + w)) ** p * (rho * np.sin(leaf.phic + w)) ** q * weight(rho) * rho / np.cos(al)

    # the R^l weight has a square-root zero at the outer end for odd l
    to_end = _segments_integral_to_end if l else _segments_integral
    total = 0.0
    tR = math.log(Rc)
    if tR <= leaf.t1:
        sR = leaf.s_at_rho(Rc)
        edges = np.union1d(np.linspace(0, leaf.s0, 5), leaf.sol1.t[leaf.sol1.t < sR])
        edges = np.append(edges[edges < sR], sR)
        total += to_end(head, edges)
    else:
        edges = np.union1d(np.linspace(0, leaf.s0, 5), leaf.sol1.t)
        total += _segments_integral(head, edges)
        te = leaf.sol2.t[(leaf.sol2.t > leaf.t1) & (leaf.sol2.t < tR)]
        edges = np.concatenate([[leaf.t1], te, [tR]])
        total += to_end(tail, edges)
    area = orbit * total * c ** (cone.n + l)
    return area / (ball_volume(cone.n + l) * R ** (cone.n + l))


def cone_density_ratio(cone: ConeSpec, R: float = 1.0, l: int | None = None) -> float:
    """Density ratio of the cone itself: area by the exact radial integral."""
    l = cone.l if l is None else l
    if l == 0:
        area = cone.link_area * R**cone.n / cone.n
    else:
        # int_0^R rho^(n-1) (R^2 - rho^2)^(l/2) d rho = R^(n+l) B(n/2, l/2 + 1) / 2
        radial = R ** (cone.n + l) * math.exp(math.lgamma(cone.n / 2) + math.lgamma(l / 2 + 1)
                                              - math.lgamma((cone.n + l) / 2 + 1)) / 2
        area = cone.link_area * ball_volume(l) * radial
    return area / (ball_volume(cone.n + l) * R ** (cone.n + l))
