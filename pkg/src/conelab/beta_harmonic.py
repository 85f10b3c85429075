"""beta-harmonic polynomials in (r^2, y) and tame Jacobi fields on C = C_0 x R^l.

A polynomial h(r, y) = sum c_{a,m} r^(2a) y^m is beta-harmonic when

    r^(-1-beta) d_r(r^(1+beta) d_r h) + Delta_y h = 0.

On a monomial the r-part is exact: R^a -> 2a(2a + beta) R^(a-1) with R = r^2,
so for rational beta the whole computation stays in Fractions.

Homogeneous kernel elements of degree q are built as Y_s(y) P(r^2, |y|^2)
with Y_s a harmonic polynomial of degree s in y and P the unique (up to
scale) solution of the two-term recurrence left after separating Y_s.  The
harmonic factors come from an exact null space of Delta_y, orthogonalized
with the exact sphere moments.  A separate exact null-space computation of
the full degree-q -> degree-(q-2) map is kept for cross-checking the
kernel dimension.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable

import numpy as np
import sympy
from scipy import integrate

from .cone_spectrum import ConeSpec, SpectralTable, spectrum
from .errors import PreconditionViolated, QuadratureFailure, UnknownMode, UnsupportedDimension

Number = Fraction | float
Key = tuple[int, tuple[int, ...]]  # (a, m): r^(2a) y^m


def as_beta(beta) -> Number:
    """Exact Fraction when beta is (a float equal to) a simple rational, else float."""
    if isinstance(beta, Fraction):
        return beta
    if isinstance(beta, int):
        return Fraction(beta)
    if isinstance(beta, str):
        try:
            return Fraction(beta)
        except ValueError:
            return float(beta)
    f = Fraction(float(beta)).limit_denominator(10**6)
    return f if float(f) == float(beta) else float(beta)


def _multi_indices(l: int, degree: int):
    if l == 0:
        if degree == 0:
            yield ()
        return
    for combo in itertools.combinations_with_replacement(range(l), degree):
        m = [0] * l
        for i in combo:
            m[i] += 1
        yield tuple(m)


@dataclass(frozen=True)
class RYPoly:
    """Polynomial in (r^2, y) with a dict of coefficients keyed by (a, m)."""

    l: int
    terms: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "terms", {k: c for k, c in self.terms.items() if c != 0})

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(c) <= tol for c in self.terms.values())

    def __add__(self, other: "RYPoly") -> "RYPoly":
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0) + c
        return RYPoly(self.l, out)

    def scale(self, s) -> "RYPoly":
        return RYPoly(self.l, {k: s * c for k, c in self.terms.items()})

    def __mul__(self, other: "RYPoly") -> "RYPoly":
        out: dict = {}
        for (a1, m1), c1 in self.terms.items():
            for (a2, m2), c2 in other.terms.items():
                k = (a1 + a2, tuple(i + j for i, j in zip(m1, m2)))
                out[k] = out.get(k, 0) + c1 * c2
        return RYPoly(self.l, out)

    def degree(self) -> int:
        return max((2 * a + sum(m) for a, m in self.terms), default=0)

    def __call__(self, r, y=None):
        r = np.asarray(r, float)
        R = r * r
        if self.l:
            y = np.asarray(y, float)  # shape (..., l)
            out = np.zeros(np.broadcast_shapes(R.shape, y.shape[:-1]))
        else:
            out = np.zeros(R.shape)
        for (a, m), c in self.terms.items():
            term = float(c) * R**a
            for i, e in enumerate(m):
                if e:
                    term = term * y[..., i] ** e
            out = out + term
        return out


def beta_laplacian(poly: RYPoly, beta) -> RYPoly:
    """r^(-1-beta) d_r(r^(1+beta) d_r h) + Delta_y h, exactly for rational beta."""
    beta = as_beta(beta)
    out: dict = {}
    for (a, m), c in poly.terms.items():
        if a:
            k = (a - 1, m)
            out[k] = out.get(k, 0) + c * 2 * a * (2 * a + beta)
        for i, e in enumerate(m):
            if e >= 2:
                mm = list(m)
                mm[i] -= 2
                k = (a, tuple(mm))
                out[k] = out.get(k, 0) + c * e * (e - 1)
    return RYPoly(poly.l, out)


# ---------------------------------------------------------------------------
# exact sphere moments and harmonic polynomials in y


def _double_factorial_odd(k: int) -> int:
    """(k-1)!! for even k >= 0, i.e. 1 * 3 * ... * (k-1)."""
    out = 1
    for j in range(1, k, 2):
        out *= j
    return out


def _sphere_moment(m: tuple[int, ...]) -> int:
    """int_{S^(l-1)} y^m up to a factor depending only on |m|."""
    if any(e % 2 for e in m):
        return 0
    return math.prod(_double_factorial_odd(e) for e in m)


@lru_cache(maxsize=None)
def harmonic_basis(l: int, s: int) -> tuple[RYPoly, ...]:
    """Orthogonal basis (exact) of degree-s harmonic polynomials in y in R^l."""
    if l == 0:
        return (RYPoly(0, {(0, ()): Fraction(1)}),) if s == 0 else ()
    cols = list(_multi_indices(l, s))
    if s < 2:
        raw = [RYPoly(l, {(0, m): Fraction(1)}) for m in cols]
    else:
        rows = {m: i for i, m in enumerate(_multi_indices(l, s - 2))}
        mat = sympy.zeros(len(rows), len(cols))
        for j, m in enumerate(cols):
            for i, e in enumerate(m):
                if e >= 2:
                    mm = list(m)
                    mm[i] -= 2
                    mat[rows[tuple(mm)], j] += e * (e - 1)
        raw = []
        for vec in mat.nullspace():
            raw.append(RYPoly(l, {(0, m): Fraction(int(x.p), int(x.q)) for m, x in zip(cols, vec) if x != 0}))

    def inner(f: RYPoly, g: RYPoly) -> Fraction:
        tot = Fraction(0)
        for (_, m1), c1 in f.terms.items():
            for (_, m2), c2 in g.terms.items():
                tot += c1 * c2 * _sphere_moment(tuple(i + j for i, j in zip(m1, m2)))
        return tot

    basis: list[RYPoly] = []
    for f in raw:
        for b in basis:
            f = f + b.scale(-inner(f, b) / inner(b, b))
        basis.append(f)
    return tuple(basis)


def _radial_profile(beta: Number, l: int, s: int, K: int) -> list:
    """Coefficients c_a of sum_a c_a r^(2a) |y|^(2(K-a)) making Y_s * (.) beta-harmonic."""
    c = [Fraction(1) if isinstance(beta, Fraction) else 1.0]
    for a in range(K):
        num = (K - a) * (2 * (K - a) + 2 * s + l - 2)
        den = (a + 1) * (2 * a + 2 + beta)
        c.append(-c[-1] * num / den)
    return c


def _norm_y_power(l: int, b: int) -> RYPoly:
    """|y|^(2b) expanded."""
    out = RYPoly(l, {(0, (0,) * l): Fraction(1)})
    sq = RYPoly(l, {(0, tuple(2 if i == k else 0 for i in range(l))): Fraction(1) for k in range(l)})
    for _ in range(b):
        out = out * sq
    return out


# ---------------------------------------------------------------------------
# hemisphere integrals


def hemisphere_moment(c: float, e: tuple[int, ...]) -> float:
    """int over S^l_+ (omega_1 > 0) of omega_1^c prod omega_{y_i}^{e_i}."""
    if any(k % 2 for k in e):
        return 0.0
    l = len(e)
    lg = math.lgamma((c + 1) / 2) + sum(math.lgamma((k + 1) / 2) for k in e)
    lg -= math.lgamma((c + sum(e) + l + 1) / 2)
    return math.exp(lg)


def weighted_inner(f: RYPoly, g: RYPoly, beta) -> float:
    """int_{S^l_+} omega_1^(1+beta) f g, in closed form."""
    beta = float(beta)
    tot = 0.0
    for (a1, m1), c1 in f.terms.items():
        for (a2, m2), c2 in g.terms.items():
            e = tuple(i + j for i, j in zip(m1, m2))
            tot += float(c1) * float(c2) * hemisphere_moment(1 + beta + 2 * (a1 + a2), e)
    return tot


# ---------------------------------------------------------------------------
# basis


@dataclass(frozen=True)
class BetaPoly:
    """Homogeneous beta-harmonic polynomial with exact coefficients and a float normalization."""

    beta: Number
    l: int
    degree: int
    poly: RYPoly
    normalization: float = 1.0
    harmonic_degree: int = 0
    index: int = 0

    @property
    def coeffs(self) -> dict:
        return dict(self.poly.terms)

    def __call__(self, r, y=None):
        return self.normalization * self.poly(r, y)

    def value_at_origin(self) -> float:
        return self.normalization * float(self.poly.terms.get((0, (0,) * self.l), 0))

    def as_dict(self) -> dict:
        mons = []
        for (a, m), c in sorted(self.poly.terms.items()):
            fr = c if isinstance(c, Fraction) else None
            mons.append({
                "a": a,
                "m": list(m),
                "num": fr.numerator if fr is not None else float(c),
                "den": fr.denominator if fr is not None else 1,
            })
        beta = str(self.beta) if isinstance(self.beta, Fraction) else self.beta
        return {"beta": beta, "l": self.l, "degree": self.degree, "monomials": mons,
                "normalization": self.normalization}


def beta_apply(poly) -> RYPoly:
    """The beta-Laplacian of a BetaPoly (unnormalized coefficients)."""
    return beta_laplacian(poly.poly, poly.beta)


@lru_cache(maxsize=None)
def _basis_degree(beta: Number, l: int, q: int) -> tuple[BetaPoly, ...]:
    if l == 0:
        if q:
            return ()
        one = RYPoly(0, {(0, ()): Fraction(1)})
        return (BetaPoly(beta, 0, 0, one, 1.0 / math.sqrt(weighted_inner(one, one, beta))),)
    out = []
    for s in range(q % 2, q + 1, 2):
        K = (q - s) // 2
        coeffs = _radial_profile(beta, l, s, K)
        P = RYPoly(l, {})
        for a, c in enumerate(coeffs):
            P = P + _norm_y_power(l, K - a) * RYPoly(l, {(a, (0,) * l): c})
        for Y in harmonic_basis(l, s):
            h = Y * P
            norm = math.sqrt(weighted_inner(h, h, beta))
            out.append(BetaPoly(beta, l, q, h, 1.0 / norm, s, len(out)))
    return tuple(out)


def beta_basis(beta, l: int, q_max: int) -> list[BetaPoly]:
    """Unit-norm basis of homogeneous beta-harmonic polynomials of degree <= q_max."""
    beta = as_beta(beta)
    if not beta > 0:
        raise PreconditionViolated("beta must be positive")
    if l < 0 or q_max < 0:
        raise PreconditionViolated("need l >= 0 and q_max >= 0")
    return [b for q in range(q_max + 1) for b in _basis_degree(beta, l, q)]


def beta_kernel_dimension(beta, l: int, q: int) -> int:
    """Kernel dimension of the beta-Laplacian on degree-q polynomials in (r^2, y).

    Computed from the full coefficient matrix (exact for rational beta).
    """
    beta = as_beta(beta)
    cols = [(a, m) for a in range(q // 2 + 1) for m in _multi_indices(l, q - 2 * a)]
    if not cols:
        return 0
    if q < 2:
        return len(cols)
    rows = {k: i for i, k in enumerate((a, m) for a in range((q - 2) // 2 + 1) for m in _multi_indices(l, q - 2 - 2 * a))}
    exact = isinstance(beta, Fraction)
    mat = sympy.zeros(len(rows), len(cols)) if exact else np.zeros((len(rows), len(cols)))
    for j, key in enumerate(cols):
        img = beta_laplacian(RYPoly(l, {key: Fraction(1) if exact else 1.0}), beta)
        for k, c in img.terms.items():
            mat[rows[k], j] += sympy.Rational(c.numerator, c.denominator) if exact else c
    rank = mat.rank() if exact else int(np.linalg.matrix_rank(mat))
    return len(cols) - rank


# ---------------------------------------------------------------------------
# checks on single polynomials


def _quad_guard(fn, *args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            return fn(*args, **kwargs)
        except integrate.IntegrationWarning as exc:
            raise QuadratureFailure(str(exc)) from exc


def mean_value_check(poly: BetaPoly, rho: float = 1.0) -> tuple[float, float]:
    """(h(0,0), weighted average of h over the half ball B_rho^+ with weight r^(1+beta))."""
    if not rho > 0:
        raise PreconditionViolated("rho must be positive")
    lhs = poly.value_at_origin()
    w = 1.0 + float(poly.beta)
    opts = dict(epsabs=1e-13, epsrel=1e-12)
    if poly.l == 0:
        return lhs, lhs
    if poly.l == 1:
        top = lambda r: math.sqrt(max(rho * rho - r * r, 0.0))
        f = lambda y, r: poly(r, np.array([y]))[()] * r**w
        g = lambda y, r: r**w
        num = _quad_guard(integrate.dblquad, f, 0, rho, lambda r: -top(r), top, **opts)[0]
        den = _quad_guard(integrate.dblquad, g, 0, rho, lambda r: -top(r), top, **opts)[0]
        return lhs, num / den
    if poly.l == 2:
        # polar coordinates in y = s (cos chi, sin chi); the chi-average of a
        # trigonometric polynomial of degree <= q is exact on q + 2 equispaced nodes
        chi = np.arange(poly.degree + 2) * (2 * math.pi / (poly.degree + 2))
        ring = np.stack([np.cos(chi), np.sin(chi)], axis=1)
        top = lambda r: math.sqrt(max(rho * rho - r * r, 0.0))
        f = lambda s, r: float(np.mean(poly(r, s * ring))) * 2 * math.pi * r**w * s
        g = lambda s, r: 2 * math.pi * r**w * s
        num = _quad_guard(integrate.dblquad, f, 0, rho, 0, top, **opts)[0]
        den = _quad_guard(integrate.dblquad, g, 0, rho, 0, top, **opts)[0]
        return lhs, num / den
    raise UnsupportedDimension("mean-value check implemented for l <= 2")


def _d5(f, x, h):
    fm2, fm1, f0, fp1, fp2 = f(x - 2 * h), f(x - h), f(x), f(x + h), f(x + 2 * h)
    return f0, (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * h), (-fm2 + 16 * fm1 - 30 * f0 + 16 * fp1 - fp2) / (12 * h * h)


def sphere_eigencheck(poly: BetaPoly, n_points: int = 1000, step: float = 1e-3) -> float:
    """max |omega_1^(-1-beta) div(omega_1^(1+beta) grad phi) + q(q+l+beta) phi| on S^l_+.

    phi is the restriction of the polynomial; derivatives along the spherical
    coordinates come from five-point differences.
    """
    l, q, beta = poly.l, poly.degree, float(poly.beta)
    lam = q * (q + l + beta)
    if l == 1:
        phi = np.linspace(-math.pi / 2 + 0.02, math.pi / 2 - 0.02, n_points)
        f = lambda a: poly(np.cos(a), np.sin(a)[..., None])
        f0, f1, f2 = _d5(f, phi, step)
        res = f2 - (1 + beta) * np.tan(phi) * f1 + lam * f0
    elif l == 2:
        n_phi = max(int(round(math.sqrt(n_points))), 2)
        n_chi = max(n_points // n_phi, 2)
        ph, ch = np.meshgrid(np.linspace(0.02, math.pi / 2 - 0.02, n_phi),
                             np.linspace(0, 2 * math.pi, n_chi, endpoint=False), indexing="ij")

        def at(a, c):
            y = np.stack([np.sin(a) * np.cos(c), np.sin(a) * np.sin(c)], axis=-1)
            return poly(np.cos(a), y)

        f0, f1, f2 = _d5(lambda a: at(a, ch), ph, step)
        _, _, fcc = _d5(lambda c: at(ph, c), ch, step)
        res = f2 + (1 / np.tan(ph) - (1 + beta) * np.tan(ph)) * f1 + fcc / np.sin(ph) ** 2 + lam * f0
    else:
        raise UnsupportedDimension("hemisphere eigen-check supports l in {1, 2}")
    return float(np.max(np.abs(res)))


# ---------------------------------------------------------------------------
# Jacobi fields


@dataclass(frozen=True)
class FieldMode:
    j: int
    poly: BetaPoly
    coeff: float
    gamma: float

    @property
    def homogeneity(self) -> float:
        return self.gamma + self.poly.degree


@dataclass(frozen=True, eq=False)
class JacobiField:
    """v = sum coeff r^gamma_j psi_j h(r, y), modes sorted by homogeneity."""

    cone: ConeSpec
    modes: tuple[FieldMode, ...]
    table: SpectralTable

    @property
    def gamma(self) -> float:
        return self.table.gamma

    def homogeneities(self) -> list[float]:
        return [m.homogeneity for m in self.modes]

    def __call__(self, r, cos1, cos2, y=None):
        r = np.asarray(r, float)
        out = np.zeros(np.broadcast(r, cos1, cos2).shape if y is None or self.cone.l == 0
                       else np.broadcast_shapes(np.broadcast(r, cos1, cos2).shape, np.shape(y)[:-1]))
        for m in self.modes:
            psi = self.table.eigenfunction(m.j)(cos1, cos2)
            out = out + m.coeff * r**m.gamma * psi * m.poly(r, y)
        return out

    def amplitudes(self, tol: float = 1e-12) -> list[tuple[float, float]]:
        """[(q_i, b_i)] with b_i^2 = sum of coeff^2/(n+l+2q) over modes of homogeneity q_i."""
        groups: list[list[float]] = []
        dim = self.cone.n + self.cone.l
        for m in self.modes:
            w = m.coeff**2 / (dim + 2 * m.homogeneity)
            if groups and abs(groups[-1][0] - m.homogeneity) <= tol:
                groups[-1][1] += w
            else:
                groups.append([m.homogeneity, w])
        return [(q, math.sqrt(b2)) for q, b2 in groups]

    def closed_form_norm(self, rho: float) -> float:
        """sum_i a_i^2 rho^(n+l+2q_i) with a_i as in ``amplitudes``."""
        dim = self.cone.n + self.cone.l
        return sum(b * b * rho ** (dim + 2 * q) for q, b in self.amplitudes())

    def is_pure_lowest(self) -> bool:
        return all(m.j == 1 and m.poly.degree == 0 for m in self.modes)


def synthesize_field(cone: ConeSpec, spec: Iterable, table: SpectralTable | None = None) -> JacobiField:
    """Field from entries (j, degree, coeff) or (j, degree, coeff, index)."""
    spec = list(spec)
    j_max = max([int(e[0]) for e in spec] + [6])
    table = table if table is not None else spectrum(cone, j_max)
    if len(table) < j_max:
        table = spectrum(cone, j_max)
    merged: dict[tuple[int, int, int], float] = {}
    for entry in spec:
        j, degree, coeff = int(entry[0]), int(entry[1]), float(entry[2])
        index = int(entry[3]) if len(entry) > 3 else 0
        if j < 1 or degree < 0:
            raise UnknownMode(f"invalid mode ({j}, {degree})")
        key = (j, degree, index)
        merged[key] = merged.get(key, 0.0) + coeff
    modes = []
    for (j, degree, index), coeff in merged.items():
        e = table[j]
        beta = e.beta_exact if e.beta_exact is not None else e.beta
        basis = _basis_degree(as_beta(beta), cone.l, degree)
        if index >= len(basis):
            raise UnknownMode(f"no beta-harmonic polynomial ({j}, {degree}, {index}) for l = {cone.l}")
        if coeff != 0.0:
            modes.append(FieldMode(j, basis[index], coeff, e.gamma_plus))
    modes.sort(key=lambda m: (m.homogeneity, m.j, m.poly.degree, m.poly.index))
    return JacobiField(cone, tuple(modes), table)


def available_modes(cone: ConeSpec, j_max: int, degree_max: int) -> list[tuple[int, int, int]]:
    """All (j, degree, index) triples with j <= j_max and degree <= degree_max."""
    table = spectrum(cone, max(j_max, 6))
    out = []
    for j in range(1, j_max + 1):
        e = table[j]
        beta = as_beta(e.beta_exact if e.beta_exact is not None else e.beta)
        for d in range(degree_max + 1):
            out += [(j, d, i) for i in range(len(_basis_degree(beta, cone.l, d)))]
    return out


def random_field(cone: ConeSpec, rng: np.random.Generator, j_max: int = 3, degree_max: int = 3,
                 n_modes: int | None = None, require_higher: bool = False) -> JacobiField:
    """Random field with coefficients of magnitude in [0.2, 1] and random signs."""
    pool = available_modes(cone, j_max, degree_max)
    k = int(rng.integers(1, min(len(pool), 4) + 1)) if n_modes is None else n_modes
    idx = rng.choice(len(pool), size=min(k, len(pool)), replace=False)
    chosen = [pool[i] for i in idx]
    if require_higher and all(m[:2] == (1, 0) for m in chosen):
        higher = [m for m in pool if m[:2] != (1, 0)]
        chosen.append(higher[int(rng.integers(len(higher)))])
    spec = [(j, d, float(rng.choice([-1, 1]) * rng.uniform(0.2, 1.0)), i) for j, d, i in chosen]
    return synthesize_field(cone, spec)


# ---------------------------------------------------------------------------
# sample grid and sup norms


def link_grid(n_phi1: int = 8, n_phi2: int = 4):
    """Polar angles on the two sphere factors, poles included: (cos phi1, cos phi2) arrays."""
    c1 = np.cos(np.linspace(0, math.pi, n_phi1))
    c2 = np.cos(np.linspace(0, math.pi, n_phi2))
    a, b = np.meshgrid(c1, c2, indexing="ij")
    return a.ravel(), b.ravel()


def halfspace_directions(l: int, n: int = 16) -> np.ndarray:
    """Unit vectors (omega_1, omega_y) in the closed half space omega_1 >= 0."""
    if l == 0:
        return np.array([[1.0]])
    if l == 1:
        t = (np.arange(n) + 0.5) / n * math.pi - math.pi / 2
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    if l == 2:
        k = int(round(math.sqrt(n)))
        th = (np.arange(k) + 0.5) / k * (math.pi / 2)
        ch = np.arange(n // k) / (n // k) * 2 * math.pi
        T, C = np.meshgrid(th, ch, indexing="ij")
        T, C = T.ravel(), C.ravel()
        return np.stack([np.cos(T), np.sin(T) * np.cos(C), np.sin(T) * np.sin(C)], axis=1)
    rng = np.random.default_rng(0)
    d = rng.normal(size=(n, l + 1))
    d[:, 0] = np.abs(d[:, 0])
    return d / np.linalg.norm(d, axis=1, keepdims=True)


@dataclass(frozen=True)
class ConeGrid:
    """Sample points of C cap B_R: radius r, link coordinates, y."""

    r: np.ndarray
    cos1: np.ndarray
    cos2: np.ndarray
    y: np.ndarray | None

    @property
    def size(self) -> int:
        return self.r.size


def cone_grid(cone: ConeSpec, R: float, n_radii: int = 64, n_link: tuple[int, int] = (8, 4),
              n_y: int = 16, inner: float = 1e-3) -> ConeGrid:
    """64 log-spaced radii x 32 link points x 16 half-space directions inside B_R."""
    rad = np.geomspace(inner * R, R, n_radii)
    c1, c2 = link_grid(*n_link)
    dirs = halfspace_directions(cone.l, n_y)
    dirs = dirs[dirs[:, 0] > 1e-12]
    P, L, D = np.meshgrid(np.arange(n_radii), np.arange(c1.size), np.arange(len(dirs)), indexing="ij")
    P, L, D = P.ravel(), L.ravel(), D.ravel()
    r = rad[P] * dirs[D, 0]
    y = rad[P][:, None] * dirs[D, 1:] if cone.l else None
    return ConeGrid(r, c1[L], c2[L], y)


def scaled_sup(field: JacobiField, R: float, grid: ConeGrid | None = None) -> float:
    """sup over the grid in C cap B_R of | |x|^(-gamma) v |, |x| the cone-factor radius."""
    grid = grid if grid is not None else cone_grid(field.cone, R)
    if not field.modes:
        return 0.0
    vals = field(grid.r, grid.cos1, grid.cos2, grid.y) * grid.r ** (-field.gamma)
    return float(np.max(np.abs(vals)))


# ---------------------------------------------------------------------------
# L^2 norms by tensor Gauss-Legendre quadrature


def _gl(a: float, b: float, n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return (b - a) / 2 * x + (a + b) / 2, (b - a) / 2 * w


def _adaptive(compute, tol: float = 1e-11, n0: int = 16, n_max: int = 2048):
    n, prev = n0, compute(n0)
    while n < n_max:
        n *= 2
        cur = compute(n)
        if np.all(np.abs(cur - prev) <= tol * np.maximum(1.0, np.abs(cur))):
            return cur
        prev = cur
    raise QuadratureFailure("tensor Gauss-Legendre refinement exceeded its node budget")


def _link_gram(field: JacobiField) -> np.ndarray:
    """int_Sigma psi_{j} psi_{j'} over mode pairs."""
    cone = field.cone
    from .cone_spectrum import sphere_area

    def compute(n):
        x1, w1 = _gl(0, math.pi, n)
        x2, w2 = _gl(0, math.pi, n)
        W = np.outer(w1 * np.sin(x1) ** (cone.p - 1), w2 * np.sin(x2) ** (cone.q - 1))
        W *= cone.a**cone.p * sphere_area(cone.p - 1) * cone.b**cone.q * sphere_area(cone.q - 1)
        C1, C2 = np.meshgrid(np.cos(x1), np.cos(x2), indexing="ij")
        vals = [field.table.eigenfunction(m.j)(C1, C2) for m in field.modes]
        return np.array([[np.sum(W * a * b) for b in vals] for a in vals])

    return _adaptive(compute)


def _halfball_gram(field: JacobiField, rho: float) -> np.ndarray:
    """int over {r > 0, r^2 + |y|^2 < rho^2} of r^(n-1+gamma+gamma') h h' dr dy."""
    cone, modes = field.cone, field.modes
    n, l = cone.n, cone.l

    def compute(N):
        s, ws = _gl(0, rho, N)
        if l == 0:
            r, y, W = s, None, ws
        elif l == 1:
            t, wt = _gl(-math.pi / 2, math.pi / 2, N)
            S, T = np.meshgrid(s, t, indexing="ij")
            W = np.outer(ws, wt) * S
            r, y = S * np.cos(T), (S * np.sin(T))[..., None]
        elif l == 2:
            t, wt = _gl(0, math.pi / 2, N)
            c, wc = _gl(0, 2 * math.pi, max(N // 2, 8))
            S, T, Cc = np.meshgrid(s, t, c, indexing="ij")
            W = ws[:, None, None] * wt[None, :, None] * wc[None, None, :] * S**2 * np.sin(T)
            r = S * np.cos(T)
            y = np.stack([S * np.sin(T) * np.cos(Cc), S * np.sin(T) * np.sin(Cc)], axis=-1)
        else:
            raise UnsupportedDimension("norm quadrature implemented for l <= 2")
        vals = [r ** (m.gamma + (n - 1) / 2) * m.poly(r, y) for m in modes]
        return np.array([[np.sum(W * a * b) for b in vals] for a in vals])

    return _adaptive(compute)


@dataclass(frozen=True)
class NormSample:
    rho: float
    integral: float
    closed_form: float
    normalized: float  # rho^(-n-l-2 gamma) * integral


def field_norm_profile(field: JacobiField, rho_list) -> list[NormSample]:
    """int_{C cap B_rho} v^2 by tensor quadrature, with the closed form alongside."""
    dim = field.cone.n + field.cone.l
    out = []
    gram_link = _link_gram(field) if field.modes else None
    c = np.array([m.coeff for m in field.modes])
    for rho in rho_list:
        rho = float(rho)
        if not 0 < rho <= 1:
            raise PreconditionViolated("rho must lie in (0, 1]")
        if field.modes:
            total = float(c @ (gram_link * _halfball_gram(field, rho)) @ c)
        else:
            total = 0.0
        out.append(NormSample(rho, total, field.closed_form_norm(rho), rho ** (-dim - 2 * field.gamma) * total))
    return out


def linfty_l2_ratio(field: JacobiField, grid_half: ConeGrid | None = None, grid_one: ConeGrid | None = None) -> float:
    """sup_{B_1/2} | |x|^-gamma v |^2 / int_{B_1} v^2 after normalizing sup_{B_1} to 1."""
    s1 = scaled_sup(field, 1.0, grid_one)
    if s1 == 0:
        return 0.0
    s_half = scaled_sup(field, 0.5, grid_half) / s1
    l2 = field.closed_form_norm(1.0) / s1**2
    return s_half**2 / l2
