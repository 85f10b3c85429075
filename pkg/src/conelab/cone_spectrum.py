"""Spectral data of generalized Simons cones C_{p,q} x R^l.

The link is Sigma = S^p(a) x S^q(b) with a^2 = p/(p+q), b^2 = q/(p+q), a
minimal hypersurface of S^n (n = p+q+1) with |A_Sigma|^2 = n-1.  The
Laplacian on Sigma has eigenvalues

    mu(k, m) = k(k+p-1)/a^2 + m(m+q-1)/b^2,

so the link Jacobi operator L = Delta + |A|^2 has eigenvalues
lambda = mu - (n-1), and the indicial roots of the cone Jacobi operator are

    gamma^{+-} = -(n-2)/2 +- sqrt(((n-2)/2)^2 + lambda).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import NotStrictlyStable, PreconditionViolated

MU_TOL = 1e-12


def sphere_area(k: int) -> float:
    """Area of the unit round sphere S^k."""
    return 2.0 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)


def ball_volume(k: int) -> float:
    """Volume omega_k of the unit ball in R^k."""
    return math.pi ** (k / 2) / math.gamma(k / 2 + 1)


def harmonic_dimension(d: int, k: int) -> int:
    """Dimension of degree-k spherical harmonics on S^d."""
    if k == 0:
        return 1
    if d == 1:
        return 2
    return math.comb(k + d, d) - math.comb(k + d - 2, d)


def _exact_sqrt(x: Fraction) -> Fraction | None:
    if x < 0:
        return None
    num, den = x.numerator, x.denominator
    rn, rd = math.isqrt(num), math.isqrt(den)
    if rn * rn == num and rd * rd == den:
        return Fraction(rn, rd)
    return None


@dataclass(frozen=True)
class ConeSpec:
    """The cylinder C_{p,q} x R^l over a generalized Simons cone."""

    p: int
    q: int
    l: int = 0

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise PreconditionViolated(f"sphere dimensions must be >= 1, got p={self.p}, q={self.q}")
        if self.l < 0:
            raise PreconditionViolated(f"l must be >= 0, got {self.l}")

    @property
    def n(self) -> int:
        return self.p + self.q + 1

    @property
    def a(self) -> float:
        return math.sqrt(self.p / (self.p + self.q))

    @property
    def b(self) -> float:
        return math.sqrt(self.q / (self.p + self.q))

    @property
    def cone_angle(self) -> float:
        """Polar angle of the cone ray v/u = sqrt(q/p) in the (u, v) quadrant."""
        return math.atan2(math.sqrt(self.q), math.sqrt(self.p))

    @property
    def second_fundamental_form_sq(self) -> int:
        return self.n - 1

    @property
    def link_area(self) -> float:
        return sphere_area(self.p) * self.a**self.p * sphere_area(self.q) * self.b**self.q

    @property
    def psi1(self) -> float:
        """The L^2-normalized first eigenfunction, a constant."""
        return self.link_area**-0.5

    @property
    def cone_density(self) -> float:
        """theta_C(0) = |Sigma| / (n omega_n)."""
        return self.link_area / (self.n * ball_volume(self.n))

    def mu_exact(self, k: int, m: int) -> Fraction:
        s = self.p + self.q
        return Fraction(k * (k + self.p - 1) * s, self.p) + Fraction(m * (m + self.q - 1) * s, self.q)

    def label(self) -> str:
        return f"C_{{{self.p},{self.q}}}" + (f"xR^{self.l}" if self.l else "")


@dataclass(frozen=True)
class SpectralEntry:
    j: int
    mu: float
    lam: float
    multiplicity: int
    k: int
    m: int
    pairs: tuple[tuple[int, int], ...] = ()
    lam_exact: Fraction | None = None
    gamma_plus: float = math.nan
    gamma_minus: float = math.nan
    beta: float = math.nan
    beta_exact: Fraction | None = None

    def as_dict(self) -> dict:
        return {
            "j": self.j,
            "mu": self.mu,
            "lambda": self.lam,
            "gamma_plus": self.gamma_plus,
            "gamma_minus": self.gamma_minus,
            "beta": self.beta,
            "multiplicity": self.multiplicity,
            "k": self.k,
            "m": self.m,
        }


COLUMNS = ["j", "mu", "lambda", "gamma_plus", "gamma_minus", "beta", "multiplicity", "k", "m"]


@dataclass(frozen=True)
class SpectralTable:
    cone: ConeSpec
    entries: tuple[SpectralEntry, ...]
    _eigfuncs: dict = field(default_factory=dict, repr=False, compare=False)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, j: int) -> SpectralEntry:
        """1-based lookup by spectral index."""
        if not 1 <= j <= len(self.entries):
            raise KeyError(j)
        return self.entries[j - 1]

    @property
    def gamma(self) -> float:
        return self.entries[0].gamma_plus

    def to_json(self) -> str:
        return json.dumps([e.as_dict() for e in self.entries], indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for e in self.entries:
            d = e.as_dict()
            w.writerow([repr(d[c]) if isinstance(d[c], float) else d[c] for c in COLUMNS])
        return buf.getvalue()

    def eigenfunction(self, j: int) -> "LinkEigenfunction":
        if j not in self._eigfuncs:
            e = self[j]
            self._eigfuncs[j] = LinkEigenfunction(self.cone, e.k, e.m)
        return self._eigfuncs[j]


def _zonal(d: int, k: int, t):
    """Zonal degree-k harmonic on S^d as a function of t = cos(polar angle)."""
    if d == 1:
        return special.eval_chebyt(k, t)
    return special.eval_gegenbauer(k, (d - 1) / 2, t)


@lru_cache(maxsize=None)
def _zonal_sq_integral(d: int, k: int) -> float:
    """int_{S^d} Z_k^2 over the unit sphere, by Gauss-Jacobi (exact for polynomials)."""
    alpha = (d - 2) / 2
    t, w = special.roots_jacobi(k + 2, alpha, alpha)
    return sphere_area(d - 1) * float(np.sum(w * _zonal(d, k, t) ** 2))


class LinkEigenfunction:
    """Representative eigenfunction Z_k(cos phi1) Z_m(cos phi2), unit L^2(Sigma) norm.

    phi1 is the polar angle on the S^p factor measured from its first axis,
    phi2 likewise on S^q.
    """

    def __init__(self, cone: ConeSpec, k: int, m: int):
        self.cone, self.k, self.m = cone, k, m
        norm_sq = (
            cone.a**cone.p * _zonal_sq_integral(cone.p, k) * cone.b**cone.q * _zonal_sq_integral(cone.q, m)
        )
        self.scale = norm_sq**-0.5

    def __call__(self, cos1, cos2):
        return self.scale * _zonal(self.cone.p, self.k, cos1) * _zonal(self.cone.q, self.m, cos2)

    @property
    def is_constant(self) -> bool:
        return self.k == 0 and self.m == 0


def link_spectrum(cone: ConeSpec, j_max: int) -> SpectralTable:
    """First ``j_max`` distinct eigenvalues of L = Delta_Sigma + |A_Sigma|^2."""
    if j_max < 1:
        raise PreconditionViolated("j_max must be >= 1")
    s = cone.p + cone.q
    K = 2
    while True:
        groups: list[list] = []
        for k in range(K + 1):
            for m in range(K + 1):
                mu = cone.mu_exact(k, m)
                mult = harmonic_dimension(cone.p, k) * harmonic_dimension(cone.q, m)
                groups.append([float(mu), mu, mult, (k, m)])
        groups.sort(key=lambda g: (g[0], g[3]))
        # every eigenvalue below this bound has k, m <= K
        bound = min(Fraction((K + 1) * (K + cone.p) * s, cone.p), Fraction((K + 1) * (K + cone.q) * s, cone.q))
        merged: list[list] = []
        for mu_f, mu, mult, km in groups:
            if mu >= bound:
                break
            if merged and abs(mu_f - merged[-1][0]) <= MU_TOL:
                merged[-1][2] += mult
                merged[-1][3].append(km)
            else:
                merged.append([mu_f, mu, mult, [km]])
        if len(merged) >= j_max:
            break
        K *= 2
    entries = []
    for j, (mu_f, mu, mult, pairs) in enumerate(merged[:j_max], start=1):
        lam = mu - (cone.n - 1)
        entries.append(
            SpectralEntry(
                j=j, mu=mu_f, lam=float(lam), multiplicity=mult, k=pairs[0][0], m=pairs[0][1],
                pairs=tuple(pairs), lam_exact=lam,
            )
        )
    return SpectralTable(cone, tuple(entries))


def _radicand(n: int, lam: float) -> float:
    return ((n - 2) / 2) ** 2 + lam


def check_strict_stability(cone: ConeSpec) -> tuple[bool, float]:
    """Strict stability test; returns (stable, radicand ((n-2)/2)^2 + lambda_1)."""
    rad = _radicand(cone.n, -(cone.n - 1))
    return rad > 0, rad


def growth_exponents(table: SpectralTable) -> SpectralTable:
    n = table.cone.n
    stable, rad = check_strict_stability(table.cone)
    if not stable:
        raise NotStrictlyStable(f"{table.cone.label()} is not strictly stable (radicand {rad})")
    out = []
    for e in table.entries:
        root = math.sqrt(_radicand(n, e.lam))
        beta_exact = None
        if e.lam_exact is not None:
            half = _exact_sqrt(Fraction((n - 2) ** 2, 4) + e.lam_exact)
            beta_exact = None if half is None else 2 * half
        out.append(
            replace(
                e,
                gamma_plus=-(n - 2) / 2 + root,
                gamma_minus=-(n - 2) / 2 - root,
                beta=float(beta_exact) if beta_exact is not None else 2.0 * root,
                beta_exact=beta_exact,
            )
        )
    return SpectralTable(table.cone, tuple(out))


@lru_cache(maxsize=None)
def spectrum(cone: ConeSpec, j_max: int = 6) -> SpectralTable:
    """link_spectrum followed by growth_exponents, memoized per cone."""
    return growth_exponents(link_spectrum(cone, j_max))


def radial_jacobi_coefficient(cone: ConeSpec, j: int, a_exp: float, table: SpectralTable | None = None) -> float:
    """kappa with L_{C_0}(r^a psi_j) = kappa r^(a-2) psi_j, i.e. a(a+n-2) - lambda_j."""
    table = table if table is not None else spectrum(cone, max(j, 6))
    lam = table[j].lam
    return a_exp * (a_exp + cone.n - 2) - lam
