"""Trapping distance, excess, the discrete three-annulus inequality, and growth experiments.

Test surfaces are equivariant, so the trapping distance of M between leaves
H(lambda - d) and H(lambda + d) reduces to a maximum of |t(x) - lambda| over
the foliation parameters t(x) of sample points.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from .beta_harmonic import JacobiField, cone_grid, scaled_sup
from .cone_spectrum import ConeSpec, spectrum
from .errors import EmptyIntersection, InsufficientScales, PreconditionViolated
from .foliation import Foliation


# ---------------------------------------------------------------------------
# mode vectors and the discrete three-annulus inequality


@dataclass(frozen=True)
class ModeVector:
    """psi(t) = sum_i b_i^2 exp(2 q_i t) with strictly increasing q_i."""

    q: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, float)
        b = np.asarray(self.b, float)
        if q.shape != b.shape or q.ndim != 1:
            raise PreconditionViolated("q and b must be 1-d arrays of equal length")
        if np.any(np.diff(q) <= 0):
            raise PreconditionViolated("q must be strictly increasing")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "b", b)

    def log_psi(self, t):
        """log psi(t); -inf where psi vanishes."""
        t = np.asarray(t, float)
        nz = self.b != 0
        if not np.any(nz):
            return np.full(t.shape, -np.inf)
        # weights as 2 log|b| so that tiny amplitudes do not underflow when squared
        log_w = 2 * np.log(np.abs(self.b[nz]))
        return logsumexp(2 * np.multiply.outer(t, self.q[nz]) + log_w, axis=-1)

    def psi(self, t):
        return np.exp(self.log_psi(t))


def mode_vector(field: JacobiField) -> ModeVector:
    """Homogeneities and L^2 amplitudes of a Jacobi field."""
    amps = field.amplitudes()
    return ModeVector(np.array([q for q, _ in amps]), np.array([b for _, b in amps]))


def three_annulus_check(modes: ModeVector, k: int, eps: float, T: float, t: float = 0.0) -> tuple[bool, bool]:
    """(premise, conclusion) for psi(t+T) >= e^{2(q_k+eps)T} psi(t) => psi(t+2T) >= e^{2(q_{k+1}-eps)T} psi(t+T).

    ``k`` is a 0-based index; for the last entry q_{k+1} is taken as +inf.
    """
    q = modes.q
    if not 0 <= k < q.size:
        raise PreconditionViolated("k out of range")
    q_next = q[k + 1] if k + 1 < q.size else math.inf
    if not (eps > 0 and 3 * eps < q_next - q[k]):
        raise PreconditionViolated("need 0 < 3 eps < q_{k+1} - q_k")
    if not T >= 1 / eps:
        raise PreconditionViolated("need T >= 1/eps")
    if not np.any(modes.b):
        return True, True  # psi vanishes identically
    l0, l1, l2 = modes.log_psi(np.array([t, t + T, t + 2 * T]))
    premise = bool(l1 >= 2 * (q[k] + eps) * T + l0)
    conclusion = math.isfinite(q_next) and bool(l2 >= 2 * (q_next - eps) * T + l1)
    return premise, conclusion


@dataclass(frozen=True)
class ThreeAnnulusTrials:
    trials: int
    failures: int
    premise_true: int
    seed: int
    records: list = field(repr=False, default_factory=list)

    def as_dict(self) -> dict:
        return {"trials": self.trials, "failures": self.failures, "premise_true": self.premise_true,
                "seed": self.seed}

    def jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)


def three_annulus_trials(n_trials: int, seed: int, max_len: int = 8, keep_records: bool = False) -> ThreeAnnulusTrials:
    """Randomized instances of the three-annulus implication, evaluated in bulk.

    Lengths are uniform in [2, max_len]; q has a random start and positive
    gaps; about a fifth of the amplitudes are zero; k is an admissible index,
    eps lies strictly inside (0, gap/3), T in [1/eps, 3/eps] and t in [-3, 3].
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    L = rng.integers(2, max_len + 1, size=n_trials)
    gaps = rng.uniform(0.05, 2.0, size=(n_trials, max_len))
    q = rng.uniform(-5.0, 0.0, size=(n_trials, 1)) + np.cumsum(gaps, axis=1) - gaps[:, :1]
    b = rng.normal(size=(n_trials, max_len)) * (rng.random((n_trials, max_len)) > 0.2)
    pos = np.arange(max_len)[None, :]
    b = np.where(pos < L[:, None], b, 0.0)  # padding carries no mass
    k = (rng.random(n_trials) * (L - 1)).astype(int)
    rows = np.arange(n_trials)
    gap = q[rows, k + 1] - q[rows, k]
    eps = gap / 3 * rng.uniform(0.05, 0.95, size=n_trials)
    T = rng.uniform(1.0, 3.0, size=n_trials) / eps
    t = rng.uniform(-3.0, 3.0, size=n_trials)
    b2 = b**2

    def log_psi(s):
        return logsumexp(2 * q * s[:, None], b=b2, axis=1)

    with np.errstate(divide="ignore"):
        l0, l1, l2 = log_psi(t), log_psi(t + T), log_psi(t + 2 * T)
    premise = l1 >= 2 * (q[rows, k] + eps) * T + l0
    conclusion = l2 >= 2 * (q[rows, k + 1] - eps) * T + l1
    zero = ~np.any(b, axis=1)
    premise[zero] = conclusion[zero] = True  # psi vanishes identically
    failures = int(np.sum(premise & ~conclusion))
    records = []
    if keep_records:
        for i in range(n_trials):
            n = int(L[i])
            records.append({"seed": seed, "trial": i, "q": q[i, :n].tolist(), "b": b[i, :n].tolist(),
                            "k": int(k[i]), "eps": float(eps[i]), "T": float(T[i]), "t": float(t[i]),
                            "premise": bool(premise[i]), "conclusion": bool(conclusion[i])})
    return ThreeAnnulusTrials(n_trials, failures, int(premise.sum()), seed, records)


# ---------------------------------------------------------------------------
# test surfaces


@dataclass(frozen=True, eq=False)
class TestSurface:
    """Sample points of an equivariant hypersurface in R^(n+1) x R^l.

    Each point is stored by its quadrant radius rho, angular offset w from the
    cone ray, and |y|; ``t`` holds the foliation parameters.
    """

    __test__ = False  # not a pytest class

    foliation: Foliation
    rho: np.ndarray
    w: np.ndarray
    y: np.ndarray
    t: np.ndarray

    @classmethod
    def from_polar(cls, fol: Foliation, rho, w, y) -> "TestSurface":
        rho, w, y = (np.asarray(a, float) for a in (rho, w, y))
        return cls(fol, rho, w, y, fol.parameter_polar(rho, w))

    @staticmethod
    def _y_samples(l: int, R: float, n_y: int) -> np.ndarray:
        return np.zeros(1) if l == 0 else np.linspace(0.0, R, n_y)

    @classmethod
    def leaf(cls, fol: Foliation, t: float, R: float, per_decade: int = 1000, n_y: int = 16,
             inner: float = 1e-3) -> "TestSurface":
        """H(t) x R^l sampled on radii up to R (log-spaced) and |y| in [0, R]."""
        r_min = inner * R if t == 0 else fol.leaf(t).rho_min
        if r_min >= R:
            raise EmptyIntersection("leaf does not reach into B_R")
        count = max(int(per_decade * math.log10(R / r_min)), 200)
        rho = np.geomspace(r_min * (1 + 1e-9), R, count)
        w = fol.leaf_w(t, rho)
        y = cls._y_samples(fol.cone.l, R, n_y)
        P, Y = np.meshgrid(np.arange(rho.size), y, indexing="ij")
        # the parameter is recomputed from the sampled points rather than copied from t
        return cls.from_polar(fol, rho[P.ravel()], w[P.ravel()], Y.ravel())

    @classmethod
    def jacobi_graph(cls, fol: Foliation, field: JacobiField, delta: float, R: float,
                     graph_limit: float = 0.5) -> "TestSurface":
        """Normal graph of delta * v over C cap B_R, displaced towards the H_+ side for v > 0."""
        grid = cone_grid(field.cone, R)
        v = delta * field(grid.r, grid.cos1, grid.cos2, grid.y) if field.modes else np.zeros(grid.size)
        ok = np.abs(v) < graph_limit * grid.r
        r, v = grid.r[ok], v[ok]
        ynorm = np.linalg.norm(grid.y[ok], axis=1) if grid.y is not None else np.zeros(r.size)
        return cls.from_polar(fol, np.hypot(r, v), -np.arctan2(v, r), ynorm)

    @classmethod
    def union(cls, *parts: "TestSurface") -> "TestSurface":
        fol = parts[0].foliation
        cat = lambda name: np.concatenate([getattr(p, name) for p in parts])
        return cls(fol, cat("rho"), cat("w"), cat("y"), cat("t"))

    def scaled(self, c: float) -> "TestSurface":
        """c * M, with foliation parameters recomputed from scratch."""
        if not c > 0:
            raise PreconditionViolated("scale must be positive")
        return TestSurface.from_polar(self.foliation, c * self.rho, self.w, c * self.y)

    @property
    def radius(self) -> np.ndarray:
        return np.hypot(self.rho, self.y)


Region = tuple | Callable


def _region_mask(M: TestSurface, U: Region) -> np.ndarray:
    if callable(U):
        return np.asarray(U(M.rho, M.y), bool)
    kind = U[0]
    rad = M.radius
    if kind == "ball":
        return rad <= U[1]
    if kind == "annulus":
        return (rad >= U[1]) & (rad <= U[2])
    raise PreconditionViolated(f"unknown region {kind!r}")


def scale_region(U: Region, c: float) -> Region:
    if callable(U):
        return lambda rho, y: U(rho / c, y / c)
    return (U[0],) + tuple(c * x for x in U[1:])


def trap_distance(M: TestSurface, lam: float, U: Region) -> float:
    """Least d with M cap U between H(lam - d) x R^l and H(lam + d) x R^l."""
    mask = _region_mask(M, U)
    if not np.any(mask):
        raise EmptyIntersection("M does not meet U")
    return float(np.max(np.abs(M.t[mask] - lam)))


def excess(M: TestSurface, lam: float, R: float) -> float:
    """E(M, T_lam, R) = R^(gamma - 1) D_{T_lam}(M; B_R)."""
    if not R > 0:
        raise PreconditionViolated("R must be positive")
    return R ** (M.foliation.gamma - 1) * trap_distance(M, lam, ("ball", R))


# ---------------------------------------------------------------------------
# linear growth experiments


def homogeneity_gap(cone: ConeSpec, j_max: int = 6) -> tuple[float, float]:
    """(q_1, q_2): the two smallest homogeneities gamma_j + d available on C."""
    table = spectrum(cone, j_max)
    cand = sorted({e.gamma_plus + d for e in table for d in (range(3) if cone.l else (0,))})
    return cand[0], cand[1]


def linear_excess(field: JacobiField, R: float) -> float:
    """N(R) = R^(gamma-1) sup_{C cap B_R} | |x|^(-gamma) v | on the standard grid."""
    return R ** (field.gamma - 1) * scaled_sup(field, R)


@dataclass(frozen=True)
class DichotomyReport:
    R: np.ndarray
    N: np.ndarray
    slopes: np.ndarray  # log-slope of N between consecutive radii
    triggered: np.ndarray  # per triple (R, RL, RL^2)
    conclusion: np.ndarray  # conclusion of the doubling condition, only meaningful when triggered
    eps: float
    eps0: float
    eps1: float | None
    eps2: float
    gamma: float
    pure_lowest: bool
    decay_ceiling_ok: bool | None
    growth_floor_ok: bool | None
    lower_bound_monotone: bool | None

    @property
    def failures(self) -> int:
        return int(np.sum(self.triggered & ~self.conclusion))

    def summary(self) -> dict:
        return {
            "eps": self.eps, "eps0": self.eps0, "eps1": "unavailable", "eps2": self.eps2,
            "gamma": self.gamma, "pure_lowest": self.pure_lowest, "failures": self.failures,
            "triggered": int(self.triggered.sum()),
            "final_slope": float(self.slopes[-1]) if self.slopes.size else None,
            "decay_ceiling_ok": self.decay_ceiling_ok, "growth_floor_ok": self.growth_floor_ok,
            "lower_bound_monotone": self.lower_bound_monotone,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["R", "N", "slope", "condition_triggered"])
        for i, (R, N) in enumerate(zip(self.R, self.N)):
            slope = repr(float(self.slopes[i - 1])) if i > 0 else ""
            trig = str(bool(self.triggered[i - 2])).lower() if i >= 2 else ""
            wr.writerow([repr(float(R)), repr(float(N)), slope, trig])
        return buf.getvalue()


def dichotomy_experiment(field: JacobiField, R_list: Sequence[float], eps: float = 1.0,
                         slope_tol: float = 0.01) -> DichotomyReport:
    """Linear-level growth/decay dichotomy across a geometric sequence of scales."""
    R = np.asarray(R_list, float)
    if R.size < 3:
        raise InsufficientScales("need at least three scales")
    ratios = R[1:] / R[:-1]
    if np.any(np.abs(ratios / ratios[0] - 1) > 1e-9):
        raise InsufficientScales("R_list must be geometric")
    L = float(ratios[0])
    if L < math.exp(2 / eps) * (1 - 1e-12):
        raise InsufficientScales(f"scale ratio {L:.4g} below e^(2/eps) = {math.exp(2 / eps):.4g}")
    gamma = field.gamma
    q1, q2 = homogeneity_gap(field.cone)
    eps0 = min(q2 - q1, 1.0)
    eps2 = min(eps0, 1.0) / 16
    N = np.array([linear_excess(field, r) for r in R])
    with np.errstate(divide="ignore", invalid="ignore"):
        logN = np.log(N)
        slopes = np.diff(logN) / np.log(ratios)
        trig = logN[1:-1] >= (gamma - 1 + eps) * math.log(L) + logN[:-2]
        concl = logN[2:] >= (gamma - 1 + eps0 - eps) * math.log(L) + logN[1:-1]
    zero = not np.any(N > 0)
    if zero:
        trig = np.zeros(R.size - 2, bool)
        concl = np.ones(R.size - 2, bool)
        slopes = np.zeros(R.size - 1)
    pure = field.is_pure_lowest()
    decay_ok = growth_ok = mono = None
    if not zero and pure:
        decay_ok = bool(np.all(slopes <= gamma - 1 + slope_tol))
    if not zero and not pure:
        growth_ok = bool(slopes[-1] >= gamma - 1 + eps0 - slope_tol)
        scaled = N * R ** (1 - gamma - eps2)
        tail = scaled[R.size // 2 :]
        mono = bool(np.all(np.diff(tail) >= -1e-12 * np.abs(tail[1:])))
    return DichotomyReport(R, N, slopes, trig, concl, eps, eps0, None, eps2, gamma, pure, decay_ok, growth_ok, mono)


def negativity_radius(field: JacobiField, R_max: float, R_min: float = 1.0, per_decade: int = 4) -> float | None:
    """Smallest sampled R with min v < 0 on the standard grid of C cap B_R, or None."""
    if not field.modes:
        raise PreconditionViolated("field must be nonzero")
    count = max(int(round(per_decade * math.log10(R_max / R_min))) + 1, 2)
    for R in np.geomspace(R_min, R_max, count):
        g = cone_grid(field.cone, float(R))
        if np.min(field(g.r, g.cos1, g.cos2, g.y)) < 0:
            return float(R)
    return None
