"""Verification suites: every module invariant as a named pass/fail check.

Each suite draws its randomness from a child of ``SeedSequence(seed)``, so a
report is a pure function of (suite, seed).  Reports carry no timings, which
keeps them byte-identical across runs.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from . import beta_harmonic as bh
from . import curvature as cv
from . import excess as ex
from . import foliation as fo
from .cone_spectrum import ConeSpec, check_strict_stability, radial_jacobi_coefficient, spectrum
from .errors import ConelabError

SUITES = ("spectrum", "foliation", "beta", "curvature", "excess")


@dataclass
class Check:
    suite: str
    name: str
    passed: bool
    value: float | int | str | None = None
    threshold: float | int | str | None = None

    def __post_init__(self):
        self.passed = bool(self.passed)


def _f(x) -> float:
    """Round-trip safe float for JSON, with deterministic repr."""
    return float(x)


# ---------------------------------------------------------------------------
# spectrum


def suite_spectrum(rng: np.random.Generator) -> list[Check]:
    out = []
    worst = 0.0
    brute_ok = classify_ok = True
    for p in range(1, 9):
        for q in range(1, 9):
            cone = ConeSpec(p, q)
            stable, _ = check_strict_stability(cone)
            classify_ok &= stable == (p + q >= 6)
            if not stable:
                continue
            table = spectrum(cone, 6)
            n = cone.n
            for e in table:
                worst = max(worst, abs(e.gamma_plus + e.gamma_minus + (n - 2)),
                            abs(e.gamma_plus * e.gamma_minus + e.lam) / max(1.0, abs(e.lam)),
                            abs(e.beta - (e.gamma_plus - e.gamma_minus)),
                            abs(radial_jacobi_coefficient(cone, e.j, e.gamma_plus, table)) / max(1.0, abs(e.lam)))
            brute_ok &= table[1].lam_exact == -(n - 1)
            # brute-force enumeration over k, m <= 10
            mus = sorted({cone.mu_exact(k, m) for k in range(11) for m in range(11)})[:6]
            brute_ok &= [e.lam_exact for e in table] == [mu - (n - 1) for mu in mus]
    out.append(Check("spectrum", "stability iff p+q >= 6 (p, q <= 8)", classify_ok))
    out.append(Check("spectrum", "exponent identities", worst < 1e-12, _f(worst), 1e-12))
    out.append(Check("spectrum", "closed form equals brute-force enumeration", brute_ok))
    t = spectrum(ConeSpec(3, 3), 2)
    exact = (t[1].gamma_plus, t[1].gamma_minus, t[1].beta, t[2].lam, t[2].gamma_plus, t[2].beta) == (-2, -3, 1, 0, 0, 5)
    out.append(Check("spectrum", "C_{3,3} exponents", exact))
    return out


# ---------------------------------------------------------------------------
# foliation


def suite_foliation(rng: np.random.Generator) -> list[Check]:
    out = []
    for p, q in [(3, 3), (1, 5)]:
        cone = ConeSpec(p, q)
        label = f"C_{{{p},{q}}}"
        fol = fo.Foliation.compute(cone)
        curve = fol.plus
        out.append(Check("foliation", f"{label} profile residual", curve.max_residual < 1e-8,
                         _f(curve.max_residual), 1e-8))
        fit = fo.fit_leaf_asymptotics(curve)
        out.append(Check("foliation", f"{label} fitted gamma", abs(fit.gamma_hat - fol.gamma) < 1e-2,
                         _f(fit.gamma_hat), _f(fol.gamma)))
        radii = np.geomspace(1.01, 0.9 * curve.rho_max, 40)
        dens = np.array([fo.density_ratio(curve, R) for R in radii])
        theta_c = cone.cone_density
        mono = bool(np.all(np.diff(dens) >= -1e-10) and np.all(dens <= 2 * theta_c))
        out.append(Check("foliation", f"{label} density ratio monotone and below 2 theta_C", mono))
        out.append(Check("foliation", f"{label} density limit", abs(dens[-1] - theta_c) < 1e-3,
                         _f(dens[-1]), _f(theta_c)))
        # distance to the cone grows with |t| at fixed radius
        ts = np.array([0.25, 0.5, 1.0, 2.0, 4.0])
        r = np.geomspace(1.01 * fol.leaf(ts[-1]).rho_min, 0.5 * curve.rho_max * fol.leaf_scale(ts[0]), 100)
        W = np.array([np.abs(fol.leaf_w(t, r)) for t in ts])
        out.append(Check("foliation", f"{label} leaves nested", bool(np.all(W > 0) and np.all(np.diff(W, axis=0) > 0))))
        # scaling law through the parameter
        idx = rng.integers(0, curve.rho.size, 20)
        t0 = fol.parameter_polar(curve.rho[idx], curve.w[idx])
        err = float(np.max(np.abs(t0 - 1.0)))
        for c in (0.5, 2.0, 10.0):
            tc = fol.parameter_polar(c * curve.rho[idx], curve.w[idx])
            err = max(err, float(np.max(np.abs(tc / c ** (1 - fol.gamma) - 1.0))))
        out.append(Check("foliation", f"{label} scaling identity", err < 1e-8, _f(err), 1e-8))
    curve = fo.solve_profile(ConeSpec(3, 3), 1)
    ph = fo.phi_expansion(curve, [0.01, 0.02, 0.04])
    sel = (ph.radii >= 30) & (ph.radii <= 100)
    tail = float(np.max(np.abs(ph.tail_ratio[sel] / 3.0 - 1)))
    out.append(Check("foliation", "tail law of the dilation field", tail < 0.02, _f(tail), 0.02))
    out.append(Check("foliation", "remainder order in eps", ph.remainder_order >= 1.9, _f(ph.remainder_order), 1.9))
    return out


# ---------------------------------------------------------------------------
# beta-harmonic


BETA_SAMPLES = (1, 5, Fraction(1, 2), math.sqrt(2))


def suite_beta(rng: np.random.Generator, n_fields: int = 20) -> list[Check]:
    out = []
    exact = True
    ortho = 0.0
    for l in (1, 2):
        for beta in BETA_SAMPLES:
            basis = bh.beta_basis(beta, l, 6)
            exact &= all(bh.beta_apply(b).is_zero(0 if not isinstance(b.beta, float) else 1e-12) for b in basis)
            for i, a in enumerate(basis):
                for b in basis[i + 1 :]:
                    if a.degree != b.degree:
                        ortho = max(ortho, abs(bh.weighted_inner(a.poly, b.poly, beta)))
    out.append(Check("beta", "beta-Laplacian annihilates the basis", bool(exact)))
    out.append(Check("beta", "hemisphere orthogonality across degrees", ortho < 1e-8, _f(ortho), 1e-8))
    mv = eig = 0.0
    for l in (1, 2):
        for b in bh.beta_basis(1, l, 4):
            lhs, rhs = bh.mean_value_check(b, 1.0)
            mv = max(mv, abs(lhs - rhs) / max(1.0, abs(lhs)))
            eig = max(eig, bh.sphere_eigencheck(b))
    out.append(Check("beta", "mean-value equality", mv < 1e-6, _f(mv), 1e-6))
    out.append(Check("beta", "hemisphere eigen-relation", eig < 1e-4, _f(eig), 1e-4))
    rho = np.linspace(0.1, 1.0, 10)
    norm_err, violations = 0.0, 0
    for i in range(n_fields):
        cone = ConeSpec(3, 3, 1 + i % 2)
        f = bh.random_field(cone, rng, j_max=2, degree_max=2)
        prof = bh.field_norm_profile(f, rho)
        for s in prof:
            norm_err = max(norm_err, abs(s.integral - s.closed_form) / max(abs(s.closed_form), 1e-300))
        norm = np.array([s.normalized for s in prof])
        violations += int(np.sum(np.diff(norm) < -1e-12 * np.abs(norm[1:])))
    out.append(Check("beta", "norm identity", norm_err <= 1e-4, _f(norm_err), 1e-4))
    out.append(Check("beta", "normalized norm monotone", violations == 0, violations, 0))
    ratios = [bh.linfty_l2_ratio(bh.random_field(ConeSpec(3, 3, 1), rng, j_max=2, degree_max=2)) for _ in range(50)]
    c = max(ratios)
    out.append(Check("beta", "sup/L2 comparability constant", bool(np.isfinite(c) and c > 0), _f(c)))
    return out


# ---------------------------------------------------------------------------
# curvature


def _cone_parametrization(cone: ConeSpec):
    def X(z):
        r = z[0]
        return np.concatenate([r * cone.a * fo._sphere_point(z[1 : cone.p + 1]),
                               r * cone.b * fo._sphere_point(z[cone.p + 1 :])])
    return X


def suite_curvature(rng: np.random.Generator, n_configs: int = 100) -> list[Check]:
    out = []
    errs = [cv.warped_oracle_error(*cv.random_warp_config(rng))[2] for _ in range(n_configs)]
    worst = max(errs)
    out.append(Check("curvature", "warped formula vs oracle", worst <= 1e-5, _f(worst), 1e-5))
    spec, u, y = cv.random_warp_config(rng)
    c = 1.7
    const = cv.WarpSpec(lambda y: c, lambda y: np.zeros(y.size), lambda y: np.zeros((y.size, y.size)), spec.patch)
    _, _, g, h, _ = spec.patch.geometry(u)
    m_s = float(np.trace(np.linalg.solve(g, h)))
    out.append(Check("curvature", "constant warp reduces to M_S/f", cv.warped_mean_curvature(const, u, y) == m_s / c))
    sphere = lambda z: np.array([np.sin(z[0]) * np.cos(z[1]), np.sin(z[0]) * np.sin(z[1]), np.cos(z[0])])
    ms = cv.fd_mean_curvature(sphere, [1.0, 0.3], orient=sphere([1.0, 0.3]))
    out.append(Check("curvature", "unit sphere has M = 2", abs(ms - 2) < 1e-9, _f(ms), 2.0))
    cone = ConeSpec(3, 3)
    mc = abs(cv.fd_mean_curvature(_cone_parametrization(cone), [1.0] + [1.3] * 6))
    out.append(Check("curvature", "cone is minimal", mc < 1e-8, _f(mc), 1e-8))
    r = np.geomspace(5, 500, 7)
    lin = cv.linearized_mc_mode(cone, 1, -1.5, numeric=True)(r)
    err = float(np.max(np.abs(lin / (0.75 * r**-3.5) - 1)))
    out.append(Check("curvature", "linearization on the cone", err < 1e-8, _f(err), 1e-8))
    curve = fo.solve_profile(cone, 1)
    res = float(np.max(np.abs(cv.graphical_mc(cone, fo.leaf_height(curve))(np.geomspace(5, 500, 9)))))
    out.append(Check("curvature", "leaf as a graph over the cone is minimal", res < 1e-6, _f(res), 1e-6))
    deltas = np.array([1e-2, 1e-3, 1e-4])
    for pq in [(3, 3), (1, 5)]:
        base = ConeSpec(*pq)
        gamma = spectrum(base).gamma
        res = np.array([np.max(np.abs(cv.graphical_mc(base, lambda x, d=d: d * x**gamma)([0.5, 1.0]))) for d in deltas])
        order = float(np.polyfit(np.log(deltas), np.log(res), 1)[0])
        quot = res / deltas**2
        ok = order >= 1.9 and quot.max() <= 2 * quot[0]
        out.append(Check("curvature", f"quadratic vanishing along a Jacobi field on {base.label()}", ok, _f(order), 1.9))
    margin = cv.supersolution_check_Fa(curve, -1.5, r_min=10).margin
    out.append(Check("curvature", "supersolution margin on the leaf tail", margin >= 0.7, _f(margin), 0.7))
    return out


# ---------------------------------------------------------------------------
# excess


def _random_surface(fol: fo.Foliation, rng: np.random.Generator, R: float) -> ex.TestSurface:
    kind = int(rng.integers(3))
    sides = [1] if fol.minus is None else [1, -1]
    if kind == 0:
        return ex.TestSurface.leaf(fol, float(rng.choice(sides)) * rng.uniform(0.1, 2.0), R, per_decade=200)
    if kind == 1:
        parts = [ex.TestSurface.leaf(fol, float(rng.choice(sides)) * rng.uniform(0.1, 2.0), R, per_decade=200)
                 for _ in range(2)]
        return ex.TestSurface.union(*parts)
    field = bh.random_field(fol.cone, rng, j_max=2, degree_max=1)
    return ex.TestSurface.jacobi_graph(fol, field, rng.uniform(1e-3, 1e-1), R)


def suite_excess(rng: np.random.Generator, n_fields: int = 200) -> list[Check]:
    out = []
    trials = ex.three_annulus_trials(100_000, int(rng.integers(2**31)))
    out.append(Check("excess", "three-annulus implication", trials.failures == 0, trials.failures, 0))
    cone = ConeSpec(3, 3)
    fol = fo.Foliation.compute(cone)
    C = ex.TestSurface.leaf(fol, 0.0, 10.0)
    err = 0.0
    for lam in (-1.0, -0.5, 0.5, 2.0):
        err = max(err, abs(ex.excess(C, lam, 10.0) - 10.0 ** (fol.gamma - 1) * abs(lam)))
    out.append(Check("excess", "excess of the cone about a leaf", err < 1e-8, _f(err), 1e-8))
    tri = scale = 0.0
    for _ in range(100):
        M = _random_surface(fol, rng, 10.0)
        lam, lam2 = rng.uniform(-2, 2, size=2)
        U = ("ball", 10.0) if rng.random() < 0.5 else ("annulus", 2.0, 8.0)
        try:
            d1, d2 = ex.trap_distance(M, lam, U), ex.trap_distance(M, lam2, U)
        except ConelabError:
            continue
        tri = max(tri, d1 - d2 - abs(lam - lam2))
        c = float(rng.choice([0.5, 2.0, 10.0]))
        dc = ex.trap_distance(M.scaled(c), c ** (1 - fol.gamma) * lam, ex.scale_region(U, c))
        scale = max(scale, abs(dc / (c ** (1 - fol.gamma) * d1) - 1) if d1 > 0 else abs(dc))
    out.append(Check("excess", "triangle inequality", tri <= 1e-12, _f(tri), 0.0))
    out.append(Check("excess", "scaling law", scale < 1e-8, _f(scale), 1e-8))
    finite = 0
    for i in range(n_fields):
        f = bh.random_field(ConeSpec(3, 3, i % 2), rng, require_higher=True)
        finite += ex.negativity_radius(f, 1e8) is not None
    out.append(Check("excess", "negativity radius finite with higher modes", finite == n_fields, finite, n_fields))
    pos = bh.synthesize_field(cone, [(1, 0, 1.0)])
    out.append(Check("excess", "no negativity for a positive lowest mode", ex.negativity_radius(pos, 1e8) is None))
    Rs = [10.0**k for k in range(1, 7)]
    pure = ex.dichotomy_experiment(pos, Rs)
    out.append(Check("excess", "decay ceiling for the lowest mode", bool(pure.decay_ceiling_ok),
                     _f(max(pure.slopes)), _f(fol.gamma - 1 + 0.01)))
    mixed = ex.dichotomy_experiment(bh.synthesize_field(cone, [(1, 0, 1.0), (2, 0, 1.0)]), Rs)
    out.append(Check("excess", "growth floor once a higher mode dominates", bool(mixed.growth_floor_ok),
                     _f(mixed.slopes[-1]), _f(fol.gamma - 1 + mixed.eps0 - 0.01)))
    out.append(Check("excess", "doubling condition propagates", mixed.failures == 0 and pure.failures == 0))
    out.append(Check("excess", "excess lower bound eventually monotone", bool(mixed.lower_bound_monotone)))
    return out


_RUNNERS = {"spectrum": suite_spectrum, "foliation": suite_foliation, "beta": suite_beta,
            "curvature": suite_curvature, "excess": suite_excess}


def run(suites, seed: int = 0) -> dict:
    """Run the named suites ("all" expands to every suite) and return a JSON-ready report."""
    names = list(SUITES) if "all" in suites else list(suites)
    children = dict(zip(SUITES, np.random.SeedSequence(seed).spawn(len(SUITES))))
    checks: list[Check] = []
    for name in names:
        rng = np.random.default_rng(children[name])
        try:
            checks.extend(_RUNNERS[name](rng))
        except ConelabError as err:
            checks.append(Check(name, "suite raised", False, f"{type(err).__name__}: {err}"))
    failed = [c for c in checks if not c.passed]
    return {
        "seed": seed,
        "suites": names,
        "passed": not failed,
        "first_failure": f"{failed[0].suite}: {failed[0].name}" if failed else None,
        "checks": [asdict(c) for c in checks],
    }
