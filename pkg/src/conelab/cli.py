"""Command-line front end.

Exit codes: 0 success, 1 numerical or verification failure, 2 invalid-domain input.
Outputs land in --out (default $CONELAB_OUT or ./out) and the main result is
echoed to stdout.  A key=value file given with --config supplies defaults;
explicit flags override it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .beta_harmonic import beta_basis, synthesize_field
from .cone_spectrum import ConeSpec, spectrum
from .errors import ConelabError, DomainError, NumericalError, PreconditionViolated
from .excess import TestSurface, dichotomy_experiment, excess, three_annulus_trials, trap_distance
from .foliation import Foliation, fit_leaf_asymptotics, solve_profile
from . import verify


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _emit(args, name: str, text: str) -> None:
    write_atomic(Path(args.out) / name, text)
    sys.stdout.write(text)


def _cone(args) -> ConeSpec:
    return ConeSpec(args.p, args.q, args.l)


def _sign(value: str) -> int:
    if value in ("+", "1", "+1", "plus"):
        return 1
    if value in ("-", "-1", "minus"):
        return -1
    raise argparse.ArgumentTypeError(f"sign must be + or -, got {value!r}")


def _beta(value: str):
    try:
        return Fraction(value) if "/" in value or value.lstrip("-").isdigit() else float(value)
    except (ValueError, ZeroDivisionError) as err:
        raise argparse.ArgumentTypeError(str(err)) from None


def _mode(value: str) -> tuple:
    parts = value.split(",")
    if len(parts) not in (3, 4):
        raise argparse.ArgumentTypeError("mode must be j,degree,coeff[,index]")
    j, d, c = int(parts[0]), int(parts[1]), float(parts[2])
    return (j, d, c) if len(parts) == 3 else (j, d, c, int(parts[3]))


# ---------------------------------------------------------------------------
# commands


def cmd_spectrum(args) -> int:
    table = spectrum(_cone(args), args.jmax)
    if args.format == "csv":
        _emit(args, "spectrum.csv", table.to_csv())
    else:
        _emit(args, "spectrum.json", table.to_json() + "\n")
    return 0


def cmd_foliation(args) -> int:
    curve = solve_profile(_cone(args), args.sign, args.s_max)
    tag = "plus" if args.sign > 0 else "minus"
    write_atomic(Path(args.out) / f"leaf_{tag}.csv", curve.to_csv())
    summary = {"cone": curve.cone.label(), "sign": args.sign, "u0": curve.u0, "samples": int(curve.s.size),
               "rho_max": curve.rho_max, "max_residual": curve.max_residual}
    _emit(args, f"leaf_{tag}.json", _dump(summary))
    return 0


def cmd_fit(args) -> int:
    fit = fit_leaf_asymptotics(solve_profile(_cone(args), args.sign, args.s_max))
    _emit(args, "fit.json", _dump(fit.as_dict()))
    return 0


def cmd_beta_basis(args) -> int:
    basis = beta_basis(args.beta, args.l, args.qmax)
    _emit(args, "beta_basis.json", _dump([b.as_dict() for b in basis]))
    return 0


def cmd_excess(args) -> int:
    cone = _cone(args)
    fol = Foliation.compute(cone)
    if args.surface == "cone":
        M = TestSurface.leaf(fol, 0.0, args.R)
    elif args.surface == "leaf":
        M = TestSurface.leaf(fol, args.t, args.R)
    else:
        if not args.mode:
            raise PreconditionViolated("a jacobi surface needs at least one --mode")
        M = TestSurface.jacobi_graph(fol, synthesize_field(cone, args.mode), args.delta, args.R)
    out = {"surface": args.surface, "lambda": args.lam, "R": args.R, "gamma": fol.gamma,
           "trap_distance": trap_distance(M, args.lam, ("ball", args.R)), "excess": excess(M, args.lam, args.R)}
    _emit(args, "excess.json", _dump(out))
    return 0


def cmd_three_annulus(args) -> int:
    res = three_annulus_trials(args.trials, args.seed, args.max_len, keep_records=args.records)
    if args.records:
        write_atomic(Path(args.out) / "three_annulus.jsonl", res.jsonl())
    _emit(args, "three_annulus.json", _dump(res.as_dict()))
    return 0 if res.failures == 0 else 1


def cmd_dichotomy(args) -> int:
    field = synthesize_field(_cone(args), args.mode or [(1, 0, 1.0)])
    R = args.rmin * args.ratio ** np.arange(args.scales)
    rep = dichotomy_experiment(field, R, args.eps)
    write_atomic(Path(args.out) / "dichotomy.csv", rep.to_csv())
    _emit(args, "dichotomy.json", _dump(rep.summary()))
    return 0


def cmd_verify(args) -> int:
    report = verify.run([args.suite], args.seed)
    _emit(args, "verify_report.json", _dump(report))
    if not report["passed"]:
        print(f"verification failed: {report['first_failure']}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser, cone: bool = True) -> None:
    if cone:
        p.add_argument("--p", type=int, default=3, help="dimension of the first sphere factor")
        p.add_argument("--q", type=int, default=3, help="dimension of the second sphere factor")
        p.add_argument("--l", type=int, default=0, help="number of cylindrical directions")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", default=os.environ.get("CONELAB_OUT", "out"), help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="key=value file of defaults; flags take precedence")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="conelab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"conelab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="link spectrum and growth exponents")
    _common(p)
    p.add_argument("--jmax", type=int, default=6)
    p.set_defaults(func=cmd_spectrum)

    for name, func, text in (("foliation", cmd_foliation, "solve a foliation leaf profile"),
                             ("fit", cmd_fit, "fit the leaf asymptotics")):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.add_argument("--sign", type=_sign, default=1)
        p.add_argument("--s-max", type=float, default=1e3)
        p.set_defaults(func=func)

    p = sub.add_parser("beta-basis", help="exact beta-harmonic polynomial basis")
    _common(p, cone=False)
    p.add_argument("--beta", type=_beta, default=Fraction(1))
    p.add_argument("--l", type=int, default=1)
    p.add_argument("--qmax", type=int, default=4)
    p.set_defaults(func=cmd_beta_basis)

    p = sub.add_parser("excess", help="trapping distance and excess of a test surface")
    _common(p)
    p.add_argument("--surface", choices=("cone", "leaf", "jacobi"), default="cone")
    p.add_argument("--t", type=float, default=1.0, help="foliation parameter of a leaf surface")
    p.add_argument("--mode", type=_mode, action="append", help="j,degree,coeff[,index] for a jacobi surface")
    p.add_argument("--delta", type=float, default=1e-2)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--R", type=float, default=10.0)
    p.set_defaults(func=cmd_excess)

    p = sub.add_parser("three-annulus", help="randomized three-annulus implication trials")
    _common(p, cone=False)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--max-len", type=int, default=8)
    p.add_argument("--records", action="store_true", help="also write one JSON line per trial")
    p.set_defaults(func=cmd_three_annulus)

    p = sub.add_parser("dichotomy", help="linear growth/decay dichotomy across scales")
    _common(p)
    p.add_argument("--mode", type=_mode, action="append", help="j,degree,coeff[,index]; default 1,0,1")
    p.add_argument("--rmin", type=float, default=10.0)
    p.add_argument("--ratio", type=float, default=10.0)
    p.add_argument("--scales", type=int, default=6)
    p.add_argument("--eps", type=float, default=1.0)
    p.set_defaults(func=cmd_dichotomy)

    p = sub.add_parser("verify", help="run verification suites")
    _common(p, cone=False)
    p.add_argument("--suite", choices=verify.SUITES + ("all",), default="all")
    p.set_defaults(func=cmd_verify)
    return parser


def read_config(path: str) -> dict[str, str]:
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise PreconditionViolated(f"config line without '=': {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        actions = {a.dest: a for a in sub._actions}
        unknown = sorted(set(cfg) - set(actions))
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        defaults = {}
        for key, value in cfg.items():
            act = actions[key]
            if isinstance(act, argparse._StoreTrueAction):
                defaults[key] = value.lower() in ("1", "true", "yes", "on")
                continue
            conv = act.type or str
            defaults[key] = [conv(value)] if isinstance(act, argparse._AppendAction) else conv(value)
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
    except ConelabError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except DomainError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2
    except NumericalError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
