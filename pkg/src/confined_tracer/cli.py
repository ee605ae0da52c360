"""Command line front end: ``confined-tracer <command> [options]``.

Exit codes: 0 success, 1 a reported check failed, 2 invalid usage.
``CONFINED_TRACER_SEED`` and ``CONFINED_TRACER_OUT`` override the default
seed and output directory.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cgf import DomainError, cgf, classify, solve_cgf, write_cgf_csv
from .io import RunManifest, write_csv
from .model import WallParams, j_star
from .sim import DEFAULT_SEED, SimConfig, run_ensemble, simulate

ENV_SEED = "CONFINED_TRACER_SEED"
ENV_OUT = "CONFINED_TRACER_OUT"


def _default_seed() -> int:
    return int(os.environ.get(ENV_SEED, DEFAULT_SEED))


def _default_out() -> str:
    return os.environ.get(ENV_OUT, "out")


def _add_walls(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("wall parameters (either inverse temperatures or mean temperature and gap)")
    g.add_argument("--beta-left", type=float, help="inverse temperature of the left wall (default 0.5)")
    g.add_argument("--beta-right", type=float, help="inverse temperature of the right wall (default 1.0)")
    g.add_argument("--temp-mean", type=float, help="mean temperature T")
    g.add_argument("--temp-gap", type=float, help="temperature difference T_left - T_right")


def _walls(args: argparse.Namespace, parser: argparse.ArgumentParser) -> WallParams:
    betas = (args.beta_left, args.beta_right)
    temps = (args.temp_mean, args.temp_gap)
    if any(v is not None for v in betas) and any(v is not None for v in temps):
        parser.error("give either --beta-left/--beta-right or --temp-mean/--temp-gap, not both")
    try:
        if any(v is not None for v in temps):
            if args.temp_mean is None:
                parser.error("--temp-gap needs --temp-mean")
            gap = args.temp_gap or 0.0
            return WallParams.from_temperatures(args.temp_mean + gap / 2.0, args.temp_mean - gap / 2.0)
        bl = 0.5 if args.beta_left is None else args.beta_left
        br = 1.0 if args.beta_right is None else args.beta_right
        return WallParams(bl, br)
    except ValueError as exc:
        parser.error(str(exc))
    raise AssertionError  # pragma: no cover


def _add_common(p: argparse.ArgumentParser, seed: bool = False) -> None:
    p.add_argument("--out", default=_default_out(), help=f"output directory (env {ENV_OUT}, default 'out')")
    if seed:
        p.add_argument("--seed", type=int, default=_default_seed(),
                       help=f"base seed (env {ENV_SEED}, default {DEFAULT_SEED})")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                       help="worker processes; results do not depend on it (default: all cores)")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _manifest(name: str, args: argparse.Namespace, params: WallParams | None) -> RunManifest:
    pars = {k: v for k, v in vars(args).items() if k not in ("func", "parser") and not k.startswith("_")}
    if params is not None:
        pars["beta_left_resolved"] = params.beta_left
        pars["beta_right_resolved"] = params.beta_right
    return RunManifest(name, pars, getattr(args, "seed", None), __version__)


def cmd_simulate(args: argparse.Namespace) -> int:
    params = _walls(args, args.parser)
    if not args.t > 0.0 or not math.isfinite(args.t):
        args.parser.error("--t must be a positive number")
    if args.replicas < 1:
        args.parser.error("--replicas must be >= 1")
    out = Path(args.out)
    man = _manifest("simulate", args, params)
    cfg = SimConfig(params, args.t, args.seed)
    ens = run_ensemble(cfg, args.replicas, args.threads)
    meta = {"beta_left": params.beta_left, "beta_right": params.beta_right, "seed": args.seed}
    path = out / "simulate_ensemble.csv"
    ens.to_csv(path, meta=meta)
    man.add(path)
    if args.log:
        _, log = simulate(cfg, log_limit=args.log)
        lp = out / "simulate_collisions.csv"
        log.to_csv(lp)
        man.add(lp)
    man.write(out)
    half = 1.96 * ens.stderr_current
    print(f"replicas={ens.replicas} t={args.t:g}")
    print(f"mean J/t = {ens.mean_current:.6f} +- {ens.stderr_current:.2e} "
          f"(95% CI [{ens.mean_current - half:.6f}, {ens.mean_current + half:.6f}])")
    print(f"analytic j* = {j_star(params):.6f}")
    print(f"Var(J)/t = {ens.variance_rate:.6f}   mean N_t/t = {ens.mean_collision_rate:.6f}")
    return 0


def _check_grid(parser, lo: float, hi: float, points: int) -> np.ndarray:
    if points < 2 or not lo < hi:
        parser.error("need min < max and at least 2 points")
    return np.linspace(lo, hi, points)


def cmd_cgf(args: argparse.Namespace) -> int:
    params = _walls(args, args.parser)
    lams = _check_grid(args.parser, args.lambda_min, args.lambda_max, args.points)
    if any(classify(float(l), params) == "infinite" for l in lams):
        args.parser.error(f"lambda grid must lie inside ({-params.beta_right:g}, {params.beta_left:g})")
    try:
        sols = [solve_cgf(float(l), params) for l in lams]
    except DomainError as exc:
        args.parser.error(str(exc))
    out = Path(args.out)
    man = _manifest("cgf", args, params)
    path = out / "cgf_curve.csv"
    write_cgf_csv(path, sols, params)
    man.add(path)
    man.write(out)

    d = params.beta_left - params.beta_right
    f = {float(s.lam): s.eta0 for s in sols}
    sym = 0.0
    for l in lams:
        mirror = d - float(l)
        if classify(mirror, params) != "infinite" and abs(mirror + params.beta_right) > 1e-6 and abs(params.beta_left - mirror) > 1e-6:
            sym = max(sym, abs(f[float(l)] - cgf(mirror, params)))
    conv = 0.0
    for i in range(len(lams)):
        for k in range(i + 2, len(lams)):
            mid = cgf(0.5 * (lams[i] + lams[k]), params)
            conv = max(conv, mid - 0.5 * (f[float(lams[i])] + f[float(lams[k])]))
    ok_sym, ok_conv = sym <= 1e-8, conv <= 1e-8
    print(f"points={len(lams)}  flat={sum(s.region == 'flat' for s in sols)}")
    print(f"symmetry residual max|f(l) - f({d:g} - l)| = {sym:.3e}  {'ok' if ok_sym else 'FAIL'}")
    print(f"convexity excess max = {conv:.3e}  {'ok' if ok_conv else 'FAIL'}")
    return 0 if ok_sym and ok_conv else 1


def cmd_rate(args: argparse.Namespace) -> int:
    from .rate import gc_symmetry_check, rate_curve

    params = _walls(args, args.parser)
    js = _check_grid(args.parser, args.j_min, args.j_max, args.points)
    curve = rate_curve(js, params)
    out = Path(args.out)
    man = _manifest("rate", args, params)
    path = out / "rate_curve.csv"
    curve.to_csv(path)
    man.add(path)
    man.write(out)
    print(f"points={len(js)}  j*={j_star(params):.6f}  min I={curve.value.min():.3e}")
    if np.allclose(js, -js[::-1], rtol=0.0, atol=1e-12):
        rep = gc_symmetry_check(curve)
        print(f"symmetry residual = {rep.max_residual:.3e}  {'ok' if rep.passed else 'FAIL'}")
        return 0 if rep.passed else 1
    print("grid not symmetric about 0; symmetry check skipped")
    return 0


def cmd_scaling(args: argparse.Namespace) -> int:
    from .rate import scaling_convergence

    eps = args.epsilons
    if len(eps) < 1 or any(b >= a for a, b in zip(eps, eps[1:])):
        args.parser.error("--epsilons must be strictly decreasing")
    grid = _check_grid(args.parser, -args.span, args.span, args.points)
    try:
        reports = [scaling_convergence(grid, args.tau, args.temp, eps, kind, args.tolerance) for kind in ("H", "G")]
    except ValueError as exc:
        args.parser.error(str(exc))
    out = Path(args.out)
    man = _manifest("scaling", args, None)
    rows = [(r.kind, e, g) for r in reports for e, g in zip(r.epsilons, r.gaps)]
    path = write_csv(out / "scaling_convergence.csv", "scaling", ["kind", "epsilon", "gap"], rows,
                     meta={"tau": args.tau, "T": args.temp, "tolerance": args.tolerance})
    man.add(path)
    man.write(out)
    for r in reports:
        gaps = "  ".join(f"eps={e:g}: {g:.3e}" for e, g in zip(r.epsilons, r.gaps))
        print(f"{r.kind}: {gaps}  monotone={r.monotone}  {'ok' if r.passed else 'FAIL'}")
    return 0 if all(r.passed for r in reports) else 1


def cmd_tilt(args: argparse.Namespace) -> int:
    from .tilt import lower_bound_certificate

    params = _walls(args, args.parser)
    target = args.target_j if args.target_j is not None else 0.5 * j_star(params)
    try:
        cert = lower_bound_certificate(target, params, args.epsilons, args.etas, args.t, args.replicas,
                                       args.seed, args.threads, args.direction)
    except ValueError as exc:
        args.parser.error(str(exc))
    out = Path(args.out)
    man = _manifest("tilt", args, params)
    path = out / "tilt_certificate.csv"
    cert.to_csv(path)
    man.add(path)
    man.write(out)
    print(f"target j = {target:.6f} ({cert.direction}), I(target) = {cert.I_target:.6f}")
    for r in cert.rows:
        print(f"  eps={r.epsilon:<6g} eta={r.eta:<5g} mean J/t={r.mean_j:.5f} +- {r.stderr_j:.1e}  "
              f"entropy rate={r.entropy_rate:.5f}  {'ok' if r.passed else '--'}")
    print(f"entropy rate at ladder end {cert.entropy_at_ladder_end:.5f}, limit {cert.entropy_limit:.5f}")
    status = "inconclusive" if cert.inconclusive else ("ok" if cert.passed else "FAIL")
    print(f"certificate: {status}")
    return 0 if cert.passed else 1


def cmd_figures(args: argparse.Namespace) -> int:
    from .figures import write_figures

    if args.points < 3 or not args.span > 0.0:
        args.parser.error("need --points >= 3 and --span > 0")
    out = Path(args.out)
    man = _manifest("figures", args, None)
    for path in write_figures(out, args.points, args.span):
        man.add(path)
    man.write(out)
    print(f"wrote {', '.join(os.path.basename(p) for p in man.outputs)} to {out}")
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    from .acceptance import Suite

    suite = Suite(quick=args.quick, seed=args.seed, workers=args.threads, tolerance_scale=args.tolerance_scale)
    results = []
    for check in suite.checks():
        res = check()
        results.append(res)
        print(("   " if res.passed else ">> ") + res.line(), flush=True)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} passed" + (f"; failing: {failed}" if failed else ""))
    return 0 if not failed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="confined-tracer", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo ensemble of the current")
    _add_walls(p)
    p.add_argument("--t", type=float, required=True, help="time horizon")
    p.add_argument("--replicas", type=int, default=200)
    p.add_argument("--log", type=int, default=0, help="also write the last N collisions of replica 0")
    _add_common(p, seed=True)
    p.set_defaults(func=cmd_simulate, parser=p)

    p = sub.add_parser("cgf", help="scaled cumulant generating function on a lambda grid")
    _add_walls(p)
    p.add_argument("--lambda-min", type=float, required=True)
    p.add_argument("--lambda-max", type=float, required=True)
    p.add_argument("--points", type=int, default=41)
    _add_common(p)
    p.set_defaults(func=cmd_cgf, parser=p)

    p = sub.add_parser("rate", help="rate function on a current grid")
    _add_walls(p)
    p.add_argument("--j-min", type=float, required=True)
    p.add_argument("--j-max", type=float, required=True)
    p.add_argument("--points", type=int, default=41)
    _add_common(p)
    p.set_defaults(func=cmd_rate, parser=p)

    p = sub.add_parser("scaling", help="convergence to the small-gradient limits")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--temp", type=float, default=1.0, help="mean temperature T")
    p.add_argument("--epsilons", type=_float_list, default=[0.1, 0.05, 0.025])
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--span", type=float, default=2.0, help="grids cover [-span, span]")
    p.add_argument("--tolerance", type=float, default=5e-3)
    _add_common(p)
    p.set_defaults(func=cmd_scaling, parser=p)

    p = sub.add_parser("tilt", help="tilted-dynamics certificate for a target current")
    _add_walls(p)
    p.add_argument("--target-j", type=float, help="target current (default j*/2)")
    p.add_argument("--direction", choices=["forward", "reversed"])
    p.add_argument("--epsilons", type=_float_list, default=[0.1, 0.03, 0.01])
    p.add_argument("--etas", type=_float_list, default=[0.3, 0.1, 0.03])
    p.add_argument("--t", type=float, default=1e5)
    p.add_argument("--replicas", type=int, default=200)
    _add_common(p, seed=True)
    p.set_defaults(func=cmd_tilt, parser=p)

    p = sub.add_parser("figures", help="data and gnuplot script for the G and H limit curves")
    p.add_argument("--points", type=int, default=401)
    p.add_argument("--span", type=float, default=3.0)
    _add_common(p)
    p.set_defaults(func=cmd_figures, parser=p)

    p = sub.add_parser("verify", help="run the acceptance checks")
    p.add_argument("--quick", action="store_true", help="10x fewer replicas, tolerances widened by sqrt(10)")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--tolerance-scale", type=float, default=1.0, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify, parser=p)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
