"""Command-line entry point: synthesize, verify, simulate, convergence.

Exit codes: 0 success, 1 verification or feasibility failure, 2 configuration,
parse or usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import Scenario, load_scenario
from .control import build_controlled_system
from .errors import ConfigurationError, ExpressionSyntaxError, ManifoldControlError
from .sim import monte_carlo
from .verify import PerturbedSystem, residual_report, sample_box

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _num(v: float) -> str:
    return format(float(v), ".17g")


def _clean(obj):
    """JSON-safe copy: numpy to builtins, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def _floats(text: str, flag: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{flag}: expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise UsageError(f"{flag}: no values given")
    return vals


def _scenario(args) -> Scenario:
    sc = load_scenario(args.config)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise UsageError("--seed must be a non-negative 64-bit integer")
        sc = sc.with_seed(args.seed)
    return sc


def _controlled(sc: Scenario):
    return build_controlled_system(sc.spec, sc.plant, sc.x0, sc.t0, sc.ode_tol)


def _emit(text: str, out: str | None, name: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    (path / name).write_text(text)


def cmd_synthesize(args) -> int:
    sc = _scenario(args)
    if args.point:
        vals = _floats(args.point, "--point")
        if len(vals) != sc.spec.n + 1:
            raise UsageError(f"--point needs t and {sc.spec.n} state values, got {len(vals)} numbers")
        t, x = vals[0], tuple(vals[1:])
    else:
        t, x = sc.t0, sc.x0
    gammas = _floats(args.gammas, "--gammas") if args.gammas else list(sc.verify.gamma_grid)
    system = _controlled(sc)
    eff, s, b = system.coefficients(t, x)
    g = system.jump_path(t, x, gammas)
    out = {
        "scenario": sc.name,
        "t": t,
        "x": list(x),
        "u": system.u(t, x),
        "A": system.synthesized.drift(t, x),
        "B": b,
        "G": [{"gamma": gm, "G": row} for gm, row in zip(gammas, g)],
        "s": s,
        "controlled_drift": eff,
    }
    _emit(_dumps(out), args.out, "synthesis.json")
    return EXIT_OK


def cmd_verify(args) -> int:
    sc = _scenario(args)
    vc = sc.verify
    samples = args.samples if args.samples is not None else vc.samples
    try:
        points = sample_box(vc.t_box, vc.x_box, samples, vc.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    system = _controlled(sc)
    if sc.perturb is not None:
        p = sc.perturb
        system = PerturbedSystem(system, p.drift, p.diffusion, p.jump)
    report = residual_report(system, points, vc.gamma_grid)
    out = dict(report.to_dict(include_points=args.points), scenario=sc.name, seed=vc.seed)
    _emit(_dumps(out), args.out, "verify.json")
    bad = report.first_failure()
    if bad is not None:
        names = ", ".join(bad.failures(report.tolerances))
        print(f"verification failed ({names}) at t={bad.t!r}, x={bad.x!r}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _sim_config(sc: Scenario, args, dt: float | None = None):
    cfg = sc.sim
    changes = {}
    if getattr(args, "paths", None) is not None:
        changes["paths"] = args.paths
    if dt is not None:
        changes["dt"] = dt
    try:
        return replace(cfg, **changes) if changes else cfg
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def write_trajectories(path: Path, records, n: int) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path_id", "step", "t", *(f"x{i + 1}" for i in range(n)), "u", "jumps"])
        for rec in records:
            for s in rec.samples:
                w.writerow([rec.path_index, s.step, _num(s.t), *(_num(v) for v in s.x), _num(s.u), s.jumps])


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    cfg = _sim_config(sc, args)
    system = _controlled(sc)
    report, records = monte_carlo(system, cfg, workers=args.workers, keep_paths=True)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_trajectories(out / "trajectories.csv", records, sc.spec.n)
    (out / "report.json").write_text(_dumps(dict(report.to_dict(), scenario=sc.name)))
    print(
        f"{cfg.paths} paths, {len(report.aborted)} aborted, median sup deviation {report.median:.6g}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_convergence(args) -> int:
    sc = _scenario(args)
    dts = _floats(args.dt_list, "--dt-list") if args.dt_list else [4e-3, 1e-3, 2.5e-4]
    system = _controlled(sc)
    rows = []
    for dt in dts:
        report, _ = monte_carlo(system, _sim_config(sc, args, dt), workers=args.workers)
        rows.append([_num(dt), _num(report.median), _num(report.p95), str(len(report.aborted)), str(report.paths)])
    text = "dt,median,p95,aborted,paths\n" + "".join(",".join(r) + "\n" for r in rows)
    _emit(text, args.out, "convergence.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="manifold-control",
        description="Synthesize, verify and simulate jump-diffusions kept on a manifold u(t, x) = const.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="paper-example", help="TOML scenario file or built-in name")
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--out", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", parents=[common], help="print A, B, G and s at a point")
    p.add_argument("--point", help='"t,x1,...,xn" (default: t0, x0)')
    p.add_argument("--gammas", help="comma-separated jump marks for G (default: verify gamma grid)")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("verify", parents=[common], help="check the first-integral residuals on random points")
    p.add_argument("--samples", type=int, help="number of sample points")
    p.add_argument("--points", action="store_true", help="include every point in the JSON")
    p.set_defaults(func=cmd_verify)

    for name, func, helptext in (
        ("simulate", cmd_simulate, "Monte Carlo paths: trajectories.csv and report.json"),
        ("convergence", cmd_convergence, "median sup deviation for several dt"),
    ):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--paths", type=int, help="override the number of paths")
        p.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")
        if name == "convergence":
            p.add_argument("--dt-list", help='comma-separated step sizes, e.g. "4e-3,1e-3,2.5e-4"')
        p.set_defaults(func=func)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigurationError, ExpressionSyntaxError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ManifoldControlError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


def main_entry() -> None:
    sys.exit(main())
