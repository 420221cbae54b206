"""Command-line entry point: ``hetcap <subcommand> [options]``.

Results go to stdout as JSON.  Failures print ``{"error": ..., "message": ...}``
on stderr and exit with status 2.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Sequence

from . import degiorgi, formulas, homogenize
from .capacity import CENTER_POLICIES, solve_annulus, solve_capacity
from .elliptic import GridProblem, dump_field
from .medium import SCHEDULE_KINDS, Checkerboard, ScaleSchedule, lambda_of
from .profiles import ProfileSpec, build_profile, guard_lambda1, upper_bound_report
from .sweep import RunConfig, _json_default, _number, grid_policy, read_config_file, sweep


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        _fail("UsageError", message)


def _fail(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    raise SystemExit(2)


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _pair(s: str) -> tuple[float, float]:
    parts = [p for p in s.replace(" ", "").split(",") if p]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {s!r}")
    return float(parts[0]), float(parts[1])


def _ints(s: str) -> list[int]:
    return [int(p) for p in s.split(",") if p]


def _num(s: str) -> float:
    try:
        return _number(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}") from None


def _schedule(args) -> ScaleSchedule:
    return ScaleSchedule(args.schedule, args.schedule_param)


def _add_medium(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=4.0)


def _add_schedule(p: argparse.ArgumentParser, default_param: float | None = 0.5) -> None:
    p.add_argument("--schedule", choices=SCHEDULE_KINDS[:-1], default="power")
    p.add_argument("--schedule-param", type=_num, default=default_param)


def cmd_predict(args) -> dict:
    if args.lam is not None:
        lam, estimate, label = args.lam, False, f"lambda={args.lam:g}"
    else:
        sched = _schedule(args)
        lam, estimate, label = lambda_of(sched), sched.lambda_is_estimate, sched.describe()
    limit = formulas.checkerboard_limit(args.alpha, args.beta, lam)
    inputs = formulas.LimitInputs(args.alpha, math.sqrt(args.alpha * args.beta), lam)
    return {
        "alpha": args.alpha,
        "beta": args.beta,
        "schedule": label,
        "lambda": lam,
        "lambda_is_estimate": estimate,
        "harmonic_limit": limit,
        "gl_arithmetic_limit": formulas.gl_arithmetic_limit(inputs),
        "optimal_c": formulas.optimal_boundary_value(args.alpha, args.beta, lam),
    }


def _capacity_setup(args):
    delta = args.delta if args.delta is not None else _schedule(args).delta(args.eps)
    medium = Checkerboard(args.alpha, args.beta, delta, args.tau)
    if args.h is not None:
        h = args.h
        L = round(args.half_width / h) * h
    else:
        g = grid_policy(args.eps, delta, args.half_width, args.points_per_eps)
        h, L = g.h, g.half_width
    return medium, GridProblem(L, h, tuple(args.center), args.eps)


def cmd_capacity(args) -> dict:
    medium, problem = _capacity_setup(args)
    res = solve_capacity(problem, medium, args.center_policy, tol=args.tol, keep_field=bool(args.dump))
    rec = res.to_record()
    rec["scaled"] = abs(math.log(args.eps)) * res.energy
    if args.dump:
        paths = dump_field(res.field, args.dump, eps=args.eps, delta=medium.delta, h=problem.spacing)
        rec["dump"] = [str(p) for p in paths]
    return rec


def cmd_annulus(args) -> dict:
    if args.delta is None:
        med = Checkerboard.constant(args.coef)
    else:
        med = Checkerboard(args.alpha, args.beta, args.delta, args.tau)
    res = solve_annulus(args.R, args.r, args.inner, args.outer, med, args.h, tuple(args.center), tol=args.tol)
    rec = res.to_record()
    if med.is_constant:
        rec["exact"] = formulas.annulus_capacity_exact(args.R, args.r, med.alpha) * (args.inner - args.outer) ** 2
    return rec


def cmd_sweep(args) -> dict:
    values: dict[str, object] = {}
    if args.config:
        values.update(read_config_file(args.config))
    for key in (
        "alpha", "beta", "schedule", "schedule_param", "epsilons", "half_width", "points_per_eps",
        "center_policy", "tol", "deterministic", "output_dir", "workers", "memory_budget_gb",
        "profile", "profile_lambda1", "profile_R0",
    ):
        val = getattr(args, key)
        if val is not None:
            values[key] = val
    config = RunConfig.from_mapping(values)
    result = sweep(config)
    out = result.summary()
    out["records"] = [
        {k: v for k, v in r.__dict__.items() if k != "profile"} for r in result.records
    ]
    out["output_dir"] = str(Path(config.output_dir).resolve())
    return out


def cmd_cell(args) -> dict:
    t = homogenize.cell_problem(args.alpha, args.beta, args.resolution)
    d = t.to_dict()
    d["voigt"] = 0.5 * (args.alpha + args.beta)
    d["reuss"] = 2 * args.alpha * args.beta / (args.alpha + args.beta)
    d["geometric_mean"] = math.sqrt(args.alpha * args.beta)
    return d


def cmd_profile(args) -> dict:
    sched = _schedule(args)
    lam = lambda_of(sched)
    delta = sched.delta(args.eps)
    medium = Checkerboard(args.alpha, args.beta, delta)
    g = grid_policy(args.eps, delta, args.half_width, args.points_per_eps)
    z = tuple(float(v) for v in medium.alpha_cell_center((0.0, 0.0)))
    problem = GridProblem(g.half_width, g.h, z, args.eps)
    cap = solve_capacity(problem, medium, "given", tol=args.tol, keep_field=True)
    l1 = args.lambda1 if args.lambda1 is not None else min(lam - 0.05, guard_lambda1(args.eps, delta))
    spec = ProfileSpec.make(args.eps, medium, lam, z, args.R0, lambda1=l1)
    prof = build_profile(spec, medium, problem, op=cap.operator)
    return upper_bound_report(prof, problem, cap, lam)


def cmd_degiorgi(args) -> dict:
    rows, instances = degiorgi.constant_study(
        args.alpha, args.beta, args.scales, args.N, range(args.seed0, args.seed0 + args.seeds),
        nodes_per_unit=args.nodes_per_unit,
    )
    out = {
        "rows": [r.__dict__ for r in rows],
        "scale_spread": degiorgi.scale_spread(rows),
        "min_ratio": min(i.ratio for i in instances),
        "instances": len(instances),
    }
    if args.csv:
        out["csv"] = str(degiorgi.write_study_csv(rows, args.csv))
    if args.calibrate:
        C = degiorgi.calibrate(rows)
        path = degiorgi.save_calibration(args.alpha, args.beta, C, rows, args.calibration_file)
        out.update({"C_emp": C, "calibration_file": str(path)})
    else:
        try:
            C = degiorgi.load_calibration(args.alpha, args.beta, args.calibration_file)
            out["C_emp"] = C
            out["bounded"] = all(i.ratio <= 1 + C / (i.N - 1) for i in instances)
        except KeyError:
            out["C_emp"] = None
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hetcap", description="Capacity of small discs in a checkerboard medium.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("predict", help="limit values from the closed forms")
    _add_medium(p)
    _add_schedule(p)
    p.add_argument("--lam", type=float, help="scale ratio; overrides the schedule")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("capacity", help="one discrete capacity solve")
    _add_medium(p)
    _add_schedule(p)
    p.add_argument("--eps", type=_num, required=True)
    p.add_argument("--delta", type=_num, help="cell size; defaults to the schedule value")
    p.add_argument("--tau", type=_pair, default=(0.0, 0.0))
    p.add_argument("--h", type=_num)
    p.add_argument("--half-width", type=float, default=1.0)
    p.add_argument("--points-per-eps", type=float, default=3.5)
    p.add_argument("--center", type=_pair, default=(0.0, 0.0))
    p.add_argument("--center-policy", choices=CENTER_POLICIES, default="alpha_cell")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--dump", help="write the minimizer to <path>.bin/.txt")
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("annulus", help="annulus minimum with constant or checkerboard coefficient")
    p.add_argument("--R", type=_num, default=1.0)
    p.add_argument("--r", type=_num, default=0.125)
    p.add_argument("--inner", type=float, default=1.0)
    p.add_argument("--outer", type=float, default=0.0)
    p.add_argument("--coef", type=float, default=1.0, help="constant coefficient when --delta is absent")
    _add_medium(p)
    p.add_argument("--delta", type=_num)
    p.add_argument("--tau", type=_pair, default=(0.0, 0.0))
    p.add_argument("--h", type=_num, default=1 / 512)
    p.add_argument("--center", type=_pair, default=(0.0, 0.0))
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_annulus)

    p = sub.add_parser("sweep", help="epsilon sweep with extrapolation")
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--alpha")
    p.add_argument("--beta")
    p.add_argument("--schedule", choices=SCHEDULE_KINDS[:-1])
    p.add_argument("--schedule-param", dest="schedule_param")
    p.add_argument("--epsilons", help="comma list, e.g. 2^-5,2^-6")
    p.add_argument("--half-width", dest="half_width")
    p.add_argument("--points-per-eps", dest="points_per_eps")
    p.add_argument("--center-policy", dest="center_policy", choices=CENTER_POLICIES)
    p.add_argument("--tol")
    p.add_argument("--deterministic", choices=("true", "false"))
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--workers")
    p.add_argument("--memory-budget-gb", dest="memory_budget_gb")
    p.add_argument("--profile", choices=("true", "false"))
    p.add_argument("--profile-lambda1", dest="profile_lambda1")
    p.add_argument("--profile-R0", dest="profile_R0")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("cell", help="effective tensor of the periodic checkerboard")
    _add_medium(p)
    p.add_argument("--resolution", type=int, default=64)
    p.set_defaults(func=cmd_cell)

    p = sub.add_parser("profile", help="upper-bound profile against the solver minimum")
    _add_medium(p)
    _add_schedule(p, default_param=0.75)
    p.add_argument("--eps", type=_num, default=2.0**-7)
    p.add_argument("--lambda1", type=float)
    p.add_argument("--R0", type=float, default=0.9)
    p.add_argument("--half-width", type=float, default=1.0)
    p.add_argument("--points-per-eps", type=float, default=3.5)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("degiorgi", help="circle-rounding constant study")
    _add_medium(p)
    p.add_argument("--scales", type=_ints, default=[6, 8, 10])
    p.add_argument("--N", type=_ints, default=[2, 3, 4, 5])
    p.add_argument("--seeds", type=int, default=4)
    p.add_argument("--seed0", type=int, default=0)
    p.add_argument("--nodes-per-unit", type=int, default=256)
    p.add_argument("--csv")
    p.add_argument("--calibrate", action="store_true", help="store C_emp from this study")
    p.add_argument("--calibration-file", default=str(degiorgi.CALIBRATION_FILE))
    p.set_defaults(func=cmd_degiorgi)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _emit(args.func(args))
    except SystemExit:
        raise
    except Exception as exc:
        _fail(type(exc).__name__, str(exc))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
