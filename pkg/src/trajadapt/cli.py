"""Command line interface: ``trajadapt {solve,adapt,resolve,bench,check}``.

Exit codes: 0 success, 1 invalid input or usage, 2 runtime failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .adapter import adapt
from .costs import TaskParameters
from .diagnostics import run_self_checks
from .exceptions import SchemaError, TrajAdaptError
from .harness import load_scenario, run_benchmark, solve_prior, write_outputs
from .solver import resolve_warm

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
TRAJECTORY_FORMAT = "trajadapt.trajectory/1"

logger = logging.getLogger("trajadapt")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageError(message)


def trajectory_to_dict(xi, task, scenario, **extra):
    out = {
        "format": TRAJECTORY_FORMAT,
        "robot_model": scenario.model.name,
        "m": int(xi.shape[0]),
        "n": int(xi.shape[1]),
        "xi": np.asarray(xi).tolist(),
        "task": task.to_dict(),
    }
    out.update(extra)
    return out


def read_trajectory(path, scenario):
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise SchemaError(f"trajectory file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}") from None
    if not isinstance(data, dict) or data.get("format") != TRAJECTORY_FORMAT:
        raise SchemaError(f"{path}: not a trajectory file (format must be {TRAJECTORY_FORMAT!r})")
    xi = np.asarray(data.get("xi"), dtype=float)
    if xi.shape != (scenario.m, scenario.model.n):
        raise SchemaError(f"{path}: trajectory shape {xi.shape} does not match scenario ({scenario.m}, {scenario.model.n})")
    if "task" not in data:
        raise SchemaError(f"{path}: missing 'task'")
    return xi, TaskParameters.from_dict(data["task"])


def read_target(path):
    """Target task parameters; either a bare task dict or a trajectory file's ``task``."""
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise SchemaError(f"target file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}") from None
    if isinstance(data, dict) and "task" in data and "kind" not in data:
        data = data["task"]
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: expected a JSON object")
    return TaskParameters.from_dict(data)


def _write_json(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2) + "\n")


def _scenario(args):
    scenario = load_scenario(args.scenario)
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        changes["count"] = args.trials
    return scenario.replace(**changes) if changes else scenario


def _check_target(problem, task):
    if task.kind is not problem.template.kind or task.dim != problem.template.dim:
        raise SchemaError(f"target task ({task.kind.value}, dim {task.dim}) does not match the scenario task")
    if tuple(task.tracked) != tuple(problem.template.tracked):
        raise SchemaError("target task tracks different waypoints than the prior")


def cmd_solve(args):
    scenario = _scenario(args)
    _, task, sol = solve_prior(scenario)
    _write_json(
        args.out,
        trajectory_to_dict(
            sol.xi_star, task, scenario,
            cost=sol.cost, converged=sol.converged, iterations=sol.iterations, wall_time_s=sol.wall_time,
        ),
    )
    print(f"prior: cost {sol.cost:.6g}, {sol.iterations} iterations, converged={sol.converged} -> {args.out}")
    return EXIT_OK if sol.converged else EXIT_RUNTIME


def _load_pair(args):
    scenario = _scenario(args)
    prior_xi, prior_task = read_trajectory(args.prior, scenario)
    target = read_target(args.target)
    problem = scenario.problem(prior_task)
    _check_target(problem, prior_task)
    _check_target(problem, target)
    return scenario, problem, prior_xi, prior_task, target


def cmd_adapt(args):
    scenario, problem, prior_xi, prior_task, target = _load_pair(args)
    xi, report = adapt(problem, prior_xi, prior_task, target, scenario.bounds, scenario.adapt_options)
    out = Path(args.out)
    _write_json(out / "adapted.json", trajectory_to_dict(xi, target, scenario, cost=problem.cost(xi, problem.param_vector(target))))
    _write_json(out / "adapt_report.json", report.to_dict())
    print(f"adapt: {report.termination} after {report.iterations} iterations, |dp| {report.final_dp_norm:.3g} -> {out}")
    if report.warning:
        logger.warning("adaptation stopped early (%s)", report.termination)
    return EXIT_OK


def cmd_resolve(args):
    scenario, problem, prior_xi, _, target = _load_pair(args)
    sol = resolve_warm(problem, prior_xi, target, scenario.bounds, scenario.solver_options)
    out = Path(args.out)
    _write_json(
        out / "resolved.json",
        trajectory_to_dict(
            sol.xi_star, target, scenario,
            cost=sol.cost, converged=sol.converged, iterations=sol.iterations, wall_time_s=sol.wall_time,
        ),
    )
    print(f"resolve: cost {sol.cost:.6g}, {sol.iterations} iterations, converged={sol.converged} -> {out}")
    return EXIT_OK if sol.converged else EXIT_RUNTIME


def cmd_bench(args):
    scenario = _scenario(args)
    result = run_benchmark(scenario)
    csv_path, json_path = write_outputs(result, args.out, inline_timings=args.inline_timings)
    overall = result.summary["overall"]
    ratio = overall["residual_ratio"]
    line = f"bench {scenario.benchmark.value}: {len(result.records)} trials"
    if ratio:
        line += f", median residual ratio {ratio['median']:.3f}"
    line += f", speedup {result.summary['speedup']:.2f}"
    print(f"{line} -> {csv_path}, {json_path}")
    return EXIT_OK


def cmd_check(args):
    results = run_self_checks()
    for r in results:
        print(r)
    return EXIT_OK if all(r.passed for r in results) else EXIT_RUNTIME


def build_parser():
    parser = _Parser(prog="trajadapt", description="Trajectory optimization and argmin-sensitivity adaptation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, out_help):
        p.add_argument("--scenario", required=True, help="scenario JSON file or bundled scenario name")
        p.add_argument("--out", required=True, help=out_help)
        p.add_argument("--verbose", "-v", action="store_true")

    p = sub.add_parser("solve", help="solve the prior trajectory of a scenario")
    common(p, "trajectory JSON to write")
    p.set_defaults(func=cmd_solve)

    for name, func, what in (("adapt", cmd_adapt, "adapt a prior"), ("resolve", cmd_resolve, "warm-started re-solve of a prior")):
        p = sub.add_parser(name, help=f"{what} to target task parameters")
        common(p, "output directory")
        p.add_argument("--prior", required=True, help="trajectory JSON written by 'solve'")
        p.add_argument("--target", required=True, help="task parameter JSON (or a trajectory file carrying one)")
        p.set_defaults(func=func)

    p = sub.add_parser("bench", help="run a benchmark scenario")
    common(p, "output directory for metrics.csv and summary.json")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--trials", type=int, help="override the scenario trial count")
    p.add_argument(
        "--inline-timings",
        action="store_true",
        help="also fill the wall-time columns of metrics.csv (the file is then no longer reproducible)",
    )
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("check", help="run derivative and sensitivity self-checks")
    p.add_argument("--verbose", "-v", action="store_true")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return EXIT_INVALID
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "trials", None) is not None and args.trials < 1:
        print("trajadapt: error: --trials must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    if getattr(args, "seed", None) is not None and args.seed < 0:
        print("trajadapt: error: --seed must be nonnegative", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except (SchemaError, ValueError) as exc:
        print(f"trajadapt: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (TrajAdaptError, ArithmeticError, RuntimeError, OSError) as exc:
        print(f"trajadapt: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
