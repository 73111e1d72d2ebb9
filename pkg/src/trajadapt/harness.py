"""Benchmark scenarios, comparison metrics and the benchmark runner.

Three benchmark families are supported:

``final_config``
    boundary-interpolation task; the end configuration is perturbed in joint
    space and the perturbation size is reported as the end-effector
    displacement it causes.
``via_point``
    waypoint-tracking task over the whole end-effector path; the middle
    waypoint target is moved.
``final_position``
    same task; the last waypoint target is moved.
"""

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import jsonschema
import numpy as np

from .adapter import AdaptOptions, adapt
from .costs import CostWeights, TaskKind, TaskParameters, TrajectoryProblem
from .exceptions import BenchmarkError, DimensionError, SchemaError, TrajAdaptError
from .kinematics import fk_along_trajectory, fk_batch, load_robot_model, wrap_angle
from .solver import SolveOptions, resolve_warm, solve
from .trajectory import BoxBounds, finite_difference, interpolate_seed

logger = logging.getLogger(__name__)

CSV_HEADER = (
    "trial_id",
    "magnitude_m",
    "orient_linf_rad",
    "residual_ratio",
    "smooth_diff",
    "t_adapt_s",
    "t_resolve_s",
    "adapt_termination",
)
TIMINGS_HEADER = ("trial_id", "t_adapt_s", "t_resolve_s")
RESOLVE_EXACT = "resolve-exact"
RESOLVE_EXACT_TOL = 1e-12
BIN_EDGES_FRAC = (0.0, 0.05, 0.15, 0.30)
BIN_NAMES = ("small", "medium", "large")
MAX_REDRAWS = 100
BUNDLED_SCENARIOS = ("final_config", "via_point", "final_position", "planar_final_config")

_vector = {"type": "array", "items": {"type": "number"}}
SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["benchmark", "robot_model", "m", "prior", "perturbation"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "benchmark": {"enum": ["final_config", "via_point", "final_position"]},
        "robot_model": {"type": "string"},
        "m": {"type": "integer", "minimum": 4},
        "weights": {"type": "object"},
        "prior": {
            "type": "object",
            "required": ["q_start", "q_end"],
            "additionalProperties": False,
            "properties": {
                "q_start": _vector,
                "q_via": _vector,
                "q_end": _vector,
                "o_d": _vector,
                "orientation_axis_weights": _vector,
                "tracked": {"oneOf": [{"const": "all"}, {"type": "array", "items": {"type": "integer"}}]},
            },
        },
        "perturbation": {
            "type": "object",
            "required": ["range_frac", "count", "seed"],
            "additionalProperties": False,
            "properties": {
                "range_frac": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 2, "maxItems": 2},
                "count": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "solver_options": {"type": "object"},
        "adapt_options": {"type": "object"},
    },
}


class Benchmark(str, Enum):
    FINAL_CONFIG = "final_config"
    VIA_POINT = "via_point"
    FINAL_POSITION = "final_position"


@dataclass(eq=False)
class Scenario:
    benchmark: Benchmark
    model: object
    m: int
    weights: CostWeights
    prior_spec: dict
    range_frac: tuple
    count: int
    seed: int
    solver_options: SolveOptions = field(default_factory=SolveOptions)
    adapt_options: AdaptOptions = field(default_factory=AdaptOptions)
    name: str = ""
    robot_model_path: str = ""

    def __post_init__(self):
        self.benchmark = Benchmark(self.benchmark)
        lo, hi = (float(v) for v in self.range_frac)
        if not (0.0 < lo <= hi):
            raise SchemaError(f"perturbation range must satisfy 0 < lo <= hi, got ({lo}, {hi})")
        self.range_frac = (lo, hi)
        if self.count < 1:
            raise SchemaError("perturbation count must be at least 1")

    @property
    def magnitude_range(self):
        """Perturbation magnitude range in meters."""
        return self.range_frac[0] * self.model.reach, self.range_frac[1] * self.model.reach

    @property
    def bounds(self):
        return BoxBounds.from_model(self.model, self.m)

    def replace(self, **changes):
        data = {k: getattr(self, k) for k in self.__dataclass_fields__}
        data.update(changes)
        return Scenario(**data)

    # -- prior task -----------------------------------------------------------
    def _q(self, key):
        q = np.asarray(self.prior_spec[key], dtype=float)
        if q.shape != (self.model.n,):
            raise SchemaError(f"prior.{key} must have {self.model.n} entries")
        if not self.model.within_limits(q):
            raise SchemaError(f"prior.{key} violates the joint limits")
        return q

    def seed_trajectory(self):
        """Piecewise-linear joint path through start, optional via and end configurations."""
        qs, qe = self._q("q_start"), self._q("q_end")
        if "q_via" not in self.prior_spec:
            return interpolate_seed(qs, qe, self.m)
        qv = self._q("q_via")
        mid = self.m // 2
        first = np.linspace(0.0, 1.0, mid + 1)[:, None]
        second = np.linspace(0.0, 1.0, self.m - mid)[:, None]
        xi = np.concatenate([(1 - first[:-1]) * qs + first[:-1] * qv, (1 - second) * qv + second * qe])
        xi[0], xi[mid], xi[-1] = qs, qv, qe
        return xi

    def prior_task(self):
        spec = self.prior_spec
        qs, qe = self._q("q_start"), self._q("q_end")
        if "o_d" in spec:
            o_d = np.asarray(spec["o_d"], dtype=float)
        else:
            o_d = fk_batch(self.model, qs)[1]
        axis_w = spec.get("orientation_axis_weights", (1.0, 1.0, 0.0))
        if self.benchmark is Benchmark.FINAL_CONFIG:
            return TaskParameters.boundary(qs, qe, o_d, axis_w)
        tracked = spec.get("tracked", "all")
        tracked = list(range(self.m)) if tracked == "all" else [int(t) for t in tracked]
        if any(t < 0 or t >= self.m for t in tracked):
            raise SchemaError(f"prior.tracked indices must lie in [0, {self.m})")
        if self.perturbed_waypoint not in tracked:
            raise SchemaError(f"{self.benchmark.value} perturbs waypoint {self.perturbed_waypoint}, which is not tracked")
        pos = fk_batch(self.model, self.seed_trajectory()[tracked])[0]
        return TaskParameters.waypoints(tracked, pos, o_d, axis_w)

    @property
    def perturbed_waypoint(self):
        if self.benchmark is Benchmark.VIA_POINT:
            return self.m // 2
        return self.m - 1

    def problem(self, task=None):
        return TrajectoryProblem(self.model, self.weights, task or self.prior_task(), self.m)


def _resolve_model_path(ref, base_dir):
    if ref in ("planar3", "panda"):
        return ref
    p = Path(ref)
    if not p.is_absolute() and base_dir is not None:
        p = Path(base_dir) / p
    return str(p)


def scenario_from_dict(data, base_dir=None):
    try:
        jsonschema.validate(data, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"scenario field '{where}': {exc.message}") from None
    model_ref = _resolve_model_path(data["robot_model"], base_dir)
    pert = data["perturbation"]
    try:
        return Scenario(
            benchmark=data["benchmark"],
            model=load_robot_model(model_ref),
            m=data["m"],
            weights=CostWeights.from_dict(data.get("weights")),
            prior_spec=dict(data["prior"]),
            range_frac=tuple(pert["range_frac"]),
            count=pert["count"],
            seed=pert["seed"],
            solver_options=SolveOptions.from_dict(data.get("solver_options")),
            adapt_options=AdaptOptions.from_dict(data.get("adapt_options")),
            name=data.get("name", ""),
            robot_model_path=data["robot_model"],
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"scenario: {exc}") from None


def load_scenario(path):
    """Load a scenario JSON file, or a bundled scenario by name."""
    if isinstance(path, str) and path in BUNDLED_SCENARIOS:
        text = resources.files("trajadapt").joinpath(f"data/scenarios/{path}.json").read_text()
        base_dir, source = None, path
    else:
        p = Path(path)
        if not p.is_file():
            raise SchemaError(f"scenario file not found: {p}")
        text, base_dir, source = p.read_text(), p.parent, str(p)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{source}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return scenario_from_dict(data, base_dir)


# ---------------------------------------------------------------------------
# perturbations


class Perturbation(NamedTuple):
    task: TaskParameters
    magnitude: float


def _unit(rng, dim):
    while True:
        u = rng.standard_normal(dim)
        norm = np.linalg.norm(u)
        if norm > 1e-12:
            return u / norm


def _joint_step_for_displacement(model, q, u, target, tol=1e-12):
    """Smallest ``s > 0`` with ``|x(q + s u) - x(q)| = target`` (bisection), or None past the limits."""
    x0 = fk_batch(model, q)[0]

    def disp(s):
        return np.linalg.norm(fk_batch(model, q + s * u)[0] - x0)

    lo, hi = 0.0, 0.05
    while disp(hi) < target:
        lo, hi = hi, hi * 2.0
        if hi > 2.0 * np.pi or not model.within_limits(q + hi * u):
            return None
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if disp(mid) < target:
            lo = mid
        else:
            hi = mid
    s = 0.5 * (lo + hi)
    return s if model.within_limits(q + s * u) else None


def generate_perturbations(scenario, rng, prior_task=None):
    """Draw ``scenario.count`` perturbed tasks with magnitudes uniform in the scenario range.

    Directions are uniform on the unit sphere (joint space for
    ``final_config``, Cartesian otherwise).  Draws that leave the joint limits
    or the reachable workspace are redrawn.
    """
    prior_task = prior_task or scenario.prior_task()
    model = scenario.model
    lo, hi = scenario.magnitude_range
    base = model.base_transform[:3, 3]
    max_dist = model.reach + abs(model.joints[0].d)
    out = []
    for _ in range(scenario.count):
        for attempt in range(MAX_REDRAWS):
            r = rng.uniform(lo, hi)
            if scenario.benchmark is Benchmark.FINAL_CONFIG:
                u = _unit(rng, model.n)
                s = _joint_step_for_displacement(model, prior_task.q_end, u, r)
                if s is None:
                    continue
                q_new = prior_task.q_end + s * u
                mag = float(np.linalg.norm(fk_batch(model, q_new)[0] - fk_batch(model, prior_task.q_end)[0]))
                task = TaskParameters.boundary(prior_task.q_start, q_new, prior_task.o_d, prior_task.orientation_axis_weights)
            else:
                u = _unit(rng, 3)
                j = prior_task.tracked.index(scenario.perturbed_waypoint)
                targets = prior_task.targets.copy()
                targets[j] = targets[j] + r * u
                if np.linalg.norm(targets[j] - base) > max_dist:
                    continue
                mag = float(r)
                task = TaskParameters.waypoints(prior_task.tracked, targets, prior_task.o_d, prior_task.orientation_axis_weights)
            out.append(Perturbation(task, mag))
            break
        else:
            raise BenchmarkError(f"could not draw a feasible perturbation in {MAX_REDRAWS} attempts")
    return out


# ---------------------------------------------------------------------------
# metrics


def orientation_metric(poses_adapt, poses_resolve):
    """Largest wrapped roll/pitch difference between two pose lists (yaw is ignored)."""
    if len(poses_adapt) != len(poses_resolve):
        raise DimensionError(f"pose lists differ in length: {len(poses_adapt)} vs {len(poses_resolve)}")
    if not poses_adapt:
        return 0.0
    a = np.array([p.orientation[:2] for p in poses_adapt])
    b = np.array([p.orientation[:2] for p in poses_resolve])
    return float(np.max(np.abs(wrap_angle(a - b))))


def task_residual(xi, task, model):
    """L-infinity task error in meters.

    Boundary tasks compare the end-effector positions of the first/last
    waypoints with those of the commanded configurations; tracking tasks
    use the end-effector distance to each target.
    """
    xi = np.asarray(xi, dtype=float)
    if task.kind is TaskKind.BOUNDARY_CONFIGS:
        got = fk_batch(model, np.stack([xi[0], xi[-1]]))[0]
        want = fk_batch(model, np.stack([task.q_start, task.q_end]))[0]
    else:
        if not task.tracked:
            return 0.0
        got = fk_batch(model, xi[list(task.tracked)])[0]
        want = task.targets
    return float(np.max(np.linalg.norm(got - want, axis=-1)))


class ResidualRatio(NamedTuple):
    ratio: float  # None when the re-solve residual vanishes
    adapt_residual: float
    resolve_residual: float

    @property
    def resolve_exact(self):
        return self.ratio is None

    def __str__(self):
        return RESOLVE_EXACT if self.ratio is None else repr(self.ratio)


def residual_ratio_from(adapt_residual, resolve_residual):
    if resolve_residual < RESOLVE_EXACT_TOL:
        return ResidualRatio(None, float(adapt_residual), float(resolve_residual))
    return ResidualRatio(float(adapt_residual / resolve_residual), float(adapt_residual), float(resolve_residual))


def task_residual_ratio(xi_adapt, xi_resolve, p_target, model):
    return residual_ratio_from(task_residual(xi_adapt, p_target, model), task_residual(xi_resolve, p_target, model))


def smoothness_metric(xi_adapt, xi_resolve):
    """Absolute difference of the first-order (velocity) smoothness sums."""
    a = np.asarray(xi_adapt, dtype=float)
    b = np.asarray(xi_resolve, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"trajectory shapes differ: {a.shape} vs {b.shape}")
    return float(abs(np.sum(finite_difference(a, 1) ** 2) - np.sum(finite_difference(b, 1) ** 2)))


# ---------------------------------------------------------------------------
# records


@dataclass
class MetricsRecord:
    trial_id: int
    perturbation_magnitude: float
    orient_linf: float
    residual_ratio: ResidualRatio
    smooth_diff: float
    t_adapt: float
    t_resolve: float
    adapt_terminated: str
    adapt_feasible: bool = True
    resolve_feasible: bool = True
    eq10_violations: int = 0

    def csv_row(self, timings=True):
        def num(x):
            return repr(float(x))

        return [
            str(self.trial_id),
            num(self.perturbation_magnitude),
            num(self.orient_linf),
            str(self.residual_ratio),
            num(self.smooth_diff),
            num(self.t_adapt) if timings else "",
            num(self.t_resolve) if timings else "",
            self.adapt_terminated,
        ]

    @classmethod
    def from_csv_row(cls, row):
        if len(row) != len(CSV_HEADER):
            raise SchemaError(f"metrics row has {len(row)} fields, expected {len(CSV_HEADER)}")
        ratio = None if row[3] == RESOLVE_EXACT else float(row[3])
        return cls(
            trial_id=int(row[0]),
            perturbation_magnitude=float(row[1]),
            orient_linf=float(row[2]),
            residual_ratio=ResidualRatio(ratio, math.nan, math.nan),
            smooth_diff=float(row[4]),
            t_adapt=float(row[5]) if row[5] else None,
            t_resolve=float(row[6]) if row[6] else None,
            adapt_terminated=row[7],
        )


def write_metrics_csv(records, path, timings=True):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for rec in sorted(records, key=lambda r: r.trial_id):
        w.writerow(rec.csv_row(timings))
    Path(path).write_text(buf.getvalue())


def read_metrics_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise SchemaError(f"{path}: unexpected metrics header")
    return [MetricsRecord.from_csv_row(r) for r in rows[1:]]


def _quartiles(values):
    values = [v for v in values if v is not None and np.isfinite(v)]
    if not values:
        return None
    q1, med, q3 = np.percentile(values, [25, 50, 75])
    return {"q1": float(q1), "median": float(med), "q3": float(q3), "n": len(values)}


def magnitude_bin(magnitude, reach):
    frac = magnitude / reach
    for name, lo, hi in zip(BIN_NAMES, BIN_EDGES_FRAC[:-1], BIN_EDGES_FRAC[1:]):
        if lo < frac <= hi + 1e-12:
            return name
    return "beyond" if frac > BIN_EDGES_FRAC[-1] else "zero"


def summarize(records, scenario, failures=()):
    reach = scenario.model.reach
    groups = {}
    for rec in records:
        groups.setdefault(magnitude_bin(rec.perturbation_magnitude, reach), []).append(rec)

    def stats(recs):
        ratios = [r.residual_ratio.ratio for r in recs]
        finite = [x for x in ratios if x is not None]
        out = {
            "count": len(recs),
            "orient_linf_rad": _quartiles([r.orient_linf for r in recs]),
            "residual_ratio": _quartiles(finite),
            "smooth_diff": _quartiles([r.smooth_diff for r in recs]),
            "frac_orient_below_0.1": float(np.mean([r.orient_linf <= 0.1 for r in recs])) if recs else None,
            "frac_ratio_below_1.2": float(np.mean([x is None or x <= 1.2 for x in ratios])) if recs else None,
            "resolve_exact_count": sum(x is None for x in ratios),
        }
        t_a = [r.t_adapt for r in recs]
        t_r = [r.t_resolve for r in recs]
        out["t_adapt_s"] = _quartiles(t_a)
        out["t_resolve_s"] = _quartiles(t_r)
        out["speedup"] = float(np.median(t_r) / np.median(t_a)) if recs else None
        return out

    summary = {
        "scenario": scenario.name,
        "benchmark": scenario.benchmark.value,
        "robot_model": scenario.model.name,
        "n": scenario.model.n,
        "m": scenario.m,
        "seed": scenario.seed,
        "trials": len(records) + len(failures),
        "failures": list(failures),
        "reach_m": reach,
        "bin_edges_m": [f * reach for f in BIN_EDGES_FRAC],
        "bins": {name: stats(recs) for name, recs in sorted(groups.items())},
        "overall": stats(records),
        "feasible_adapt": all(r.adapt_feasible for r in records),
        "feasible_resolve": all(r.resolve_feasible for r in records),
        "eq10_violations": sum(r.eq10_violations for r in records),
        "termination_counts": {},
    }
    for r in records:
        summary["termination_counts"][r.adapt_terminated] = summary["termination_counts"].get(r.adapt_terminated, 0) + 1
    summary["termination_counts"] = dict(sorted(summary["termination_counts"].items()))
    summary["speedup"] = summary["overall"]["speedup"]
    return summary


# ---------------------------------------------------------------------------
# runner


@dataclass
class BenchmarkResult:
    records: list
    summary: dict
    prior: object
    trajectories: dict = field(default_factory=dict, repr=False)


def solve_prior(scenario, task=None):
    task = task or scenario.prior_task()
    problem = scenario.problem(task)
    sol = solve(problem, task, scenario.seed_trajectory(), scenario.bounds, scenario.solver_options)
    if not sol.converged:
        logger.warning("prior solve stopped without converging: %s", sol.message)
    return problem, task, sol


def run_trial(problem, prior, prior_task, pert, scenario, trial_id):
    bounds = scenario.bounds
    model = scenario.model
    xi_a, report = adapt(problem, prior, prior_task, pert.task, bounds, scenario.adapt_options)
    res = resolve_warm(problem, prior, pert.task, bounds, scenario.solver_options)
    xi_r = res.xi_star
    rec = MetricsRecord(
        trial_id=trial_id,
        perturbation_magnitude=pert.magnitude,
        orient_linf=orientation_metric(fk_along_trajectory(model, xi_a), fk_along_trajectory(model, xi_r)),
        residual_ratio=task_residual_ratio(xi_a, xi_r, pert.task, model),
        smooth_diff=smoothness_metric(xi_a, xi_r),
        t_adapt=report.wall_time,
        t_resolve=res.wall_time,
        adapt_terminated=report.termination,
        adapt_feasible=bounds.contains(xi_a),
        resolve_feasible=bounds.contains(xi_r),
        eq10_violations=report.eq10_violations,
    )
    return rec, xi_a, xi_r, report


def run_benchmark(scenario, keep_trajectories=False):
    """Solve the prior once, then adapt and re-solve for every drawn perturbation."""
    rng = np.random.default_rng(scenario.seed)
    problem, prior_task, prior = solve_prior(scenario)
    perts = generate_perturbations(scenario, rng, prior_task)
    records, failures, trajs = [], [], {}
    for i, pert in enumerate(perts):
        try:
            rec, xi_a, xi_r, report = run_trial(problem, prior, prior_task, pert, scenario, i)
        except (TrajAdaptError, ArithmeticError, AssertionError) as exc:
            logger.warning("trial %d failed: %s", i, exc)
            failures.append({"trial_id": i, "error": f"{type(exc).__name__}: {exc}"})
            continue
        records.append(rec)
        if keep_trajectories:
            trajs[i] = {"adapt": xi_a, "resolve": xi_r, "task": pert.task, "report": report}
        logger.info(
            "trial %d: |dp|=%.3f m orient=%.4f ratio=%s smooth=%.2e t_adapt=%.4f t_resolve=%.4f (%s)",
            i, rec.perturbation_magnitude, rec.orient_linf, rec.residual_ratio, rec.smooth_diff,
            rec.t_adapt, rec.t_resolve, rec.adapt_terminated,
        )
    if len(failures) * 2 > len(perts):
        raise BenchmarkError(f"{len(failures)} of {len(perts)} trials failed")
    records.sort(key=lambda r: r.trial_id)
    summary = summarize(records, scenario, failures)
    return BenchmarkResult(records, summary, prior, trajs)


def write_timings_csv(records, path):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TIMINGS_HEADER)
    for rec in sorted(records, key=lambda r: r.trial_id):
        w.writerow([str(rec.trial_id), repr(float(rec.t_adapt)), repr(float(rec.t_resolve))])
    Path(path).write_text(buf.getvalue())


def write_outputs(result, out_dir, inline_timings=False):
    """Write ``metrics.csv``, ``timings.csv`` and ``summary.json`` into ``out_dir``.

    By default the wall-time cells of ``metrics.csv`` are left empty so that
    reruns with the same seed give byte-identical files; the times themselves
    go to ``timings.csv`` and the summary.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(result.records, out / "metrics.csv", timings=inline_timings)
    write_timings_csv(result.records, out / "timings.csv")
    (out / "summary.json").write_text(json.dumps(result.summary, indent=2, sort_keys=True) + "\n")
    return out / "metrics.csv", out / "summary.json"
