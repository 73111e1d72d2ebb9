"""Acceptance criteria, one test each.

Every test prints a single ``[PASS]`` / ``[FAIL]`` line (also visible without
``-s``) before asserting.  Run on its own with::

    python3 -m pytest tests/test_acceptance.py -v
"""

import filecmp
import time

import numpy as np
import pytest

import oracles
from conftest import planar_boundary, random_config
from trajadapt import cli
from trajadapt.adapter import AdaptOptions, adapt, argmin_jacobian
from trajadapt.costs import CostWeights, QuadraticProblem, TaskParameters, TrajectoryProblem
from trajadapt.diagnostics import fd_sensitivity
from trajadapt.harness import load_scenario, magnitude_bin, run_benchmark
from trajadapt.kinematics import load_robot_model
from trajadapt.trajectory import BoxBounds

# tolerances
SENS_REL_TOL = 5e-2
SENS_FD_STEP = 1e-4
SENS_RESOLVE_TOL = 1e-10
SENS_RUNTIME_S = 60.0
GRAD_REL_TOL = 1e-5
MIXED_REL_TOL = 1e-4
SYM_REL_TOL = 1e-9
DERIV_INSTANCES = 50
FIXED_POINT_TOL = 1e-12
QUAD_TOL = 1e-10
ORIENT_TOL_RAD = 0.1
ORIENT_MIN_FRACTION = 0.80
ORIENT_RUNTIME_S = 15 * 60.0
RATIO_THRESHOLD = 1.2
RATIO_MIN_FRACTION = 0.70
RATIO_MEDIAN_RANGE = (0.9, 1.3)
MIN_SPEEDUP = 10.0
PANDA_M = 20
FAMILIES = ("final_config", "via_point", "final_position")


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number} {title}: {detail}")
        assert ok, detail

    return emit


@pytest.fixture(scope="module")
def benchmarks():
    out = {}
    for name in FAMILIES:
        s = load_scenario(name)
        assert s.model.n == 7 and s.m == PANDA_M and s.count == 30
        t0 = time.perf_counter()
        res = run_benchmark(s, keep_trajectories=True)
        out[name] = (s, res, time.perf_counter() - t0)
    return out


def test_c1_sensitivity_oracle(verdict, planar):
    t0 = time.perf_counter()
    problem, task, bounds, sol = planar_boundary(planar, m=10)
    p = task.vector()
    assert problem.shape == (10, 3)
    S = argmin_jacobian(problem.derivatives(sol.xi_star, p), 1e-8).matrix
    fd = fd_sensitivity(problem, sol.xi_star, p, bounds, h=SENS_FD_STEP, grad_tol=SENS_RESOLVE_TOL)
    errs = [oracles.rel_err(S[:, j], fd[:, j]) for j in range(p.size)]
    elapsed = time.perf_counter() - t0
    ok = max(errs) <= SENS_REL_TOL and elapsed <= SENS_RUNTIME_S
    verdict(1, "sensitivity oracle", ok, f"worst column rel. error {max(errs):.2e} (<= {SENS_REL_TOL}), {elapsed:.1f} s (<= {SENS_RUNTIME_S:.0f} s)")


def test_c2_derivative_correctness(verdict, panda):
    rng = np.random.default_rng(2024)
    w = CostWeights(w_smooth=(1.0, 1.0, 1.0), w_boundary=10.0, w_orient=5.0, w_track=20.0)
    m = 6
    worst = {"gradient": 0.0, "mixed": 0.0, "symmetry": 0.0}
    for family in ("boundary", "tracking"):
        for _ in range(DERIV_INSTANCES):
            xi = np.stack([random_config(panda, rng) for _ in range(m)])
            o_d = rng.uniform(-3, 3, 3)
            if family == "boundary":
                task = TaskParameters.boundary(random_config(panda, rng), random_config(panda, rng), o_d)
            else:
                k = int(rng.integers(1, m + 1))
                tracked = sorted(rng.choice(m, k, replace=False).tolist())
                task = TaskParameters.waypoints(tracked, rng.uniform(-0.6, 0.6, (k, 3)), o_d)
            problem = TrajectoryProblem(panda, w, task, m)
            p = task.vector()
            b = problem.derivatives(xi, p)
            g_fd = oracles.central_gradient(lambda x: problem.cost(x, p), xi, h=1e-6).ravel()
            cols = []
            for j in range(p.size):
                e = np.zeros_like(p)
                e[j] = 1e-5
                gp = problem.derivatives(xi, p + e, want=("gradient",)).gradient
                gm = problem.derivatives(xi, p - e, want=("gradient",)).gradient
                cols.append((gp - gm) / 2e-5)
            worst["gradient"] = max(worst["gradient"], oracles.rel_err(b.gradient, g_fd))
            worst["mixed"] = max(worst["mixed"], oracles.rel_err(b.mixed, np.stack(cols, 1)))
            worst["symmetry"] = max(worst["symmetry"], oracles.rel_err(b.hessian, b.hessian.T))
    ok = worst["gradient"] <= GRAD_REL_TOL and worst["mixed"] <= MIXED_REL_TOL and worst["symmetry"] <= SYM_REL_TOL
    verdict(
        2,
        "derivative correctness",
        ok,
        f"{DERIV_INSTANCES} instances x 2 families; gradient {worst['gradient']:.1e} (<= {GRAD_REL_TOL}), "
        f"mixed {worst['mixed']:.1e} (<= {MIXED_REL_TOL}), symmetry {worst['symmetry']:.1e} (<= {SYM_REL_TOL})",
    )


def test_c3_validity_invariant(verdict, benchmarks, planar):
    assert __debug__, "assertions must be enabled"
    violations, runs, accepted = 0, 0, 0
    for s, res, _ in benchmarks.values():
        for r in res.records:
            report = res.trajectories[r.trial_id]["report"]
            runs += 1
            accepted += report.iterations
            violations += report.eq10_violations
            violations += int(np.sum(np.diff(report.costs) > 0))
    planar_res = run_benchmark(load_scenario("planar_final_config"), keep_trajectories=True)
    for r in planar_res.records:
        report = planar_res.trajectories[r.trial_id]["report"]
        runs += 1
        accepted += report.iterations
        violations += report.eq10_violations + int(np.sum(np.diff(report.costs) > 0))
    verdict(3, "cost never increases at accepted steps", violations == 0, f"{violations} violations over {accepted} accepted steps in {runs} adapt runs")


def test_c4_zero_perturbation(verdict, planar, panda):
    from conftest import panda_boundary

    worst = 0.0
    for problem, task, bounds, sol in (planar_boundary(planar), panda_boundary(panda)):
        xi, _ = adapt(problem, sol, task, task, bounds)
        worst = max(worst, float(np.max(np.abs(xi - sol.xi_star))))
    s = load_scenario("via_point")
    from trajadapt.harness import solve_prior

    problem, task, sol = solve_prior(s)
    xi, _ = adapt(problem, sol, task, task, s.bounds)
    worst = max(worst, float(np.max(np.abs(xi - sol.xi_star))))
    verdict(4, "zero-perturbation fixed point", worst <= FIXED_POINT_TOL, f"max |xi - prior| = {worst:.1e} (<= {FIXED_POINT_TOL})")


def test_c5_quadratic_exactness(verdict):
    rng = np.random.default_rng(5)
    worst, iters_ok = 0.0, True
    for dim, dim_p in ((4, 4), (12, 5), (30, 8)):
        Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        A = Q @ np.diag(rng.uniform(0.5, 50.0, dim)) @ Q.T
        B = rng.standard_normal((dim, dim_p))
        problem = QuadraticProblem(A, B)
        p0 = rng.standard_normal(dim_p)
        prior = np.linalg.solve(A, B @ p0).reshape(dim, 1)
        for _ in range(10):
            dp = rng.standard_normal(dim_p) * 10.0 ** rng.uniform(-3, 2)
            xi, report = adapt(problem, prior, p0, p0 + dp, BoxBounds.unbounded((dim, 1)), AdaptOptions(hessian_damping=0.0))
            exact = np.linalg.solve(A, B @ (p0 + dp))
            worst = max(worst, float(np.max(np.abs(xi.ravel() - exact)) / max(1.0, np.max(np.abs(exact)))))
            iters_ok &= report.iterations == 1 and report.etas == [1.0]
    verdict(5, "quadratic exactness", worst <= QUAD_TOL and iters_ok, f"max error {worst:.1e} (<= {QUAD_TOL}), one iteration at eta=1: {iters_ok}")


def test_c6_orientation_fidelity(verdict, benchmarks):
    s, res, elapsed = benchmarks["final_config"]
    reach = s.model.reach
    in_bin = all(magnitude_bin(r.perturbation_magnitude, reach) == "medium" for r in res.records)
    vals = np.array([r.orient_linf for r in res.records])
    frac = float(np.mean(vals <= ORIENT_TOL_RAD))
    ok = len(vals) == 30 and in_bin and frac >= ORIENT_MIN_FRACTION and elapsed <= ORIENT_RUNTIME_S
    verdict(
        6,
        "orientation fidelity",
        ok,
        f"{frac:.0%} of {len(vals)} medium-bin trials <= {ORIENT_TOL_RAD} rad (need {ORIENT_MIN_FRACTION:.0%}); "
        f"max {vals.max():.3g} rad, {elapsed:.1f} s",
    )


@pytest.mark.parametrize("family", FAMILIES)
def test_c7_residual_ratio(verdict, benchmarks, family):
    s, res, _ = benchmarks[family]
    ratios = []
    for r in res.records:
        rr = r.residual_ratio
        if rr.ratio is None:
            # resolve hit the task exactly; adapt only matches it if it did too
            ratios.append(1.0 if rr.adapt_residual < 1e-12 else np.inf)
        else:
            ratios.append(rr.ratio)
    ratios = np.array(ratios)
    frac = float(np.mean(ratios <= RATIO_THRESHOLD))
    med = float(np.median(ratios))
    lo, hi = RATIO_MEDIAN_RANGE
    ok = len(ratios) == 30 and frac >= RATIO_MIN_FRACTION and lo <= med <= hi
    verdict(7, f"task residual ratio [{family}]", ok, f"{frac:.0%} <= {RATIO_THRESHOLD} (need {RATIO_MIN_FRACTION:.0%}), median {med:.3f} (need [{lo}, {hi}])")


@pytest.mark.parametrize("family", FAMILIES)
def test_c8_speedup(verdict, benchmarks, family):
    s, res, _ = benchmarks[family]
    t_a = np.median([r.t_adapt for r in res.records])
    t_r = np.median([r.t_resolve for r in res.records])
    speedup = float(t_r / t_a)
    verdict(8, f"speedup [{family}]", speedup >= MIN_SPEEDUP, f"median t_resolve {t_r * 1e3:.1f} ms / median t_adapt {t_a * 1e3:.1f} ms = {speedup:.2f}x (need >= {MIN_SPEEDUP:.0f}x)")


def test_c9_feasibility(verdict, benchmarks):
    total, feasible = 0, 0
    for s, res, _ in benchmarks.values():
        b = s.bounds
        for r in res.records:
            traj = res.trajectories[r.trial_id]
            for xi in (traj["adapt"], traj["resolve"]):
                total += 1
                feasible += bool(np.all(xi >= b.lb) and np.all(xi <= b.ub))
    verdict(9, "feasibility", feasible == total, f"{feasible}/{total} adapted and resolved trajectories inside the joint limits")


def test_c10_determinism(verdict, tmp_path):
    runs = []
    for k in (1, 2):
        out = tmp_path / f"run{k}"
        assert cli.main(["bench", "--scenario", "final_config", "--out", str(out), "--seed", "99"]) == 0
        runs.append(out / "metrics.csv")
    same = filecmp.cmp(runs[0], runs[1], shallow=False)
    rows = len(runs[0].read_text().splitlines()) - 1
    verdict(10, "determinism", same, f"two bench runs (seed 99, {rows} trials) give {'byte-identical' if same else 'different'} metrics.csv")


def test_planar_model_is_bundled():
    assert load_robot_model("planar3").n == 3


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v"]))
