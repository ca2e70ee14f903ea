"""Scenario execution behind the command line: runs, CSV/JSON/SVG output,
controller comparison and the acceptance suite table."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import oracle, plots
from .pc_solver import PcConfig, effective_rate
from .plants import CartPoleParams, NominalController, OracleController, PcController, run_closed_loop
from .scenarios import cartpole_setup, obstacle_setup

log = logging.getLogger(__name__)

WARMUP_STEPS = 100

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_STEP_FAILED = 2


def pc_config(config, method=None):
    ct = config.controller
    if method is None:
        method = "newton" if ct.type == "pc_newton" else "gradient"
    return PcConfig(
        method=method,
        gamma=ct.gamma,
        c0=ct.c0,
        rho=ct.rho,
        c_max=ct.c_max,
        h=config.scenario.dt,
        prediction=ct.prediction,
        fd_threshold=ct.fd_threshold,
        backtrack_factor=ct.backtrack_factor,
        max_backtracks=ct.max_backtracks,
    )


def make_controller(config, kind=None, disturbance=None):
    kind = kind or config.controller.type
    if kind == "nominal":
        return NominalController()
    if kind == "oracle":
        return OracleController()
    return PcController(pc_config(config, "newton" if kind == "pc_newton" else "gradient"), disturbance)


def build_setup(config):
    """Closed-loop setup plus a list of ``(x0, y0)`` initial conditions."""
    if config.scenario.family == "obstacle":
        ob = config.obstacle
        setup = obstacle_setup(ob.centers, ob.radius, ob.alpha, ob.k_d, ob.target, config.controller.c0)
        y0 = np.zeros(2) if ob.initial_input == "zero" else None
        return setup, [(np.array(s), y0) for s in ob.starts]
    cp = config.cartpole
    setup = cartpole_setup(
        CartPoleParams(cp.m_c, cp.m_p, cp.l, cp.g), cp.r, cp.mu, cp.alpha, cp.u_min, cp.u_max,
        config.controller.c0, cp.substeps, cp.b_h,
    )
    return setup, [(np.array(cp.q0), None)]


def simulate(config, kind=None, frozen=False, disturbance=None):
    """Run every initial condition of the scenario with one controller."""
    setup, inits = build_setup(config)
    if frozen:
        # the plant holds still and the model used for prediction agrees
        setup.step_plant = lambda x, u, h: x
        setup.rhs = lambda x, u: np.zeros_like(x)
    runs = []
    for x0, y0 in inits:
        controller = make_controller(config, kind, disturbance)
        runs.append(run_closed_loop(setup, controller, x0, config.scenario.dt, config.scenario.horizon, y0))
    return setup, runs


# --- output ----------------------------------------------------------------

def csv_header(setup, n_state):
    m_y = setup.problem.m_y
    return (
        ["run", "t"]
        + [f"x{i}" for i in range(n_state)]
        + [f"y{i}" for i in range(m_y)]
        + [f"u{i}" for i in range(setup.m)]
        + [f"h{i}" for i in range(len(setup.barriers))]
        + ["sigma_norm", "h_N", "c", "backtracks", "step_time_ms"]
    )


def _fmt(v):
    return format(float(v), ".17g")


def write_trajectory_csv(path, setup, runs, timing=True):
    """One row per sample and run. With ``timing=False`` the wall-clock
    column is written as 0 so the file is reproducible byte for byte."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(setup, runs[0].x.shape[1]))
        for j, run in enumerate(runs):
            for k in range(len(run)):
                row = [str(j), _fmt(run.t[k])]
                row += [_fmt(v) for v in run.x[k]]
                row += [_fmt(v) for v in run.y[k]]
                row += [_fmt(v) for v in run.u[k]]
                row += [_fmt(v) for v in run.h[k]]
                row += [_fmt(run.sigma[k]), _fmt(run.h_N[k]), _fmt(run.c[k]), str(int(run.backtracks[k]))]
                row.append(_fmt(run.step_time_ms[k] if timing else 0.0))
                w.writerow(row)


def write_events(path, runs):
    with open(path, "w") as fh:
        for j, run in enumerate(runs):
            for k, t, kind, msg in run.events:
                fh.write(f"run={j} k={k} t={float(t):.6f} {kind}: {msg}\n")
            if run.interior_violations:
                fh.write(f"run={j} interior_violations={run.interior_violations}\n")


@dataclass(frozen=True)
class TimingReport:
    controller: str
    steps: int
    mean_ms: float
    max_ms: float
    p99_ms: float


def timing_report(runs):
    """Per-step controller wall time, first ``WARMUP_STEPS`` of each run dropped."""
    samples = np.concatenate([r.step_time_ms[WARMUP_STEPS:][np.isfinite(r.step_time_ms[WARMUP_STEPS:])] for r in runs])
    if samples.size == 0:
        samples = np.concatenate([r.step_time_ms[np.isfinite(r.step_time_ms)] for r in runs])
    return TimingReport(
        runs[0].controller,
        int(samples.size),
        float(samples.mean()),
        float(samples.max()),
        float(np.percentile(samples, 99)),
    )


def emit_plots(config, setup, runs, out_dir, extra_runs=()):
    out_dir = Path(out_dir)
    if config.scenario.family == "obstacle":
        ob = config.obstacle
        paths = [plots.plot_positions(runs, ob.centers, ob.radius, ob.target, out_dir / "trajectory.svg")]
        ref = None
        if len(ob.centers) == 1:
            ref = np.array([
                oracle.solve_single_obstacle_closed_form(x, ob.centers[0], ob.radius, ob.k_d, ob.target, ob.alpha)
                for x in runs[0].x
            ])
            ref[-1] = np.nan
        paths.append(plots.plot_velocities(runs[0], out_dir / "inputs.svg", ref))
        return paths
    cp = config.cartpole
    all_runs = list(extra_runs) + list(runs)
    return [
        plots.plot_force(all_runs, cp.u_min, cp.u_max, out_dir / "inputs.svg"),
        plots.plot_angle(all_runs, cp.r, out_dir / "angle.svg"),
    ]


def run_scenario(config, out_dir=None, make_plots=None, timing=True):
    """Run the configured controller and write all artifacts.

    Returns ``(exit_code, runs)``; exit code 2 flags runs containing failed
    steps.
    """
    out_dir = Path(out_dir or config.output.dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    setup, runs = simulate(config)
    write_trajectory_csv(out_dir / "trajectory.csv", setup, runs, timing)
    write_events(out_dir / "events.log", runs)
    with open(out_dir / "timing.json", "w") as fh:
        json.dump(asdict(timing_report(runs)), fh, indent=2, sort_keys=True)
    if config.output.plots if make_plots is None else make_plots:
        extra = []
        if config.scenario.family == "cartpole" and config.controller.type != "nominal":
            extra = simulate(config, "nominal")[1]
        emit_plots(config, setup, runs, out_dir, extra)
    failed = sum(r.step_failures for r in runs)
    return (EXIT_STEP_FAILED if failed else EXIT_OK), runs


def tracking_errors(setup, run):
    """``|y_pc - y*(x_k)|`` with the exact optimum evaluated at the run's own states."""
    err = np.full(len(run), np.nan)
    for k in range(len(run) - 1):
        theta = None if setup.signal is None else setup.signal.value(run.t[k])
        y_star = oracle.solve_kkt_enumeration(setup.problem, run.x[k], theta).y_star
        err[k] = np.linalg.norm(run.y[k] - y_star)
    return err


def barrier_tracking_errors(setup, run):
    """``|y_pc - y_c(x_k, c_k)|`` against the minimizer of the barrier
    problem the controller is actually tracking."""
    err = np.full(len(run), np.nan)
    for k in range(len(run) - 1):
        theta = None if setup.signal is None else setup.signal.value(run.t[k])
        y_c = oracle.barrier_minimizer(setup.problem, run.x[k], theta, run.c[k], y0=run.y[k])
        err[k] = np.linalg.norm(run.y[k] - y_c)
    return err


def fit_decay_rate(t, err, decades=2.0):
    """Least-squares slope of ``-log err`` while ``err`` is within
    ``decades`` orders of magnitude of its initial value."""
    ok = np.isfinite(err) & (err > 0)
    t, err = t[ok], err[ok]
    below = np.nonzero(err < err[0] * 10.0**-decades)[0]
    stop = below[0] if below.size else len(err)
    slope = np.polyfit(t[:stop], np.log(err[:stop]), 1)[0]
    return float(-slope)


def compare_controllers(config, out_dir=None, frozen=False):
    """Run both PC laws and the exact QP; write tracking errors and timings.

    With ``frozen`` the plant holds its initial state. The error to the
    barrier minimizer is then also written and its decay rate fitted; the
    error to the exact optimum levels off at the barrier suboptimality gap.
    """
    out_dir = Path(out_dir or config.output.dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pc_kinds = ("pc_gradient", "pc_newton")
    results = {}
    errors = {}
    barrier_errors = {}
    setup = None
    for kind in pc_kinds + ("oracle",):
        setup, runs = simulate(config, kind, frozen=frozen)
        results[kind] = runs
        if kind != "oracle":
            errors[kind] = [tracking_errors(setup, r) for r in runs]
            if frozen:
                barrier_errors[kind] = [barrier_tracking_errors(setup, r) for r in runs]

    with open(out_dir / "tracking_error.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["run", "t"] + [f"err_{k}" for k in pc_kinds]
        if frozen:
            header += [f"err_barrier_{k}" for k in pc_kinds]
        w.writerow(header)
        for j, run in enumerate(results["pc_gradient"]):
            for k in range(len(run)):
                row = [j, _fmt(run.t[k])] + [_fmt(errors[kind][j][k]) for kind in pc_kinds]
                if frozen:
                    row += [_fmt(barrier_errors[kind][j][k]) for kind in pc_kinds]
                w.writerow(row)

    reports = {kind: timing_report(runs) for kind, runs in results.items()}
    summary = {
        "controllers": {k: asdict(v) for k, v in reports.items()},
        "speedup_oracle_over_pc_gradient": reports["oracle"].mean_ms / reports["pc_gradient"].mean_ms,
        "speedup_oracle_over_pc_newton": reports["oracle"].mean_ms / reports["pc_newton"].mean_ms,
        "frozen": frozen,
    }
    if frozen:
        q_c = setup.problem.objective.q_c
        summary["decay"] = {
            kind: {
                "gamma_hat": effective_rate(kind[3:], config.controller.gamma, q_c),
                "fitted_rate": [fit_decay_rate(r.t, e) for r, e in zip(results[kind], barrier_errors[kind])],
            }
            for kind in pc_kinds
        }
    with open(out_dir / "timing.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary, errors, barrier_errors, results


def scenario_checks(config, runs):
    """Named pass/fail checks for a finished scenario."""
    checks = {
        "interior": all(r.interior_violations == 0 for r in runs),
        "no_step_failed": all(r.step_failures == 0 for r in runs),
        "completed": not any(r.aborted for r in runs),
    }
    if config.scenario.family == "obstacle":
        ob = config.obstacle
        checks["safe"] = all(np.nanmin(r.h) > 0 for r in runs)
        checks["target"] = all(np.linalg.norm(r.x[-1] - np.array(ob.target)) < ob.target_tol for r in runs)
    else:
        cp = config.cartpole
        checks["angle"] = all(np.max(np.abs(r.x[:, 2])) <= cp.r for r in runs)
        checks["saturation"] = all(
            np.nanmin(r.u) >= cp.u_min and np.nanmax(r.u) <= cp.u_max for r in runs
        )
    return checks
