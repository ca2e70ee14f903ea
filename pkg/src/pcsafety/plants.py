"""Plant models, RK4 integration and the ZOH closed-loop runner."""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import oracle, pc_solver, tv_qp
from .errors import InfeasibleProblem, InvalidState, NumericalDivergence, StepFailed


# --- plants ---------------------------------------------------------------

def integrator_step(x, v, h):
    """Exact ZOH update of ``xdot = v``."""
    return np.asarray(x, dtype=float) + h * np.asarray(v, dtype=float)


def integrator_rhs(x, v):
    return np.asarray(v, dtype=float)


@dataclass(frozen=True)
class CartPoleParams:
    m_c: float = 1.0
    m_p: float = 1.0
    l: float = 2.0
    g: float = 9.8


def cartpole_terms(theta, omega, params):
    """``(f_v, f_w, g_v, g_w)`` of the control-affine cart-pole model."""
    m_c, m_p, l, g = params.m_c, params.m_p, params.l, params.g
    s, co = np.sin(theta), np.cos(theta)
    D = m_c + m_p * s * s
    f_v = m_p * s * (l * omega * omega + g * co) / D
    f_w = -(m_p * l * omega * omega * co * s + (m_c + m_p) * g * s) / (l * D)
    return f_v, f_w, 1.0 / D, -1.0 / (l * D)


def cartpole_rhs(q, u, params):
    """``qdot`` for ``q = [x, v, theta, omega]`` and scalar force ``u``."""
    u = float(np.asarray(u).reshape(-1)[0])
    f_v, f_w, g_v, g_w = cartpole_terms(q[2], q[3], params)
    return np.array([q[1], f_v + g_v * u, q[3], f_w + g_w * u])


def rk4_step(rhs, state, u, h, substeps=1):
    """Classical RK4 with ``u`` held over ``[t, t + h]``."""
    x = np.asarray(state, dtype=float)
    dt = h / substeps
    for _ in range(substeps):
        k1 = rhs(x, u)
        k2 = rhs(x + 0.5 * dt * k1, u)
        k3 = rhs(x + 0.5 * dt * k2, u)
        k4 = rhs(x + dt * k3, u)
        x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(x)):
        raise NumericalDivergence(f"non-finite state {x}")
    return x


# --- closed loop ----------------------------------------------------------

@dataclass(frozen=True)
class CertificateSpec:
    """CBF handle for the safety certificate; ``h`` is the barrier monitored
    (the smallest one when several obstacles are present)."""

    h: Callable[[np.ndarray], float]
    alpha: float
    b_h: float


@dataclass
class ClosedLoopSetup:
    problem: tv_qp.BarrierProblem
    m: int
    step_plant: Callable
    rhs: Callable
    u_ref: Callable
    signal: Optional[tv_qp.Signal] = None
    barriers: Sequence[Callable] = ()
    certificate: Optional[CertificateSpec] = None


@dataclass
class ClosedLoopRun:
    controller: str
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    u_ref: np.ndarray
    h: np.ndarray
    sigma: np.ndarray
    h_N: np.ndarray
    c: np.ndarray
    backtracks: np.ndarray
    step_time_ms: np.ndarray
    events: list = field(default_factory=list)
    interior_violations: int = 0
    step_failures: int = 0
    aborted: bool = False

    def __len__(self):
        return len(self.t)


class NominalController:
    """Applies the reference input without filtering."""

    name = "nominal"
    is_pc = False

    def reset(self, setup, x0, y0, t0):
        pass

    def update(self, setup, k, t, x, theta, u_prev, events):
        y = np.zeros(setup.problem.m_y)
        y[: setup.m] = np.asarray(setup.u_ref(x, theta), dtype=float).reshape(setup.m)
        return y, {}


class OracleController:
    """Cold-start exact QP solve at every sample."""

    name = "oracle"
    is_pc = False

    def reset(self, setup, x0, y0, t0):
        self.y = None

    def update(self, setup, k, t, x, theta, u_prev, events):
        try:
            self.y = oracle.solve_kkt_enumeration(setup.problem, x, theta).y_star
        except InfeasibleProblem as exc:
            events.append((k, t, "infeasible_qp", str(exc)))
            if self.y is None:
                raise
        return self.y, {}


class PcController:
    """Discrete prediction-correction law with feasibility backtracking."""

    is_pc = True

    def __init__(self, config, disturbance=None):
        self.config = config
        self.disturbance = disturbance
        self.name = f"pc_{config.method}"

    def reset(self, setup, x0, y0, t0):
        theta = None if setup.signal is None else setup.signal.value(t0)
        if y0 is None:
            y0 = oracle.strictly_feasible_init(setup.problem, x0)
        self.state = pc_solver.initial_state(setup.problem, y0, x0, self.config, theta, t0)

    def update(self, setup, k, t, x, theta, u_prev, events):
        cfg = self.config
        st = self.state
        xdot = theta_dot = None
        if cfg.prediction == pc_solver.ANALYTIC:
            xdot = setup.rhs(x, u_prev)
            if setup.signal is not None:
                theta_dot = setup.signal.rate(t)
        dist = None if self.disturbance is None else self.disturbance(t)
        try:
            new = pc_solver.discrete_step(setup.problem, st, x, cfg, theta, xdot, theta_dot, dist)
        except InvalidState as exc:
            events.append((k, t, "interior_recovery", str(exc)))
            st = replace(st, y=oracle.recover_interior(setup.problem, st.y, x), G_prev=None)
            new = pc_solver.discrete_step(setup.problem, st, x, cfg, theta, xdot, theta_dot, dist)
        except StepFailed as exc:
            events.append((k, t, "step_failed", str(exc)))
            t_new = st.t + cfg.h
            new = replace(st, t=t_new, c=cfg.schedule(t_new), G_prev=None, backtracks=0, step_count=st.step_count + 1)
            self.state = new
            return new.y, {"c": st.c, "sigma": st.sigma_norm, "failed": True}
        if new.fd_guarded:
            events.append((k, t, "fd_guard", "finite-difference prediction dropped"))
        if new.backtracks:
            events.append((k, t, "backtrack", f"{new.backtracks} step halvings"))
        self.state = new
        return new.y, {"c": st.c, "sigma": new.sigma_norm, "backtracks": new.backtracks}


def run_closed_loop(setup, controller, x0, h, horizon, y0=None, t0=0.0):
    """Simulate ``horizon`` seconds with control period ``h``.

    At sample ``k``: read ``x_k``, update the controller, apply the first
    ``m`` entries of ``y`` over ``[t_k, t_k + h]`` and integrate the plant.
    Arrays hold ``N + 1`` samples; input columns of the final sample are NaN.
    """
    problem = setup.problem
    n_steps = int(round(horizon / h))
    x0 = np.asarray(x0, dtype=float)
    n, m_y, nb = x0.size, problem.m_y, len(setup.barriers)

    t = t0 + h * np.arange(n_steps + 1)
    X = np.full((n_steps + 1, n), np.nan)
    Y = np.full((n_steps + 1, m_y), np.nan)
    U = np.full((n_steps + 1, setup.m), np.nan)
    UR = np.full((n_steps + 1, setup.m), np.nan)
    Hv = np.full((n_steps + 1, nb), np.nan)
    sigma = np.full(n_steps + 1, np.nan)
    h_N = np.full(n_steps + 1, np.nan)
    c = np.full(n_steps + 1, np.nan)
    back = np.zeros(n_steps + 1, dtype=int)
    wall = np.full(n_steps + 1, np.nan)
    events = []
    interior_violations = failures = 0
    aborted = False

    alpha_prime = None
    if controller.is_pc and setup.certificate is not None:
        cfg = controller.config
        gh = pc_solver.effective_rate(cfg.method, cfg.gamma, problem.objective.q_c)
        cert = setup.certificate
        if gh > cert.alpha:
            alpha_prime = problem.objective.q_c * (gh - cert.alpha) / cert.b_h

    controller.reset(setup, x0, y0, t0)
    u_prev = np.zeros(setup.m) if y0 is None else np.asarray(y0, dtype=float)[: setup.m]
    x = x0
    last = n_steps
    for k in range(n_steps):
        tk = t[k]
        theta = None if setup.signal is None else setup.signal.value(tk)
        X[k] = x
        Hv[k] = [hf(x) for hf in setup.barriers]
        UR[k] = np.asarray(setup.u_ref(x, theta), dtype=float).reshape(setup.m)

        t_start = time.perf_counter_ns()
        y, info = controller.update(setup, k, tk, x, theta, u_prev, events)
        wall[k] = (time.perf_counter_ns() - t_start) * 1e-6

        Y[k] = y
        u = y[: setup.m]
        U[k] = u
        sigma[k] = info.get("sigma", np.nan)
        c[k] = info.get("c", np.nan)
        back[k] = info.get("backtracks", 0)
        failures += int(info.get("failed", False))
        if controller.is_pc and np.max(problem.constraints.residuals(y, x)) >= 0.0:
            interior_violations += 1
        if alpha_prime is not None:
            h_N[k] = -sigma[k] + alpha_prime * setup.certificate.h(x)

        try:
            x = setup.step_plant(x, u, h)
        except NumericalDivergence as exc:
            events.append((k, tk, "divergence", str(exc)))
            aborted, last = True, k + 1
            break
        u_prev = u
    if not aborted:
        X[n_steps] = x
        Hv[n_steps] = [hf(x) for hf in setup.barriers]
    sl = slice(0, last + 1)
    return ClosedLoopRun(
        controller.name, t[sl], X[sl], Y[sl], U[sl], UR[sl], Hv[sl], sigma[sl], h_N[sl], c[sl], back[sl], wall[sl],
        events, interior_violations, failures, aborted,
    )
