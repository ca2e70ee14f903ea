"""Prediction-correction tracking of the barrier problem's minimizer.

Two correction laws are provided, each with an optional prediction term
that compensates the drift of the residual ``sigma = grad_y f_u``:

    gradient:  ydot = -gamma G - H^-1 p
    newton:    ydot = -H^-1 (gamma G + p)

where ``G``/``H`` are the gradient/Hessian of ``f_u`` in ``y`` and ``p`` is the
mixed time derivative ``grad_yt f_u``. The discrete (ZOH) versions take one
explicit Euler step of length ``h`` and reject steps that leave the interior.
"""
from __future__ import annotations

import functools
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from . import tv_qp
from .errors import ConfigurationError, InfeasibleEvaluation, InvalidState, StepFailed

log = logging.getLogger(__name__)

GRADIENT = "gradient"
NEWTON = "newton"
ANALYTIC = "analytic"
FINITE_DIFFERENCE = "fd"
OFF = "off"


@dataclass(frozen=True)
class BarrierSchedule:
    """``c(t) = min(c0 exp(rho t), c_max)``."""

    c0: float
    rho: float = 0.0
    c_max: float = 1e9

    def __post_init__(self):
        if not self.c0 > 0:
            raise ConfigurationError("c0 must be positive")
        if self.rho < 0:
            raise ConfigurationError("rho must be non-negative")
        if not self.c_max >= self.c0:
            raise ConfigurationError("c_max must be at least c0")

    def __call__(self, t):
        return min(self.c0 * np.exp(self.rho * t), self.c_max)

    def rate(self, t):
        c = self.c0 * np.exp(self.rho * t)
        return self.rho * c if c < self.c_max else 0.0


@dataclass(frozen=True)
class PcConfig:
    method: str = GRADIENT
    gamma: float = 1.0
    c0: float = 1.0
    rho: float = 0.0
    c_max: float = 1e9
    h: float = 1e-3
    prediction: str = ANALYTIC
    fd_threshold: float = 0.01
    backtrack_factor: float = 0.5
    max_backtracks: int = 30
    max_condition: float = 1e12

    def __post_init__(self):
        if self.method not in (GRADIENT, NEWTON):
            raise ConfigurationError(f"unknown method {self.method!r}")
        if self.prediction not in (ANALYTIC, FINITE_DIFFERENCE, OFF):
            raise ConfigurationError(f"unknown prediction mode {self.prediction!r}")
        if not self.gamma > 0:
            raise ConfigurationError("gamma must be positive")
        if not self.h > 0:
            raise ConfigurationError("step h must be positive")
        if not 0 < self.backtrack_factor < 1:
            raise ConfigurationError("backtrack_factor must lie in (0, 1)")
        if not self.fd_threshold > 0:
            raise ConfigurationError("fd_threshold must be positive")
        if self.max_backtracks < 0:
            raise ConfigurationError("max_backtracks must be non-negative")
        BarrierSchedule(self.c0, self.rho, self.c_max)

    @property
    def schedule(self):
        return BarrierSchedule(self.c0, self.rho, self.c_max)


@dataclass
class PcSolverState:
    y: np.ndarray
    c: float
    t: float = 0.0
    G_prev: Optional[np.ndarray] = None
    sigma_norm: float = float("nan")
    step_count: int = 0
    backtracks: int = 0
    fd_guarded: bool = False


def initial_state(problem, y0, x, config, theta=None, t0=0.0):
    c = config.schedule(t0)
    try:
        sigma = float(np.linalg.norm(tv_qp.grad_y(problem, y0, x, theta, c)))
    except InfeasibleEvaluation as exc:
        raise InvalidState(str(exc)) from exc
    return PcSolverState(y=np.asarray(y0, dtype=float).copy(), c=c, t=t0, sigma_norm=sigma)


def effective_rate(method, gamma, q_c):
    """Guaranteed residual decay rate: ``q_c gamma`` (gradient) or ``gamma`` (Newton)."""
    return q_c * gamma if method == GRADIENT else gamma


def gradient_step_limit(problem, y, x, gamma, theta=None, c=None):
    """Largest ``h`` for which the explicit gradient step is stable near
    ``y``: ``2 / (gamma lambda_max(H))``. Steps at or below half this value
    do not overshoot along any eigen-direction."""
    w = np.linalg.eigvalsh(tv_qp.hess_yy(problem, y, x, theta, c))
    limit = 2.0 / (gamma * w[-1])
    log.info("gradient step stability limit h < %.3e", limit)
    return limit


def _solve(Hm, rhs, max_condition):
    w = np.linalg.eigvalsh(Hm)
    if w[0] <= 0 or w[-1] / w[0] > max_condition:
        raise StepFailed(f"Hessian condition number {w[-1] / max(w[0], 1e-300):.3e} exceeds {max_condition:.1e}")
    if Hm.shape[0] == 1:
        return rhs / Hm[0, 0]
    return scipy.linalg.solve(Hm, rhs, assume_a="sym", check_finite=False)


def _direction(method, gamma, G, Hm, pred, max_condition):
    """Velocity ``ydot`` of the chosen law (pred may be None)."""
    if method == GRADIENT:
        ydot = -gamma * G
        if pred is not None:
            ydot = ydot - _solve(Hm, pred, max_condition)
        return ydot
    rhs = gamma * G if pred is None else gamma * G + pred
    return -_solve(Hm, rhs, max_condition)


def continuous_rhs(problem, y, x, config, xdot=None, theta=None, theta_dot=None, c=None, c_dot=0.0, disturbance=None):
    """``ydot`` of the continuous gradient or Newton law.

    ``disturbance`` is added to the prediction term (estimation error).
    """
    G, Hm = tv_qp.grad_and_hess(problem, y, x, theta, c)
    pred = None
    if config.prediction != OFF:
        pred = tv_qp.mixed_grad_yt(problem, y, x, xdot, theta, theta_dot, c, c_dot)
    if disturbance is not None:
        pred = np.asarray(disturbance, dtype=float) if pred is None else pred + disturbance
    return _direction(config.method, config.gamma, G, Hm, pred, np.inf)


def fd_prediction(G_prev, G_k, h, G_d):
    """Backward-difference estimate ``(G_k - G_prev)/h`` of ``grad_yt f_u``.

    Returns ``(estimate, guarded)``. The estimate is zero on the first step
    and whenever ``|G_k - G_prev| > G_d``; ``guarded`` flags the latter.
    """
    if G_prev is None:
        return np.zeros_like(G_k), False
    jump = G_k - G_prev
    if np.linalg.norm(jump) > G_d:
        log.debug("fd prediction dropped: |G_k - G_prev| = %.3e > %.3e", np.linalg.norm(jump), G_d)
        return np.zeros_like(G_k), True
    return jump / h, False


def discrete_step(problem, state, x, config, theta=None, xdot=None, theta_dot=None, disturbance=None):
    """One ZOH update ``y_k -> y_{k+1}`` at plant state ``x_k``.

    The full step vector is scaled by ``backtrack_factor`` until the new
    iterate is strictly feasible at ``x_k``.
    """
    c = state.c
    y = state.y
    schedule = config.schedule
    need_hessian = config.method == NEWTON or config.prediction != OFF or disturbance is not None
    try:
        if need_hessian:
            G, Hm = tv_qp.grad_and_hess(problem, y, x, theta, c)
        else:
            G, Hm = tv_qp.grad_y(problem, y, x, theta, c), None
    except InfeasibleEvaluation as exc:
        raise InvalidState(str(exc)) from exc

    guarded = False
    pred = None
    if config.prediction == ANALYTIC:
        pred = tv_qp.mixed_grad_yt(problem, y, x, xdot, theta, theta_dot, c, schedule.rate(state.t))
    elif config.prediction == FINITE_DIFFERENCE:
        pred, guarded = fd_prediction(state.G_prev, G, config.h, config.fd_threshold)
    if disturbance is not None:
        pred = np.asarray(disturbance, dtype=float) if pred is None else pred + disturbance
    if pred is not None and not np.any(pred):
        pred = None

    step = config.h * _direction(config.method, config.gamma, G, Hm, pred, config.max_condition)

    cons = problem.constraints
    A, b = cons.a(x), cons.b(x)
    scale = 1.0
    for n_back in range(config.max_backtracks + 1):
        y_new = y + scale * step
        if np.max(A @ y_new - b) < -tv_qp.FEASIBILITY_MARGIN:
            break
        scale *= config.backtrack_factor
    else:
        raise StepFailed(f"no strictly feasible step after {config.max_backtracks} backtracks")

    sigma = float(np.linalg.norm(tv_qp.grad_y(problem, y_new, x, theta, c)))
    t_new = state.t + config.h
    return PcSolverState(
        y=y_new,
        c=schedule(t_new),
        t=t_new,
        G_prev=G,
        sigma_norm=sigma,
        step_count=state.step_count + 1,
        backtracks=n_back,
        fd_guarded=guarded,
    )


def inject_prediction_disturbance(law, rho):
    """Wrap ``continuous_rhs`` or ``discrete_step`` so that the prediction
    term is corrupted by ``rho(t)``; the wrapped law takes a keyword ``t``."""

    @functools.wraps(law)
    def perturbed(*args, t, **kwargs):
        return law(*args, disturbance=np.asarray(rho(t), dtype=float), **kwargs)

    return perturbed


def integrate_flow(problem, y0, config, t_final, h, x_of_t=None, xdot_of_t=None, signal=None, disturbance=None, x=None):
    """RK4 integration of the continuous law.

    The plant state is either fixed (``x``) or a prescribed trajectory
    ``x_of_t`` with derivative ``xdot_of_t``. The barrier parameter follows
    ``config.schedule``. Returns ``(t, Y, sigma)`` sampled at every step.
    """
    schedule = config.schedule
    n_steps = int(round(t_final / h))

    def rhs(t, y):
        xt = x if x_of_t is None else x_of_t(t)
        xd = None if xdot_of_t is None else xdot_of_t(t)
        theta = None if signal is None else signal.value(t)
        theta_dot = None if signal is None else signal.rate(t)
        dist = None if disturbance is None else disturbance(t)
        return continuous_rhs(problem, y, xt, config, xd, theta, theta_dot, schedule(t), schedule.rate(t), dist)

    def sigma_at(t, y):
        xt = x if x_of_t is None else x_of_t(t)
        theta = None if signal is None else signal.value(t)
        return float(np.linalg.norm(tv_qp.grad_y(problem, y, xt, theta, schedule(t))))

    ts = np.arange(n_steps + 1) * h
    Y = np.empty((n_steps + 1, problem.m_y))
    sig = np.empty(n_steps + 1)
    y = np.asarray(y0, dtype=float).copy()
    Y[0], sig[0] = y, sigma_at(0.0, y)
    for k in range(n_steps):
        t = ts[k]
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + h / 2 * k1)
        k3 = rhs(t + h / 2, y + h / 2 * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        Y[k + 1], sig[k + 1] = y, sigma_at(ts[k + 1], y)
    return ts, Y, sig


@dataclass(frozen=True)
class SafetyCertificate:
    alpha: float
    gamma_hat: float
    q_c: float
    b_h: float
    alpha_prime: float
    h_N: float
    member_of_C_N: bool
    available: bool = True
    h_N_robust: Optional[float] = None


def eval_safety_certificate(problem, y, x, h_value, alpha, q_c, b_h, gamma_hat, theta=None, c=None, disturbance_bound=None):
    """``h_N = -|grad_y f_u| + alpha' h(x)`` with ``alpha' = q_c (gamma_hat - alpha) / b_h``.

    With ``disturbance_bound`` the robust value ``h_N + sup|rho| / alpha`` is
    also reported. When ``gamma_hat <= alpha`` the certificate is unavailable.
    """
    if not gamma_hat > alpha:
        return SafetyCertificate(alpha, gamma_hat, q_c, b_h, float("nan"), float("nan"), False, available=False)
    alpha_prime = q_c * (gamma_hat - alpha) / b_h
    sigma = float(np.linalg.norm(tv_qp.grad_y(problem, y, x, theta, c)))
    h_N = -sigma + alpha_prime * h_value
    robust = None if disturbance_bound is None else h_N + disturbance_bound / alpha
    return SafetyCertificate(alpha, gamma_hat, q_c, b_h, alpha_prime, h_N, h_N >= 0, True, robust)
