"""Constraint builders: obstacle CBFs, cart-pole exponential CBF, input
saturation and CLF rows. Each returns a ``LinearConstraintSet`` with state
Jacobians so the analytic prediction term can be formed."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, SingularGeometry
from .plants import CartPoleParams, cartpole_terms
from .tv_qp import LinearConstraintSet


@dataclass(frozen=True)
class ObstacleCbf:
    """Disc obstacle, ``h(x) = |x - x_c| - r``."""

    x_c: np.ndarray
    r: float
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "x_c", np.asarray(self.x_c, dtype=float))
        if not self.r > 0:
            raise ConfigurationError(f"obstacle radius must be positive, got {self.r}")
        if not self.alpha > 0:
            raise ConfigurationError(f"CBF rate alpha must be positive, got {self.alpha}")

    # |grad h| = 1 away from the center
    b_h = 1.0

    def h(self, x):
        return float(np.linalg.norm(np.asarray(x) - self.x_c) - self.r)

    def grad_h(self, x):
        diff = np.asarray(x, dtype=float) - self.x_c
        dist = np.linalg.norm(diff)
        if dist == 0.0:
            raise SingularGeometry("state coincides with the obstacle center")
        return diff / dist


def build_obstacle_rows(obstacles):
    """One row per obstacle over ``y = v``:
    ``a_i = -(x - x_c)/|x - x_c|``, ``b_i = alpha (|x - x_c| - r)``."""
    obstacles = list(obstacles)
    if not obstacles:
        raise ConfigurationError("at least one obstacle is required")
    centers = np.array([o.x_c for o in obstacles])
    radii = np.array([o.r for o in obstacles])
    alphas = np.array([o.alpha for o in obstacles])
    n = centers.shape[1]
    eye = np.eye(n)

    def geometry(x):
        diff = np.asarray(x, dtype=float)[None, :] - centers
        dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        if np.any(dist == 0.0):
            raise SingularGeometry("state coincides with an obstacle center")
        return diff, dist

    def a(x):
        diff, dist = geometry(x)
        return -diff / dist[:, None]

    def b(x):
        _, dist = geometry(x)
        return alphas * (dist - radii)

    def da_dx(x):
        # d/dx of -(x - x_c)/|x - x_c| = -I/|.| + (x - x_c)(x - x_c)'/|.|^3
        diff, dist = geometry(x)
        outer = diff[:, :, None] * diff[:, None, :]
        return -eye[None] / dist[:, None, None] + outer / dist[:, None, None] ** 3

    def db_dx(x):
        diff, dist = geometry(x)
        return alphas[:, None] * diff / dist[:, None]

    return LinearConstraintSet(a, b, len(obstacles), n, da_dx, db_dx)


@dataclass(frozen=True)
class ExponentialCbfCartPole:
    """``h = r^2 - theta^2`` and its exponential extension
    ``h_e = hdot + mu h = -2 theta omega + mu (r^2 - theta^2)``."""

    r: float
    mu: float
    alpha: float

    def __post_init__(self):
        for name in ("r", "mu", "alpha"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")

    def h(self, q):
        return float(self.r**2 - q[2] ** 2)

    def h_e(self, q):
        theta, omega = q[2], q[3]
        return float(-2.0 * theta * omega + self.mu * (self.r**2 - theta**2))


def build_cartpole_rows(params: CartPoleParams, cbf: ExponentialCbfCartPole, u_min, u_max):
    """Three rows over scalar ``u`` for state ``q = [x, v, theta, omega]``:
    the exponential-CBF row followed by the two saturation rows."""
    if not u_min < u_max:
        raise ConfigurationError(f"u_min ({u_min}) must be below u_max ({u_max})")
    mu, alpha, r = cbf.mu, cbf.alpha, cbf.r

    def a(q):
        g_w = cartpole_terms(q[2], q[3], params)[3]
        return np.array([[2.0 * q[2] * g_w], [1.0], [-1.0]])

    def b(q):
        theta, omega = q[2], q[3]
        f_w = cartpole_terms(theta, omega, params)[1]
        cbf_b = (
            -2.0 * theta * f_w
            - 2.0 * omega**2
            - 2.0 * mu * theta * omega
            + alpha * (-2.0 * theta * omega + mu * (r**2 - theta**2))
        )
        return np.array([cbf_b, u_max, -u_min])

    def da_dx(q):
        theta, omega = q[2], q[3]
        _, _, _, g_w = cartpole_terms(theta, omega, params)
        dg_w = cartpole_term_derivatives(theta, omega, params)["g_w_theta"]
        J = np.zeros((3, 1, 4))
        J[0, 0, 2] = 2.0 * g_w + 2.0 * theta * dg_w
        return J

    def db_dx(q):
        theta, omega = q[2], q[3]
        f_w = cartpole_terms(theta, omega, params)[1]
        dd = cartpole_term_derivatives(theta, omega, params)
        J = np.zeros((3, 4))
        J[0, 2] = -2.0 * f_w - 2.0 * theta * dd["f_w_theta"] - 2.0 * mu * omega - 2.0 * alpha * omega - 2.0 * alpha * mu * theta
        J[0, 3] = -2.0 * theta * dd["f_w_omega"] - 4.0 * omega - 2.0 * mu * theta - 2.0 * alpha * theta
        return J

    return LinearConstraintSet(a, b, 3, 1, da_dx, db_dx)


def cartpole_term_derivatives(theta, omega, params):
    """Partial derivatives of ``f_w`` and ``g_w`` used by the CBF Jacobians."""
    m_c, m_p, l, g = params.m_c, params.m_p, params.l, params.g
    s, co = np.sin(theta), np.cos(theta)
    D = m_c + m_p * s**2
    D_t = 2.0 * m_p * s * co
    N = m_p * l * omega**2 * co * s + (m_c + m_p) * g * s
    N_t = m_p * l * omega**2 * (co**2 - s**2) + (m_c + m_p) * g * co
    N_w = 2.0 * m_p * l * omega * co * s
    return {
        "f_w_theta": -(N_t * D - N * D_t) / (l * D**2),
        "f_w_omega": -N_w / (l * D),
        "g_w_theta": D_t / (l * D**2),
    }


def build_saturation_rows(u_min, u_max, n_state):
    """``u <= u_max`` and ``-u <= -u_min``, constant in the state."""
    u_min = np.atleast_1d(np.asarray(u_min, dtype=float))
    u_max = np.atleast_1d(np.asarray(u_max, dtype=float))
    if u_min.shape != u_max.shape:
        raise ConfigurationError("u_min and u_max must have the same shape")
    if np.any(u_min >= u_max):
        raise ConfigurationError(f"need u_min < u_max componentwise, got {u_min} and {u_max}")
    m = u_min.size
    A = np.vstack([np.eye(m), -np.eye(m)])
    B = np.concatenate([u_max, -u_min])
    return LinearConstraintSet(
        a=lambda x: A,
        b=lambda x: B,
        p=2 * m,
        m_y=m,
        da_dx=lambda x: np.zeros((2 * m, m, n_state)),
        db_dx=lambda x: np.zeros((2 * m, n_state)),
    )


@dataclass(frozen=True)
class ClfRow:
    """Lyapunov decay row ``L_f V + L_g V u + beta V <= delta``.

    ``LgV`` returns a vector of size ``m``. Gradients are optional and only
    needed for analytic prediction.
    """

    V: Callable
    LfV: Callable
    LgV: Callable
    beta: float
    grad_V: Optional[Callable] = None
    grad_LfV: Optional[Callable] = None
    jac_LgV: Optional[Callable] = None

    def __post_init__(self):
        if not self.beta > 0:
            raise ConfigurationError("CLF rate beta must be positive")


def build_clf_row(clf: ClfRow, m):
    """Row over ``y = [u, delta]``: ``a = [L_g V; -1]``, ``b = -L_f V - beta V``."""

    def a(x):
        return np.concatenate([np.atleast_1d(clf.LgV(x)).astype(float), [-1.0]])[None, :]

    def b(x):
        return np.array([-clf.LfV(x) - clf.beta * clf.V(x)])

    da_dx = db_dx = None
    if clf.grad_V is not None and clf.grad_LfV is not None and clf.jac_LgV is not None:
        def da_dx(x):
            J = np.atleast_2d(clf.jac_LgV(x))
            return np.vstack([J, np.zeros((1, J.shape[1]))])[None]

        def db_dx(x):
            return (-np.asarray(clf.grad_LfV(x)) - clf.beta * np.asarray(clf.grad_V(x)))[None, :]

    return LinearConstraintSet(a, b, 1, m + 1, da_dx, db_dx)
