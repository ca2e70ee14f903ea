"""Time-varying QP ``min y'Qy - 2H(x, theta)'y  s.t.  A(x)'y - B(x) <= 0``
and its log-barrier surrogate.

Constraint data is stored row-wise: ``a(x)`` returns an array of shape
``(p, m_y)`` whose i-th row is the column ``a_i(x)`` of ``A(x)``. Jacobians
follow the same layout, ``da_dx(x)`` has shape ``(p, m_y, n)`` and
``db_dx(x)`` has shape ``(p, n)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, InfeasibleEvaluation, PredictionUnavailable

Array = np.ndarray

# points closer than this to the boundary count as not strictly feasible
FEASIBILITY_MARGIN = 1e-9


@dataclass(frozen=True)
class Signal:
    """External time-indexed input. Without a derivative channel the
    signal is treated as constant over each sampling step."""

    value: Callable[[float], Array]
    derivative: Optional[Callable[[float], Array]] = None

    def rate(self, t):
        if self.derivative is None:
            return np.zeros_like(np.atleast_1d(self.value(t)), dtype=float)
        return np.atleast_1d(np.asarray(self.derivative(t), dtype=float))


@dataclass(frozen=True)
class QuadraticObjective:
    """``f_0(y) = y'Qy - 2 H(x, theta)'y``.

    ``H_jac_x`` and ``H_jac_theta`` are optional Jacobians of ``H`` used by
    the analytic prediction term.
    """

    Q: Array
    H: Callable[[Array, Optional[Array]], Array]
    H_jac_x: Optional[Callable[[Array, Optional[Array]], Array]] = None
    H_jac_theta: Optional[Callable[[Array, Optional[Array]], Array]] = None
    q_c: float = field(init=False)

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        if Q.shape[0] != Q.shape[1]:
            raise ConfigurationError(f"Q must be square, got shape {Q.shape}")
        if not np.allclose(Q, Q.T):
            raise ConfigurationError("Q must be symmetric")
        lam = float(np.linalg.eigvalsh(2.0 * Q)[0])
        if lam <= 0:
            raise ConfigurationError("Q must be positive definite")
        object.__setattr__(self, "Q", Q)
        # strong convexity modulus of f_0, i.e. lambda_min of its Hessian 2Q
        object.__setattr__(self, "q_c", lam)

    @property
    def m_y(self):
        return self.Q.shape[0]

    @classmethod
    def tracking(cls, u_ref, m, slack_weight=None, u_ref_jac_x=None, u_ref_jac_theta=None):
        """Objective ``||u - u_ref||^2 (+ slack_weight * delta^2)`` up to a constant.

        ``u_ref(x, theta)`` returns the nominal input of size ``m``. With a
        slack weight the decision vector is ``y = [u, delta]``.
        """
        n_slack = 0 if slack_weight is None else 1
        Q = np.eye(m + n_slack)
        if n_slack:
            Q[m, m] = slack_weight

        def pad(v):
            return np.concatenate([np.asarray(v, dtype=float).reshape(m), np.zeros(n_slack)])

        def pad_rows(J):
            J = np.atleast_2d(np.asarray(J, dtype=float))
            return np.vstack([J, np.zeros((n_slack, J.shape[1]))])

        H = lambda x, theta: pad(u_ref(x, theta))
        Hx = None if u_ref_jac_x is None else (lambda x, theta: pad_rows(u_ref_jac_x(x, theta)))
        Ht = None if u_ref_jac_theta is None else (lambda x, theta: pad_rows(u_ref_jac_theta(x, theta)))
        return cls(Q, H, Hx, Ht)


@dataclass(frozen=True)
class LinearConstraintSet:
    """Rows ``F_i(y, x) = a_i(x)'y - b_i(x) <= 0``."""

    a: Callable[[Array], Array]
    b: Callable[[Array], Array]
    p: int
    m_y: int
    da_dx: Optional[Callable[[Array], Array]] = None
    db_dx: Optional[Callable[[Array], Array]] = None

    def __post_init__(self):
        if self.p < 1:
            raise ConfigurationError("a constraint set needs at least one row")

    @property
    def has_jacobians(self):
        return self.da_dx is not None and self.db_dx is not None

    def residuals(self, y, x):
        return self.a(x) @ y - self.b(x)

    @staticmethod
    def stack(*sets):
        """Concatenate row sets; row order follows argument order."""
        if not sets:
            raise ConfigurationError("nothing to stack")
        m_y = sets[0].m_y
        if any(s.m_y != m_y for s in sets):
            raise ConfigurationError("stacked constraint sets disagree on m_y")
        if len(sets) == 1:
            return sets[0]
        jac = all(s.has_jacobians for s in sets)
        return LinearConstraintSet(
            a=lambda x: np.vstack([s.a(x) for s in sets]),
            b=lambda x: np.concatenate([s.b(x) for s in sets]),
            p=sum(s.p for s in sets),
            m_y=m_y,
            da_dx=(lambda x: np.concatenate([s.da_dx(x) for s in sets], axis=0)) if jac else None,
            db_dx=(lambda x: np.concatenate([s.db_dx(x) for s in sets], axis=0)) if jac else None,
        )

    def padded(self, m_y):
        """Embed rows over ``u`` into a larger decision vector (zero columns
        for the extra components, e.g. a slack variable)."""
        extra = m_y - self.m_y
        if extra < 0:
            raise ConfigurationError("cannot shrink the decision vector")
        if extra == 0:
            return self
        src = self

        def a(x):
            A = src.a(x)
            return np.hstack([A, np.zeros((A.shape[0], extra))])

        da = None
        if src.da_dx is not None:
            def da(x):
                J = src.da_dx(x)
                return np.concatenate([J, np.zeros((J.shape[0], extra, J.shape[2]))], axis=1)

        return LinearConstraintSet(a, src.b, src.p, m_y, da, src.db_dx)


@dataclass
class BarrierProblem:
    """``f_u = f_0 + sum_i -(1/c) log(-F_i)``. ``c`` is the current barrier
    parameter; evaluation functions accept an override."""

    objective: QuadraticObjective
    constraints: LinearConstraintSet
    c: float = 1.0

    def __post_init__(self):
        if self.objective.m_y != self.constraints.m_y:
            raise ConfigurationError(
                f"objective has m_y={self.objective.m_y}, constraints have m_y={self.constraints.m_y}"
            )
        if not self.c > 0:
            raise ConfigurationError("barrier parameter c must be positive")

    @property
    def m_y(self):
        return self.objective.m_y

    @property
    def p(self):
        return self.constraints.p


def _check_y(problem, y):
    y = np.asarray(y, dtype=float)
    if y.shape != (problem.m_y,):
        raise ConfigurationError(f"decision vector must have shape ({problem.m_y},), got {y.shape}")
    return y


def _c(problem, c):
    c = problem.c if c is None else c
    if not c > 0:
        raise ConfigurationError("barrier parameter c must be positive")
    return c


def eval_constraints(problem, y, x):
    """Residuals ``F_i(y, x)``; strictly feasible iff ``max(F) < 0``."""
    y = _check_y(problem, y)
    return problem.constraints.residuals(y, x)


def is_strictly_feasible(F, margin=FEASIBILITY_MARGIN):
    return bool(np.max(F) < -margin)


def _slacks(problem, y, x):
    """``s_i = b_i - a_i'y`` together with the rows; raises when not interior."""
    A = problem.constraints.a(x)
    s = problem.constraints.b(x) - A @ y
    if not np.all(s > 0):
        i = int(np.argmin(s))
        raise InfeasibleEvaluation(f"constraint {i} has F_i = {-s[i]:.3e} >= 0")
    return A, s


def eval_f0(problem, y, x, theta=None):
    y = _check_y(problem, y)
    obj = problem.objective
    return float(y @ obj.Q @ y - 2.0 * obj.H(x, theta) @ y)


def eval_fu(problem, y, x, theta=None, c=None):
    y = _check_y(problem, y)
    c = _c(problem, c)
    _, s = _slacks(problem, y, x)
    return eval_f0(problem, y, x, theta) - np.sum(np.log(s)) / c


def grad_y(problem, y, x, theta=None, c=None):
    """``G = 2Qy - 2H + c^-1 A d`` with ``d_i = 1/(b_i - a_i'y) > 0``."""
    y = _check_y(problem, y)
    c = _c(problem, c)
    A, s = _slacks(problem, y, x)
    obj = problem.objective
    return 2.0 * obj.Q @ y - 2.0 * obj.H(x, theta) + (A.T @ (1.0 / s)) / c


def hess_yy(problem, y, x, theta=None, c=None):
    """``2Q + c^-1 A diag(d^2) A'``."""
    y = _check_y(problem, y)
    c = _c(problem, c)
    A, s = _slacks(problem, y, x)
    W = A / s[:, None]
    return 2.0 * problem.objective.Q + (W.T @ W) / c


def grad_and_hess(problem, y, x, theta=None, c=None):
    """Both derivatives from one constraint evaluation."""
    y = _check_y(problem, y)
    c = _c(problem, c)
    A, s = _slacks(problem, y, x)
    obj = problem.objective
    d = 1.0 / s
    G = 2.0 * obj.Q @ y - 2.0 * obj.H(x, theta) + (A.T @ d) / c
    W = A * d[:, None]
    return G, 2.0 * obj.Q + (W.T @ W) / c


def barrier_term_hessians(problem, y, x, c=None):
    """Per-row barrier Hessian contributions ``a_i a_i' / (c F_i^2)``."""
    y = _check_y(problem, y)
    c = _c(problem, c)
    A, s = _slacks(problem, y, x)
    return [np.outer(a, a) / (c * si**2) for a, si in zip(A, s)]


def mixed_grad_yt(problem, y, x, xdot=None, theta=None, theta_dot=None, c=None, c_dot=0.0):
    """Time derivative of ``grad_y f_u`` at fixed ``y``.

    Sums the state channel ``grad_yx f_u . xdot``, the external channel
    ``grad_ytheta f_u . theta_dot`` and the barrier-schedule drift
    ``-(c_dot/c^2) A d``.
    """
    y = _check_y(problem, y)
    c = _c(problem, c)
    A, s = _slacks(problem, y, x)
    d = 1.0 / s
    obj = problem.objective
    out = np.zeros(problem.m_y)

    if xdot is not None and np.any(xdot):
        xdot = np.asarray(xdot, dtype=float)
        cons = problem.constraints
        if not cons.has_jacobians or obj.H_jac_x is None:
            raise PredictionUnavailable("state Jacobians of H, a_i or b_i are not available")
        Ja = cons.da_dx(x)  # (p, m_y, n)
        Jb = cons.db_dx(x)  # (p, n)
        Ja_xdot = Ja @ xdot  # (p, m_y)
        # d(s_i)/dt = grad b_i . xdot - y' (Ja_i xdot)
        s_dot = Jb @ xdot - Ja_xdot @ y
        out += -2.0 * obj.H_jac_x(x, theta) @ xdot
        out += (Ja_xdot.T @ d - A.T @ (d**2 * s_dot)) / c

    if theta_dot is not None and np.any(theta_dot):
        if obj.H_jac_theta is None:
            raise PredictionUnavailable("objective has no external-signal Jacobian")
        out += -2.0 * obj.H_jac_theta(x, theta) @ np.atleast_1d(theta_dot)

    if c_dot:
        out += -(c_dot / c**2) * (A.T @ d)
    return out


def suboptimality_bound(problem, c=None):
    """Worst-case gap ``p/c`` between the barrier minimizer and the
    constrained optimum, measured in ``f_0``."""
    return problem.p / _c(problem, c)
