"""Exact reference solvers for the small dense QPs."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import CapacityExceeded, ConfigurationError, InfeasibleEvaluation, InfeasibleProblem, SingularGeometry
from . import tv_qp

MAX_ENUMERATION_ROWS = 20
KKT_TOL = 1e-10


@dataclass(frozen=True)
class QpSolution:
    y_star: np.ndarray
    active_set: tuple
    multipliers: np.ndarray
    objective_value: float


def solve_qp_enumeration(Q, H, A, b, tol=KKT_TOL):
    """Minimize ``y'Qy - 2H'y`` s.t. ``A y <= b`` by enumerating active sets.

    ``A`` holds one constraint per row. Every subset of at most ``m_y`` rows
    is tried as the active set; the KKT system

        [2Q  A_S'] [y  ]   [2H ]
        [A_S  0  ] [lam] = [b_S]

    is solved and the candidate kept if primal and dual feasible. The QP is
    strictly convex, so all surviving candidates share ``y*``; ties are broken
    by the lexicographically smallest active set.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    H = np.asarray(H, dtype=float).reshape(-1)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    m, p = Q.shape[0], A.shape[0]
    if A.shape[1] != m or b.shape[0] != p:
        raise ConfigurationError(f"inconsistent QP shapes Q{Q.shape} A{A.shape} b{b.shape}")
    if p > MAX_ENUMERATION_ROWS:
        raise CapacityExceeded(f"{p} constraints exceed the enumeration limit {MAX_ENUMERATION_ROWS}")

    scale = 1.0 + np.abs(b).max(initial=0.0)
    best = None
    for size in range(0, min(m, p) + 1):
        for S in combinations(range(p), size):
            S = list(S)
            K = np.zeros((m + size, m + size))
            K[:m, :m] = 2.0 * Q
            K[:m, m:] = A[S].T
            K[m:, :m] = A[S]
            rhs = np.concatenate([2.0 * H, b[S]])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                continue
            if not np.all(np.isfinite(sol)) or np.abs(K @ sol - rhs).max() > 1e-9 * (1.0 + np.abs(rhs).max()):
                continue
            y, lam = sol[:m], sol[m:]
            if np.any(lam < -tol * (1.0 + np.abs(lam).max(initial=0.0))):
                continue
            if np.any(A @ y - b > tol * scale):
                continue
            cand = (tuple(S), y, np.maximum(lam, 0.0))
            if best is None or cand[0] < best[0]:
                best = cand
    if best is None:
        raise InfeasibleProblem("no KKT point found; the feasible set is empty")
    S, y, lam = best
    return QpSolution(y, S, lam, float(y @ Q @ y - 2.0 * H @ y))


def solve_kkt_enumeration(problem, x, theta=None):
    """Ground-truth optimum of the QP underlying ``problem`` at state ``x``."""
    cons = problem.constraints
    return solve_qp_enumeration(problem.objective.Q, problem.objective.H(x, theta), cons.a(x), cons.b(x))


def solve_single_obstacle_closed_form(x, x_c, r, k_d, x_d, alpha):
    """Filtered velocity ``v_d + max(-n'v_d - alpha h, 0) n`` for one disc."""
    x = np.asarray(x, dtype=float)
    diff = x - np.asarray(x_c, dtype=float)
    dist = np.linalg.norm(diff)
    if dist == 0.0:
        raise SingularGeometry("state coincides with the obstacle center")
    n = diff / dist
    v_d = -k_d * (x - np.asarray(x_d, dtype=float))
    return v_d + max(-n @ v_d - alpha * (dist - r), 0.0) * n


def phase_one(A, b, reg=1e-2):
    """Regularized phase-I problem ``min s + reg/2 (|y|^2 + s^2)`` s.t.
    ``A y - b <= s``. Returns ``(y, s)``; ``s < 0`` certifies strict
    feasibility with margin ``-s``. The regularizer keeps the problem bounded
    when the rows do not enclose a bounded region."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    m = A.shape[1]
    Q = 0.5 * reg * np.eye(m + 1)
    H = np.zeros(m + 1)
    H[m] = -0.5
    A1 = np.hstack([A, -np.ones((A.shape[0], 1))])
    sol = solve_qp_enumeration(Q, H, A1, b)
    return sol.y_star[:m], float(sol.y_star[m])


def strictly_feasible_init(problem, x, margin=1e-3):
    """A point with ``F_i(y0, x) <= -margin`` for every row."""
    cons = problem.constraints
    A, b = cons.a(x), cons.b(x)
    y, s = phase_one(A, b)
    if s >= 0:
        raise InfeasibleProblem(f"phase-I optimum s = {s:.3e} >= 0")
    if np.max(A @ y - b) > -margin:
        raise InfeasibleProblem(f"feasible set is thinner than margin {margin} (phase-I s = {s:.3e})")
    return y


def barrier_minimizer(problem, x, theta=None, c=None, y0=None, tol=1e-20, max_iter=200):
    """Minimizer of ``f_u`` by damped Newton with feasibility backtracking."""
    y = strictly_feasible_init(problem, x) if y0 is None else np.asarray(y0, dtype=float).copy()
    f = tv_qp.eval_fu(problem, y, x, theta, c)
    for _ in range(max_iter):
        G, Hm = tv_qp.grad_and_hess(problem, y, x, theta, c)
        step = np.linalg.solve(Hm, G)
        decrement = float(G @ step)
        if decrement < tol:
            break
        t = 1.0
        while True:
            y_new = y - t * step
            try:
                f_new = tv_qp.eval_fu(problem, y_new, x, theta, c)
            except InfeasibleEvaluation:
                f_new = np.inf
            if f_new <= f - 0.25 * t * decrement or t < 1e-14:
                break
            t *= 0.5
        if not np.isfinite(f_new):
            break
        y, f = y_new, f_new
    return y


def recover_interior(problem, y, x, depth=0.1):
    """Move ``y`` toward the phase-I point until every row has slack of at
    least ``depth`` times the phase-I margin. Rows are linear in ``y``, so
    the required step along the segment is found in closed form."""
    cons = problem.constraints
    A, b = cons.a(x), cons.b(x)
    y_in, s = phase_one(A, b)
    if s >= 0:
        raise InfeasibleProblem(f"phase-I optimum s = {s:.3e} >= 0")
    F_y = A @ np.asarray(y, dtype=float) - b
    F_in = A @ y_in - b
    eps = depth * -s
    lam = 0.0
    for fy, fin in zip(F_y, F_in):
        if fy > -eps:
            lam = max(lam, (fy + eps) / (fy - fin))
    lam = min(lam, 1.0)
    return (1.0 - lam) * y + lam * y_in
