import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import constant_problem, fd_gradient, fd_jacobian, random_qp, rel_err, sample_interior, toy_barrier_minimizer, toy_problem
from pcsafety import tv_qp
from pcsafety.errors import ConfigurationError, InfeasibleEvaluation, PredictionUnavailable
from pcsafety.scenarios import obstacle_setup
from pcsafety.tv_qp import LinearConstraintSet, QuadraticObjective, Signal

seeds = st.integers(min_value=0, max_value=2**32 - 1)

X_ACTIVE = np.array([0.1, 1.0])


def example1_problem(c=1.1):
    return obstacle_setup([[1.0, 1.0]], 0.8, 4.0, 1.1, [2.5, 3.0], c0=c).problem


# --- constraint evaluation --------------------------------------------------

def test_toy_constraint_interior():
    F = tv_qp.eval_constraints(toy_problem(), np.array([2.0]), None)
    assert F == pytest.approx([-1.0])
    assert tv_qp.is_strictly_feasible(F)


def test_toy_constraint_boundary():
    F = tv_qp.eval_constraints(toy_problem(), np.array([1.0]), None)
    assert F == pytest.approx([0.0])
    assert not tv_qp.is_strictly_feasible(F)


def test_example1_residual_at_zero_input():
    # a_1 = -(x - x_c)/|x - x_c| = [1, 0], b_1 = alpha h = 4 * 0.1
    F = tv_qp.eval_constraints(example1_problem(), np.zeros(2), X_ACTIVE)
    assert F == pytest.approx([-0.4], abs=1e-12)


def test_dimension_mismatch():
    with pytest.raises(ConfigurationError):
        tv_qp.eval_constraints(toy_problem(), np.zeros(2), None)


def test_objective_and_rows_must_agree():
    objective = QuadraticObjective(np.eye(2), lambda x, th: np.zeros(2))
    rows = LinearConstraintSet(lambda x: np.ones((1, 3)), lambda x: np.ones(1), 1, 3)
    with pytest.raises(ConfigurationError):
        tv_qp.BarrierProblem(objective, rows)


def test_q_must_be_positive_definite():
    with pytest.raises(ConfigurationError):
        QuadraticObjective(np.diag([1.0, 0.0]), lambda x, th: np.zeros(2))


def test_q_c_is_smallest_eigenvalue_of_hessian_of_f0():
    obj = QuadraticObjective(np.diag([1.0, 0.25]), lambda x, th: np.zeros(2))
    assert obj.q_c == pytest.approx(0.5)


def test_tracking_objective_with_slack():
    obj = QuadraticObjective.tracking(lambda x, th: np.array([1.0, -2.0]), m=2, slack_weight=3.0)
    assert np.allclose(obj.Q, np.diag([1.0, 1.0, 3.0]))
    assert np.allclose(obj.H(None, None), [1.0, -2.0, 0.0])


# --- barrier value ----------------------------------------------------------

def test_fu_at_unit_slack():
    assert tv_qp.eval_fu(toy_problem(100.0), np.array([2.0]), None) == pytest.approx(4.0)


def test_fu_hand_value():
    assert tv_qp.eval_fu(toy_problem(100.0), np.array([1.5]), None) == pytest.approx(2.25 - 0.01 * np.log(0.5), abs=1e-12)
    assert tv_qp.eval_fu(toy_problem(100.0), np.array([1.5]), None) == pytest.approx(2.256931, abs=1e-6)


def test_fu_outside_raises():
    with pytest.raises(InfeasibleEvaluation):
        tv_qp.eval_fu(toy_problem(100.0), np.array([0.999]), None)
    with pytest.raises(InfeasibleEvaluation):
        tv_qp.grad_y(toy_problem(100.0), np.array([1.0]), None)


def test_barrier_blows_up_towards_boundary():
    prob = toy_problem(100.0)
    values = [tv_qp.eval_fu(prob, np.array([1.0 + 10.0**-k]), None) for k in range(2, 15)]
    assert np.all(np.diff(values) > 0)
    assert values[-1] > 1.3


# --- gradient ---------------------------------------------------------------

def test_gradient_vanishes_at_toy_barrier_minimizer():
    c = 100.0
    y_c = toy_barrier_minimizer(c)
    assert y_c == pytest.approx(1.00497512, abs=1e-6)
    assert abs(tv_qp.grad_y(toy_problem(c), np.array([y_c]), None)[0]) < 1e-9


def test_gradient_unconstrained_limit():
    G = tv_qp.grad_y(toy_problem(1e12), np.array([3.0]), None)
    assert G == pytest.approx([6.0], abs=1e-6)


def test_gradient_sign_pushes_away_from_boundary():
    # the barrier part of the gradient points out of the feasible side
    prob = constant_problem([[1.0]], [0.0], [[-1.0]], [-1.0], c=1.0)
    G_bar = tv_qp.grad_y(prob, np.array([1.1]), None) - 2.0 * 1.1
    assert G_bar[0] < 0


def test_example1_gradient_matches_fd():
    prob = example1_problem()
    v = np.array([0.3, 2.2])  # 0.1 inside the active row
    G = tv_qp.grad_y(prob, v, X_ACTIVE)
    fd = fd_gradient(lambda y: tv_qp.eval_fu(prob, y, X_ACTIVE), v, 1e-4)
    assert rel_err(G, fd) < 1e-6


# --- Hessian ----------------------------------------------------------------

def test_hessian_far_interior():
    prob = constant_problem(np.diag([1.0, 2.0]), [0, 0], [[1.0, 0.0]], [10.0], c=1e12)
    Hm = tv_qp.hess_yy(prob, np.zeros(2), None)
    assert np.allclose(Hm, 2 * np.diag([1.0, 2.0]), atol=1e-6)


def test_hessian_toy_hand_value():
    assert tv_qp.hess_yy(toy_problem(1.0), np.array([2.0]), None)[0, 0] == pytest.approx(3.0)


def test_grad_and_hess_agree_with_separate_calls():
    rng = np.random.default_rng(3)
    Q, H, A, b, y0 = random_qp(rng, 3, 5)
    prob = constant_problem(Q, H, A, b, 7.0)
    G, Hm = tv_qp.grad_and_hess(prob, y0, None)
    assert np.array_equal(G, tv_qp.grad_y(prob, y0, None))
    assert np.allclose(Hm, tv_qp.hess_yy(prob, y0, None), rtol=1e-14)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_barrier_terms_are_rank_one(seed):
    rng = np.random.default_rng(seed)
    Q, H, A, b, y0 = random_qp(rng, 3)
    c = float(rng.uniform(0.5, 50.0))
    prob = constant_problem(Q, H, A, b, c)
    s = b - A @ y0
    for a, s_i, T in zip(A, s, tv_qp.barrier_term_hessians(prob, y0, None)):
        w = np.linalg.eigvalsh(T)
        expected = a @ a / (c * s_i**2)
        assert w[-1] == pytest.approx(expected, rel=1e-9)
        assert np.all(np.abs(w[:-1]) <= 1e-9 * expected)
        assert np.linalg.matrix_rank(T, tol=1e-9 * expected) <= 1


# --- random-point consistency -----------------------------------------------

def _check_point(prob, y, x, slack_min, a_norm_max):
    eps = slack_min / (100.0 * max(a_norm_max, 1.0))
    G, Hm = tv_qp.grad_and_hess(prob, y, x)
    g_fd = fd_gradient(lambda z: tv_qp.eval_fu(prob, z, x), y, eps)
    H_fd = fd_jacobian(lambda z: tv_qp.grad_y(prob, z, x), y, eps)
    return rel_err(G, g_fd), rel_err(Hm, H_fd), np.linalg.eigvalsh(Hm)[0]


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_random_qp_derivatives_match_fd(seed):
    rng = np.random.default_rng(seed)
    Q, H, A, b, y0 = random_qp(rng)
    c = float(10 ** rng.uniform(0, 3))
    prob = constant_problem(Q, H, A, b, c)
    y = sample_interior(rng, A, b, y0, 1e-3)
    s = b - A @ y
    eg, eh, lam = _check_point(prob, y, None, s.min(), np.linalg.norm(A, axis=1).max())
    assert eg <= 1e-6
    assert eh <= 1e-5
    # f_u is at least as convex as f_0, whose Hessian is 2Q
    assert lam >= 2 * np.linalg.eigvalsh(Q)[0] * (1 - 1e-12)
    assert lam >= prob.objective.q_c * (1 - 1e-12)


# --- mixed partials ---------------------------------------------------------

def test_mixed_zero_when_static():
    prob = example1_problem()
    out = tv_qp.mixed_grad_yt(prob, np.array([0.3, 2.2]), X_ACTIVE, np.zeros(2))
    assert np.array_equal(out, np.zeros(2))


def test_mixed_example1_matches_directional_fd():
    prob = example1_problem()
    v = np.array([0.3, 2.2])
    xdot = v  # integrator plant
    eps = 1e-6
    fd = (tv_qp.grad_y(prob, v, X_ACTIVE + eps * xdot) - tv_qp.grad_y(prob, v, X_ACTIVE - eps * xdot)) / (2 * eps)
    out = tv_qp.mixed_grad_yt(prob, v, X_ACTIVE, xdot)
    assert rel_err(out, fd) < 1e-4


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_mixed_multi_obstacle_matches_directional_fd(seed):
    rng = np.random.default_rng(seed)
    centers = [[1.0, 4.0], [4.0, 4.0], [1.5, 1.0], [4.5, 1.0]]
    prob = obstacle_setup(centers, 0.8, 4.0, 0.2, [2.5, 3.0], c0=float(rng.uniform(0.5, 20))).problem
    while True:
        x = rng.uniform(-1, 6, size=2)
        if min(np.linalg.norm(x - np.array(c)) for c in centers) > 0.85:
            break
    A, b = prob.constraints.a(x), prob.constraints.b(x)
    v = sample_interior(rng, A, b, np.zeros(2), 1e-2)
    xdot = rng.normal(size=2)
    eps = 1e-6
    fd = (tv_qp.grad_y(prob, v, x + eps * xdot) - tv_qp.grad_y(prob, v, x - eps * xdot)) / (2 * eps)
    assert rel_err(tv_qp.mixed_grad_yt(prob, v, x, xdot), fd) < 1e-4


def test_mixed_barrier_schedule_drift():
    prob = example1_problem()
    v = np.array([0.3, 2.2])
    c0, rho, t = 1.1, 0.9, 0.7
    c = c0 * np.exp(rho * t)
    c_dot = rho * c
    out = tv_qp.mixed_grad_yt(prob, v, X_ACTIVE, c=c, c_dot=c_dot)
    A, s = prob.constraints.a(X_ACTIVE), prob.constraints.b(X_ACTIVE) - prob.constraints.a(X_ACTIVE) @ v
    assert np.allclose(out, -(c_dot / c**2) * A.T @ (1 / s), rtol=1e-12)
    eps = 1e-6
    fd = (tv_qp.grad_y(prob, v, X_ACTIVE, c=c + eps) - tv_qp.grad_y(prob, v, X_ACTIVE, c=c - eps)) / (2 * eps) * c_dot
    assert rel_err(out, fd) < 1e-6


def test_mixed_signal_channel():
    obj = QuadraticObjective(np.eye(1), lambda x, th: th, lambda x, th: np.zeros((1, 1)), lambda x, th: np.eye(1))
    rows = LinearConstraintSet(lambda x: np.array([[1.0]]), lambda x: np.array([3.0]), 1, 1,
                               lambda x: np.zeros((1, 1, 1)), lambda x: np.zeros((1, 1)))
    prob = tv_qp.BarrierProblem(obj, rows, 5.0)
    sig = Signal(lambda t: np.array([np.sin(t)]), lambda t: np.array([np.cos(t)]))
    t, eps = 0.4, 1e-6
    y = np.array([0.2])
    fd = (tv_qp.grad_y(prob, y, np.zeros(1), sig.value(t + eps)) - tv_qp.grad_y(prob, y, np.zeros(1), sig.value(t - eps))) / (2 * eps)
    out = tv_qp.mixed_grad_yt(prob, y, np.zeros(1), np.zeros(1), sig.value(t), sig.rate(t))
    assert out == pytest.approx(fd, rel=1e-7)


def test_signal_without_derivative_is_piecewise_constant():
    assert np.array_equal(Signal(lambda t: np.array([t, 2 * t])).rate(1.0), np.zeros(2))


def test_mixed_without_jacobians_is_unavailable():
    obj = QuadraticObjective(np.eye(1), lambda x, th: np.zeros(1))
    rows = LinearConstraintSet(lambda x: np.array([[1.0]]), lambda x: np.array([3.0]), 1, 1)
    prob = tv_qp.BarrierProblem(obj, rows, 5.0)
    with pytest.raises(PredictionUnavailable):
        tv_qp.mixed_grad_yt(prob, np.zeros(1), np.zeros(1), np.ones(1))


# --- suboptimality ----------------------------------------------------------

def test_suboptimality_bound_arithmetic():
    prob = constant_problem(np.eye(2), [0, 0], np.eye(4, 2), np.ones(4), c=100.0)
    assert tv_qp.suboptimality_bound(prob) == pytest.approx(0.04)


def test_toy_suboptimality_gap():
    c = 100.0
    gap = toy_barrier_minimizer(c) ** 2 - 1.0
    assert gap == pytest.approx(0.0099751, abs=1e-6)
    assert gap <= tv_qp.suboptimality_bound(toy_problem(c))
