"""Closed-loop setups for the obstacle-avoidance and cart-pole examples."""
from __future__ import annotations

from functools import partial

import numpy as np

from .cbf_models import ExponentialCbfCartPole, ObstacleCbf, build_cartpole_rows, build_obstacle_rows
from .plants import CartPoleParams, CertificateSpec, ClosedLoopSetup, cartpole_rhs, integrator_rhs, integrator_step, rk4_step
from .tv_qp import BarrierProblem, QuadraticObjective, Signal


def obstacle_setup(centers, radius, alpha, k_d, target, c0=1.0):
    """2-D integrator ``xdot = v`` tracking ``v_d = -k_d (x - x_d)`` around discs."""
    target = np.asarray(target, dtype=float)
    obstacles = [ObstacleCbf(np.asarray(xc, dtype=float), radius, alpha) for xc in centers]
    objective = QuadraticObjective.tracking(
        u_ref=lambda x, theta: -k_d * (x - target),
        m=2,
        u_ref_jac_x=lambda x, theta: -k_d * np.eye(2),
    )
    problem = BarrierProblem(objective, build_obstacle_rows(obstacles), c0)

    def min_h(x):
        return min(o.h(x) for o in obstacles)

    return ClosedLoopSetup(
        problem=problem,
        m=2,
        step_plant=integrator_step,
        rhs=integrator_rhs,
        u_ref=objective.H,
        barriers=[o.h for o in obstacles],
        certificate=CertificateSpec(min_h, alpha, ObstacleCbf.b_h),
    )


def reference_force(t):
    """Open-loop force ``4 sin t cos t``."""
    return np.array([4.0 * np.sin(t) * np.cos(t)])


def reference_force_rate(t):
    return np.array([4.0 * np.cos(2.0 * t)])


def cartpole_setup(params=None, r=np.deg2rad(5.0), mu=7.5, alpha=7.5, u_min=-3.0, u_max=3.0, c0=1.0, substeps=1, b_h=None):
    """Cart-pole following ``u_d(t)`` under an exponential CBF on the swing angle.

    ``b_h`` bounds ``|grad h_e|`` for the safety certificate; without it the
    certificate is not logged.
    """
    params = params or CartPoleParams()
    cbf = ExponentialCbfCartPole(r, mu, alpha)
    objective = QuadraticObjective(
        Q=np.eye(1),
        H=lambda x, theta: np.asarray(theta, dtype=float),
        H_jac_x=lambda x, theta: np.zeros((1, 4)),
        H_jac_theta=lambda x, theta: np.eye(1),
    )
    problem = BarrierProblem(objective, build_cartpole_rows(params, cbf, u_min, u_max), c0)
    rhs = partial(cartpole_rhs, params=params)
    return ClosedLoopSetup(
        problem=problem,
        m=1,
        step_plant=lambda q, u, h: rk4_step(rhs, q, u, h, substeps),
        rhs=rhs,
        u_ref=lambda x, theta: theta,
        signal=Signal(reference_force, reference_force_rate),
        barriers=[cbf.h, cbf.h_e],
        certificate=None if b_h is None else CertificateSpec(cbf.h_e, alpha, b_h),
    )
