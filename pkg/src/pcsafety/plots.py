"""Static SVG figures of completed runs.

Output is byte-stable: fixed canvas, fixed hash salt for element ids and no
creation date in the metadata.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 100,
    "svg.hashsalt": "pcsafety",
    "svg.fonttype": "none",
    "path.simplify": False,
}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return Path(path)


MAX_POINTS = 4000


def _every(run):
    """Stride keeping at most ``MAX_POINTS`` samples per line (the CSV keeps all)."""
    return slice(None, None, max(1, -(-len(run) // MAX_POINTS)))


def _check(runs):
    if not runs or any(len(r) == 0 for r in runs):
        raise ValueError("cannot plot an empty run")


def plot_positions(runs, centers, radius, target, path):
    _check(runs)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for xc in centers:
            ax.add_patch(plt.Circle(xc, radius, color="0.6", alpha=0.5, lw=0))
        for run in runs:
            sl = _every(run)
            ax.plot(run.x[sl, 0], run.x[sl, 1], lw=1.2)
            ax.plot(run.x[0, 0], run.x[0, 1], "ko", ms=3)
        ax.plot(*target, "r*", ms=8)
        ax.set_aspect("equal")
        ax.set_xlabel("x1 [m]")
        ax.set_ylabel("x2 [m]")
        return _save(fig, path)


def plot_velocities(run, path, reference=None):
    """Applied velocity components against the nominal (and optionally the
    exact filtered) input."""
    _check([run])
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(run.u.shape[1], 1, sharex=True)
        axes = np.atleast_1d(axes)
        sl = _every(run)
        for j, ax in enumerate(axes):
            ax.plot(run.t[sl], run.u_ref[sl, j], color="0.5", ls=":", label="nominal")
            if reference is not None:
                ax.plot(run.t[sl], reference[sl, j], "r--", lw=1, label="exact QP")
            ax.plot(run.t[sl], run.u[sl, j], "b", lw=1, label="applied")
            ax.set_ylabel(f"v{j + 1} [m/s]")
        axes[0].legend(loc="upper right", fontsize=7)
        axes[-1].set_xlabel("t [s]")
        return _save(fig, path)


def plot_force(runs, u_min, u_max, path):
    _check(runs)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for run in runs:
            sl = _every(run)
            ax.plot(run.t[sl], run.u[sl, 0], lw=1, label=run.controller)
        ax.axhline(u_min, color="k", ls=":", lw=0.8)
        ax.axhline(u_max, color="k", ls=":", lw=0.8)
        ax.set_xlabel("t [s]")
        ax.set_ylabel("u [N]")
        ax.legend(loc="upper right", fontsize=7)
        return _save(fig, path)


def angle_figure(runs, r):
    """Swing angle in degrees with the admissible band ``+-r``; call inside
    ``plt.rc_context(STYLE)``."""
    _check(runs)
    fig, ax = plt.subplots()
    for run in runs:
        sl = _every(run)
        ax.plot(run.t[sl], np.rad2deg(run.x[sl, 2]), lw=1, label=run.controller)
    lim = float(np.rad2deg(r))
    ax.axhline(lim, color="k", ls=":", lw=0.8)
    ax.axhline(-lim, color="k", ls=":", lw=0.8)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("theta [deg]")
    ax.legend(loc="upper right", fontsize=7)
    return fig


def plot_angle(runs, r, path):
    with plt.rc_context(STYLE):
        return _save(angle_figure(runs, r), path)
