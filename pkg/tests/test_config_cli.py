import json
import re

import matplotlib.pyplot as plt
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import CONFIGS
from pcsafety import cli, plots, runner
from pcsafety.config import (
    ControllerSection,
    ObstacleSection,
    ScenarioConfig,
    ScenarioSection,
    dump_config,
    load_config,
    parse_config,
)
from pcsafety.errors import ConfigurationError
from pcsafety.pc_solver import effective_rate

SHORT_OBSTACLE = """\
[scenario]
id = short_obstacle
family = obstacle
horizon = {horizon}
dt = 0.001

[controller]
type = pc_gradient
gamma = 15.5
c0 = 1.1
rho = 0.9

[obstacle]
starts = 0.0 0.5
target = 2.5 3.0
k_d = 1.1
centers = 1.0 1.0
radius = {radius}
alpha = 4.0

[output]
plots = false
"""

SHORT_CARTPOLE = """\
[scenario]
id = short_cartpole
family = cartpole
horizon = 0.3
dt = 0.001

[controller]
type = pc_gradient
gamma = 20.0
c0 = 2.3
rho = 0.01
prediction = off

[cartpole]
r = 5 deg
"""


def write_cfg(tmp_path, text, name="s.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


# --- config -----------------------------------------------------------------

@pytest.mark.parametrize("name", ["example1_single", "example1_multi", "example2_cartpole"])
def test_bundled_config_round_trip(name):
    config = load_config(CONFIGS / f"{name}.cfg")
    assert parse_config(dump_config(config)) == config


def test_bundled_parameters():
    single = load_config(CONFIGS / "example1_single.cfg")
    assert (single.controller.gamma, single.controller.c0, single.controller.rho) == (15.5, 1.1, 0.9)
    assert single.obstacle.k_d == 1.1 and single.obstacle.alpha == 4.0 and single.scenario.dt == 0.001
    multi = load_config(CONFIGS / "example1_multi.cfg")
    assert multi.obstacle.starts == ((0, 0), (0, 2), (0, 4), (0, 6), (3, 6))
    assert multi.obstacle.centers == ((1, 4), (4, 4), (1.5, 1), (4.5, 1))
    assert (multi.obstacle.k_d, multi.controller.c0, multi.controller.rho, multi.scenario.dt) == (0.2, 0.9, 0.2, 0.01)
    cart = load_config(CONFIGS / "example2_cartpole.cfg")
    assert cart.cartpole.r == pytest.approx(np.deg2rad(5.0))
    assert (cart.controller.gamma, cart.controller.c0, cart.controller.rho) == (20.0, 2.3, 0.01)
    assert (cart.cartpole.u_min, cart.cartpole.u_max, cart.cartpole.mu, cart.cartpole.alpha) == (-3.0, 3.0, 7.5, 7.5)


finite = st.floats(0.01, 100.0, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(
    gamma=finite, c0=finite, rho=st.floats(0.0, 2.0), k_d=finite, radius=st.floats(0.05, 0.5),
    target=st.tuples(st.floats(-10, 10), st.floats(-10, 10)),
    method=st.sampled_from(["pc_gradient", "pc_newton", "oracle", "nominal"]),
)
def test_config_round_trip_property(gamma, c0, rho, k_d, radius, target, method):
    config = ScenarioConfig(
        scenario=ScenarioSection(id="p", family="obstacle", horizon=1.0, dt=0.01),
        controller=ControllerSection(type=method, gamma=gamma, c0=c0, rho=rho),
        obstacle=ObstacleSection(
            starts=((0.0, 0.0), (3.0, 3.0)), target=target, k_d=k_d,
            centers=((1.0, 1.0),), radius=radius, alpha=4.0,
        ),
    )
    assert parse_config(dump_config(config)) == config


def test_angles_in_degrees_and_radians():
    deg = parse_config(SHORT_CARTPOLE)
    rad = parse_config(SHORT_CARTPOLE.replace("5 deg", "0.08726646259971647"))
    assert deg.cartpole.r == pytest.approx(rad.cartpole.r, abs=1e-15)


@pytest.mark.parametrize("text, field", [
    (SHORT_CARTPOLE + "\n[extra]\nkey = 1\n", "extra"),
    (SHORT_CARTPOLE.replace("r = 5 deg", "r = 5 deg\nradius = 3"), "cartpole.radius"),
    (SHORT_OBSTACLE.format(horizon=1.0, radius=-0.8), "obstacle.radius"),
    (SHORT_OBSTACLE.format(horizon=1.0, radius=0.8).replace("gamma = 15.5", "gamma = fast"), "controller.gamma"),
    (SHORT_OBSTACLE.format(horizon=1.0, radius=0.8).replace("c0 = 1.1", "c0 = 0.0"), "controller.c0"),
    (SHORT_OBSTACLE.format(horizon=1.0, radius=0.8).replace("centers = 1.0 1.0", "centers = 0.0 0.4"), "obstacle.starts"),
], ids=["section", "key", "radius", "parse", "c0", "start_inside"])
def test_invalid_configs_name_the_field(text, field):
    with pytest.raises(ConfigurationError, match=re.escape(field)):
        parse_config(text)


# --- CLI --------------------------------------------------------------------

def test_cli_negative_radius_exit_code(tmp_path, capsys):
    path = write_cfg(tmp_path, SHORT_OBSTACLE.format(horizon=0.1, radius=-0.8))
    assert cli.main(["run", str(path), "--out", str(tmp_path / "o")]) == 1
    assert "obstacle.radius" in capsys.readouterr().err


def test_cli_missing_file(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "nope.cfg")]) == 1
    assert "cannot read" in capsys.readouterr().err


GOLDEN_OBSTACLE = "run,t,x0,x1,y0,y1,u0,u1,h0,sigma_norm,h_N,c,backtracks,step_time_ms"
GOLDEN_CARTPOLE = "run,t,x0,x1,x2,x3,y0,u0,h0,h1,sigma_norm,h_N,c,backtracks,step_time_ms"


@pytest.mark.parametrize("text, golden, rows", [
    (SHORT_OBSTACLE.format(horizon=0.1, radius=0.8), GOLDEN_OBSTACLE, 101),
    (SHORT_CARTPOLE, GOLDEN_CARTPOLE, 301),
], ids=["obstacle", "cartpole"])
def test_cli_run_artifacts(tmp_path, capsys, text, golden, rows):
    path = write_cfg(tmp_path, text)
    out = tmp_path / "out"
    assert cli.main(["run", str(path), "--out", str(out), "--no-plots"]) == 0
    lines = (out / "trajectory.csv").read_text().splitlines()
    assert lines[0] == golden
    assert len(lines) == rows + 1
    report = json.loads((out / "timing.json").read_text())
    assert set(report) == {"controller", "steps", "mean_ms", "max_ms", "p99_ms"}
    assert (out / "events.log").exists()
    assert "interior" in capsys.readouterr().out


def test_cli_no_timing_is_byte_identical(tmp_path):
    path = write_cfg(tmp_path, SHORT_CARTPOLE)
    for name in ("a", "b"):
        assert cli.main(["run", str(path), "--out", str(tmp_path / name), "--no-timing"]) == 0
    for artifact in ("trajectory.csv", "events.log", "inputs.svg", "angle.svg"):
        assert (tmp_path / "a" / artifact).read_bytes() == (tmp_path / "b" / artifact).read_bytes(), artifact
    last = (tmp_path / "a" / "trajectory.csv").read_text().splitlines()[-1]
    assert last.endswith(",0")


def test_cli_seed_flag(tmp_path):
    path = write_cfg(tmp_path, SHORT_OBSTACLE.format(horizon=0.05, radius=0.8))
    assert cli.main(["run", str(path), "--out", str(tmp_path / "o"), "--seed", "7", "--no-plots"]) == 0


def test_cli_suite_prints_table(tmp_path, capsys):
    suite = tmp_path / "suite"
    suite.mkdir()
    write_cfg(suite, SHORT_CARTPOLE, "a.cfg")
    assert cli.main(["suite", str(suite), "--out", str(tmp_path / "o"), "--no-plots"]) == 0
    out = capsys.readouterr().out
    assert re.search(r"PASS\s+short_cartpole\s+interior=ok", out)


def test_cli_suite_empty_dir(tmp_path):
    assert cli.main(["suite", str(tmp_path)]) == 1


# --- plots ------------------------------------------------------------------

def test_angle_plot_has_admissible_band(scenario_runs):
    cp = scenario_runs.config("example2_cartpole").cartpole
    _, runs, _ = scenario_runs.get("example2_cartpole")
    with plt.rc_context(plots.STYLE):
        fig = plots.angle_figure(runs, cp.r)
        levels = sorted(
            line.get_ydata()[0] for line in fig.axes[0].get_lines() if np.ptp(line.get_ydata()) == 0 and len(line.get_ydata()) == 2
        )
        plt.close(fig)
    assert levels == pytest.approx([-5.0, 5.0])


def test_empty_run_is_rejected(tmp_path):
    with pytest.raises(ValueError):
        plots.plot_angle([], 0.1, tmp_path / "a.svg")


def test_identical_runs_give_identical_svg(tmp_path, scenario_runs):
    setup, runs, _ = scenario_runs.get("example1_single")
    a = plots.plot_velocities(runs[0], tmp_path / "a.svg")
    b = plots.plot_velocities(runs[0], tmp_path / "b.svg")
    assert a.read_bytes() == b.read_bytes()
    assert b"<dc:date>" not in a.read_bytes()


# --- compare ----------------------------------------------------------------

def test_compare_frozen_decay_rate(tmp_path):
    config = parse_config(SHORT_OBSTACLE.format(horizon=0.4, radius=0.8))
    summary, errors, barrier, results = runner.compare_controllers(config, tmp_path, frozen=True)
    q_c = 2.0
    for kind in ("pc_gradient", "pc_newton"):
        gamma_hat = effective_rate(kind[3:], 15.5, q_c)
        assert summary["decay"][kind]["gamma_hat"] == pytest.approx(gamma_hat)
        rate = summary["decay"][kind]["fitted_rate"][0]
        assert abs(rate - gamma_hat) <= 0.1 * gamma_hat, (kind, rate, gamma_hat)
    header = (tmp_path / "tracking_error.csv").read_text().splitlines()[0]
    assert header == "run,t,err_pc_gradient,err_pc_newton,err_barrier_pc_gradient,err_barrier_pc_newton"


def test_compare_tracking_error_shrinks_on_example1(tmp_path):
    config = parse_config(SHORT_OBSTACLE.format(horizon=3.0, radius=0.8))
    summary, errors, _, results = runner.compare_controllers(config, tmp_path)
    for kind in ("pc_gradient", "pc_newton"):
        err = errors[kind][0]
        n = len(err) - 1
        early = np.nanmean(err[: n // 10])
        late = np.nanmean(err[-n // 10 :])
        assert late < early, (kind, early, late)
    assert {"oracle", "pc_gradient", "pc_newton"} <= set(summary["controllers"])
    assert json.loads((tmp_path / "timing.json").read_text())["frozen"] is False


def test_compare_cli(tmp_path, capsys):
    path = write_cfg(tmp_path, SHORT_OBSTACLE.format(horizon=0.2, radius=0.8))
    assert cli.main(["compare", str(path), "--out", str(tmp_path / "o"), "--frozen"]) == 0
    out = capsys.readouterr().out
    assert "speedup" in out and "fitted decay rate" in out
