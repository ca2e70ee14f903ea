"""Scenario config files: ``[section]`` headers with ``key = value`` lines.

Vectors are whitespace separated (``target = 2.5 3.0``), lists of vectors
use ``;`` between entries, angles accept a ``deg`` suffix and are stored in
radians. Unknown sections and keys are rejected.
"""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigurationError

FAMILIES = ("obstacle", "cartpole")
CONTROLLERS = ("pc_gradient", "pc_newton", "oracle", "nominal")


def _kind(kind, **kw):
    return field(metadata={"kind": kind}, **kw)


@dataclass(frozen=True)
class ScenarioSection:
    id: str = _kind("str")
    family: str = _kind("str")
    horizon: float = _kind("float")
    dt: float = _kind("float")
    seed: int = _kind("int", default=0)


@dataclass(frozen=True)
class ControllerSection:
    type: str = _kind("str", default="pc_gradient")
    gamma: float = _kind("float", default=1.0)
    c0: float = _kind("float", default=1.0)
    rho: float = _kind("float", default=0.0)
    c_max: float = _kind("float", default=1e9)
    prediction: str = _kind("str", default="analytic")
    fd_threshold: float = _kind("float", default=0.01)
    backtrack_factor: float = _kind("float", default=0.5)
    max_backtracks: int = _kind("int", default=30)


@dataclass(frozen=True)
class ObstacleSection:
    starts: tuple = _kind("vecs")
    target: tuple = _kind("vec")
    k_d: float = _kind("float")
    centers: tuple = _kind("vecs")
    radius: float = _kind("float")
    alpha: float = _kind("float")
    initial_input: str = _kind("str", default="zero")
    target_tol: float = _kind("float", default=0.05)


@dataclass(frozen=True)
class CartPoleSection:
    m_c: float = _kind("float", default=1.0)
    m_p: float = _kind("float", default=1.0)
    l: float = _kind("float", default=2.0)
    g: float = _kind("float", default=9.8)
    r: float = _kind("angle", default=float(np.deg2rad(5.0)))
    mu: float = _kind("float", default=7.5)
    alpha: float = _kind("float", default=7.5)
    u_min: float = _kind("float", default=-3.0)
    u_max: float = _kind("float", default=3.0)
    q0: tuple = _kind("vec", default=(0.0, 0.0, 0.0, 0.0))
    substeps: int = _kind("int", default=1)
    b_h: Optional[float] = _kind("optfloat", default=None)


@dataclass(frozen=True)
class OutputSection:
    dir: str = _kind("str", default="out")
    plots: bool = _kind("bool", default=True)


SECTIONS = {
    "scenario": ScenarioSection,
    "controller": ControllerSection,
    "obstacle": ObstacleSection,
    "cartpole": CartPoleSection,
    "output": OutputSection,
}


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: ScenarioSection
    controller: ControllerSection = ControllerSection()
    obstacle: Optional[ObstacleSection] = None
    cartpole: Optional[CartPoleSection] = None
    output: OutputSection = OutputSection()


def _parse_value(kind, raw, where):
    raw = raw.strip()
    try:
        if kind == "str":
            return raw
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "optfloat":
            return None if raw.lower() == "none" else float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if kind == "angle":
            if raw.endswith("deg"):
                return float(np.deg2rad(float(raw[:-3])))
            if raw.endswith("rad"):
                return float(raw[:-3])
            return float(raw)
        if kind == "vec":
            return tuple(float(v) for v in raw.split())
        if kind == "vecs":
            return tuple(tuple(float(v) for v in part.split()) for part in raw.split(";") if part.strip())
    except ValueError:
        raise ConfigurationError(f"{where}: cannot parse {raw!r} as {kind}") from None
    raise AssertionError(kind)


def _format_value(kind, value):
    if kind in ("str",):
        return value
    if kind == "bool":
        return "true" if value else "false"
    if kind == "optfloat" and value is None:
        return "none"
    if kind in ("float", "angle", "optfloat"):
        return repr(float(value))
    if kind == "int":
        return str(value)
    if kind == "vec":
        return " ".join(repr(float(v)) for v in value)
    if kind == "vecs":
        return "; ".join(" ".join(repr(float(v)) for v in vec) for vec in value)
    raise AssertionError(kind)


def parse_config(text, source="<string>"):
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: {exc}") from None
    sections = {}
    for name in cp.sections():
        if name not in SECTIONS:
            raise ConfigurationError(f"{source}: unknown section [{name}]")
        cls = SECTIONS[name]
        fields = {f.name: f for f in dataclasses.fields(cls)}
        values = {}
        for key, raw in cp.items(name):
            if key not in fields:
                raise ConfigurationError(f"{source}: unknown key {name}.{key}")
            values[key] = _parse_value(fields[key].metadata["kind"], raw, f"{name}.{key}")
        try:
            sections[name] = cls(**values)
        except TypeError as exc:
            missing = [f for f in fields if f not in values and fields[f].default is dataclasses.MISSING]
            raise ConfigurationError(f"{source}: section [{name}] is missing {', '.join(missing)}") from exc
    if "scenario" not in sections:
        raise ConfigurationError(f"{source}: missing [scenario] section")
    config = ScenarioConfig(**sections)
    validate(config)
    return config


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, source=str(path))


def dump_config(config):
    lines = []
    for name in SECTIONS:
        section = getattr(config, name)
        if section is None:
            continue
        lines.append(f"[{name}]")
        for f in dataclasses.fields(section):
            lines.append(f"{f.name} = {_format_value(f.metadata['kind'], getattr(section, f.name))}")
        lines.append("")
    return "\n".join(lines)


def _require(cond, where, msg):
    if not cond:
        raise ConfigurationError(f"{where}: {msg}")


def validate(config):
    sc = config.scenario
    _require(sc.family in FAMILIES, "scenario.family", f"must be one of {FAMILIES}, got {sc.family!r}")
    _require(sc.horizon > 0, "scenario.horizon", f"must be positive (got {sc.horizon})")
    _require(sc.dt > 0, "scenario.dt", f"must be positive (got {sc.dt})")
    _require(sc.dt <= sc.horizon, "scenario.dt", "must not exceed the horizon")

    ct = config.controller
    _require(ct.type in CONTROLLERS, "controller.type", f"must be one of {CONTROLLERS}, got {ct.type!r}")
    _require(ct.gamma > 0, "controller.gamma", f"must be positive (got {ct.gamma})")
    _require(ct.c0 > 0, "controller.c0", f"must be positive (got {ct.c0})")
    _require(ct.rho >= 0, "controller.rho", f"must be non-negative (got {ct.rho})")
    _require(ct.c_max >= ct.c0, "controller.c_max", "must be at least c0")
    _require(ct.prediction in ("analytic", "fd", "off"), "controller.prediction", f"unknown mode {ct.prediction!r}")
    _require(ct.fd_threshold > 0, "controller.fd_threshold", "must be positive")
    _require(0 < ct.backtrack_factor < 1, "controller.backtrack_factor", "must lie in (0, 1)")
    _require(ct.max_backtracks >= 0, "controller.max_backtracks", "must be non-negative")

    if sc.family == "obstacle":
        ob = config.obstacle
        _require(ob is not None, "obstacle", "section required for family 'obstacle'")
        _require(len(ob.starts) >= 1, "obstacle.starts", "needs at least one start")
        _require(all(len(s) == 2 for s in ob.starts), "obstacle.starts", "entries must be 2-vectors")
        _require(len(ob.target) == 2, "obstacle.target", "must be a 2-vector")
        _require(len(ob.centers) >= 1 and all(len(c) == 2 for c in ob.centers), "obstacle.centers", "need 2-vectors")
        _require(ob.radius > 0, "obstacle.radius", f"must be positive (got {ob.radius})")
        _require(ob.alpha > 0, "obstacle.alpha", f"must be positive (got {ob.alpha})")
        _require(ob.k_d > 0, "obstacle.k_d", f"must be positive (got {ob.k_d})")
        _require(ob.initial_input in ("zero", "phase1"), "obstacle.initial_input", "must be 'zero' or 'phase1'")
        _require(ob.target_tol > 0, "obstacle.target_tol", "must be positive")
        for s in ob.starts:
            for c in ob.centers:
                d = float(np.hypot(s[0] - c[0], s[1] - c[1]))
                _require(d > ob.radius, "obstacle.starts", f"start {s} lies inside the obstacle at {c}")
    else:
        cp = config.cartpole
        _require(cp is not None, "cartpole", "section required for family 'cartpole'")
        for name in ("m_c", "m_p", "l", "g", "r", "mu", "alpha"):
            _require(getattr(cp, name) > 0, f"cartpole.{name}", f"must be positive (got {getattr(cp, name)})")
        _require(cp.u_min < cp.u_max, "cartpole.u_min", "must be below u_max")
        _require(len(cp.q0) == 4, "cartpole.q0", "must be a 4-vector")
        _require(abs(cp.q0[2]) < cp.r, "cartpole.q0", "initial angle must lie inside the admissible range")
        _require(cp.substeps >= 1, "cartpole.substeps", "must be at least 1")
        _require(cp.b_h is None or cp.b_h > 0, "cartpole.b_h", "must be positive or none")
