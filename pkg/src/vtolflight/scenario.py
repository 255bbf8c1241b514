"""Scenario description and its INI-style file format.

Sections: ``[vehicle]`` (true airframe and actuators), ``[controller]`` (the
controller's airframe model and options), ``[gains]`` (loop gains and
transition parameters), ``[environment]`` and ``[mission]``. Any key left
out keeps its default. Angles are given in degrees in keys ending in
``_deg``; vectors are comma separated.
"""

import configparser
import math
import re
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .actuators import ActuatorLimits
from .controller import ControllerConfig
from .inner import InnerGains
from .outer import OuterGains
from .plant import VehicleParams
from .transition import FsmConfig


class ScenarioError(ValueError):
    pass


@dataclass
class Environment:
    wind: np.ndarray = field(default_factory=lambda: np.array([-3.0, 1.0, 0.0]))
    gust_amplitude: float = 0.0
    pitot_sigma: float = 0.3


@dataclass
class Mission:
    start_position: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -50.0]))
    start_yaw: float = 0.0
    transition_time: float = 5.0
    back_transition_time: float = 75.0
    abort_time: float = -1.0            # negative: no abort
    fw_turn: float = math.pi            # heading change commanded in FW
    fw_turn_rate: float = math.radians(6.0)
    fw_turn_delay: float = 5.0


@dataclass
class Scenario:
    plant: VehicleParams = field(default_factory=lambda: VehicleParams(m=19.0))
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    env: Environment = field(default_factory=Environment)
    mission: Mission = field(default_factory=Mission)
    dt_plant: float = 0.001
    dt_inner: float = 0.004
    dt_ctl: float = 0.02
    duration: float = 150.0
    seed: int = 0

    @property
    def limits(self):
        return self.controller.limits

    def validate(self):
        problems = []
        if self.duration <= 0:
            problems.append("duration must be positive")
        if self.dt_plant <= 0 or self.dt_plant > 0.02:
            problems.append("dt_plant must lie in (0, 0.02]")
        for name, dt in (("dt_inner", self.dt_inner), ("dt_ctl", self.dt_ctl)):
            k = dt / self.dt_plant
            if dt <= 0 or abs(k - round(k)) > 1e-9 or round(k) < 1:
                problems.append(f"{name} must be a positive multiple of dt_plant")
        k = self.dt_ctl / self.dt_inner
        if self.dt_inner > 0 and (abs(k - round(k)) > 1e-9 or round(k) < 1):
            problems.append("dt_ctl must be a multiple of dt_inner")
        if self.env.pitot_sigma < 0 or self.env.gust_amplitude < 0:
            problems.append("noise and gust levels must be non-negative")
        if problems:
            raise ScenarioError("; ".join(problems))
        return self

    @property
    def steps(self):
        """(plant steps per inner tick, inner ticks per outer tick)."""
        return (int(round(self.dt_inner / self.dt_plant)),
                int(round(self.dt_ctl / self.dt_inner)))


# ----------------------------------------------------------------------------
# file format

_VEC = {"J", "wind", "start_position", "k_att", "kp_rate", "ki_rate", "dI_rate"}
_INT = {"seed"}
_BOOL = {"feedforward", "aero_in_mc"}
_LIMITS = {f.name for f in fields(ActuatorLimits)}


def _convert(key, raw):
    if key in _VEC:
        return tuple(float(x) for x in raw.split(","))
    if key in _INT:
        return int(raw)
    if key in _BOOL:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    return float(raw)


def _key_lines(text):
    out, section = {}, None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            section = m.group(1).strip()
        elif section and s and s[0] not in "#;":
            key = re.split(r"[=:]", s, 1)[0].strip()
            out[(section, key)] = n
    return out


_SECTIONS = ("vehicle", "controller", "gains", "environment", "mission")


def _targets():
    """Key -> (section, object slot) for every settable field."""
    t = {}
    for f in fields(VehicleParams):
        t[("vehicle", f.name)] = "plant"
        t[("controller", f.name)] = "model"
    for name in _LIMITS:
        t[("vehicle", name)] = "limits"
    for name in ("dt_ctl", "dt_inner", "airdata_eps", "feedforward", "aero_in_mc"):
        t[("controller", name)] = "ctl"
    for f in fields(OuterGains):
        t[("gains", f.name)] = "outer"
    for f in fields(InnerGains):
        if f.name != "feedforward":
            t[("gains", f.name)] = "inner"
    for f in fields(FsmConfig):
        if f.name != "abort_map":
            t[("gains", f.name)] = "fsm"
    for name in ("wind", "gust_amplitude", "pitot_sigma", "seed"):
        t[("environment", name)] = "env"
    for f in fields(Mission):
        t[("mission", f.name)] = "mission"
    for name in ("duration", "dt_plant"):
        t[("mission", name)] = "sim"
    return t


_TARGETS = _targets()


def _resolve(section, key):
    """Map a file key to (slot, field name, is-degrees)."""
    deg = key.endswith("_deg")
    name = key[:-4] if deg else key
    slot = _TARGETS.get((section, name))
    if slot is None:
        raise KeyError(f"unknown key {key!r} in [{section}]")
    return slot, name, deg


def _apply(values):
    """Build a Scenario from {(section, key): raw string}."""
    groups = {s: {} for s in ("plant", "model", "limits", "ctl", "outer", "inner",
                              "fsm", "env", "mission", "sim")}
    for (section, key), (raw, where) in values.items():
        try:
            slot, name, deg = _resolve(section, key)
            val = _convert(name, raw)
        except (KeyError, ValueError) as exc:
            raise ScenarioError(f"{where}: {exc.args[0] if exc.args else exc}") from None
        if deg:
            val = tuple(math.radians(x) for x in val) if isinstance(val, tuple) else math.radians(val)
        groups[slot][name] = val

    problems = []

    def build(cls, kw, base=None):
        try:
            return replace(base, **kw) if base is not None else cls(**kw)
        except (TypeError, ValueError) as exc:
            problems.append(f"{cls.__name__}: {exc}")
            return base if base is not None else cls()

    plant_kw = dict(groups["plant"])
    plant_kw.setdefault("m", 19.0)
    plant = build(VehicleParams, plant_kw)
    model = build(VehicleParams, groups["model"])
    limits = build(ActuatorLimits, groups["limits"])
    outer = build(OuterGains, groups["outer"])
    inner_kw = dict(groups["inner"])
    ctl = dict(groups["ctl"])
    if "feedforward" in ctl:
        inner_kw["feedforward"] = ctl.pop("feedforward")
    inner = build(InnerGains, inner_kw)
    fsm = build(FsmConfig, groups["fsm"])
    cfg = ControllerConfig(model, outer, inner, fsm, limits,
                           bool(ctl.get("aero_in_mc", False)),
                           float(ctl.get("airdata_eps", 1e-3)))
    env_kw = dict(groups["env"])
    seed = int(env_kw.pop("seed", 0))
    if "wind" in env_kw:
        if len(env_kw["wind"]) != 3:
            problems.append("wind needs three components")
        env_kw["wind"] = np.array(env_kw["wind"][:3] + (0.0,) * (3 - len(env_kw["wind"])))
    env = build(Environment, env_kw)
    mis_kw = dict(groups["mission"])
    if "start_position" in mis_kw:
        if len(mis_kw["start_position"]) != 3:
            problems.append("start_position needs three components")
        mis_kw["start_position"] = np.array(mis_kw["start_position"][:3])
    mission = build(Mission, mis_kw)
    if problems:
        raise ScenarioError("; ".join(problems))
    s = Scenario(plant, cfg, env, mission,
                 dt_plant=groups["sim"].get("dt_plant", 0.001),
                 dt_inner=ctl.get("dt_inner", 0.004),
                 dt_ctl=ctl.get("dt_ctl", 0.02),
                 duration=groups["sim"].get("duration", 150.0), seed=seed)
    return s.validate()


def parse_override(text):
    """'section.key=value' -> ((section, key), value)."""
    if "=" not in text:
        raise ScenarioError(f"override {text!r} is not of the form section.key=value")
    lhs, value = text.split("=", 1)
    if "." not in lhs:
        raise ScenarioError(f"override {text!r} needs a section, e.g. vehicle.m=19")
    section, key = lhs.strip().split(".", 1)
    if section not in _SECTIONS:
        raise ScenarioError(f"unknown section {section!r} in override {text!r}")
    return (section, key.strip()), value.strip()


def loads_scenario(text, overrides=(), source="<string>"):
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ScenarioError(f"parse error: {exc}") from None
    lines = _key_lines(text)
    values = {}
    for section in cp.sections():
        if section not in _SECTIONS:
            n = next((i for i, l in enumerate(text.splitlines(), 1)
                      if l.strip() == f"[{section}]"), "?")
            raise ScenarioError(f"{source}, line {n}: unknown section [{section}]")
        for key, raw in cp.items(section):
            values[(section, key)] = (raw, f"{source}, line {lines.get((section, key), '?')}")
    for ov in overrides:
        k, v = parse_override(ov)
        values[k] = (v, f"override {ov!r}")
    return _apply(values)


def load_scenario(path, overrides=()):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return loads_scenario(text, overrides, source=str(path))


def default_scenario(**kw):
    return replace(Scenario(), **kw).validate()
