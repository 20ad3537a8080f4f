"""Scenario configs: YAML files with nested sections and dotted keys.

Every leaf is addressed by a dotted key such as ``outer.Lambda_I`` or
``plant.stiffness``; nested mappings and flat dotted keys may be mixed.
Unknown keys are errors, and every error names the key and its line.
Numeric entries may be written with ``pi`` (``"pi/6"``, ``"-5*pi/6"``).
"""

from __future__ import annotations

import ast
import dataclasses
import operator
from pathlib import Path

import numpy as np
import yaml

from .controllers import CONTROLLERS, EstimateState, OuterConfig
from .model import PlantModel
from .servo import InnerGains
from .sim import ScenarioConfig
from .targets import Regulation, Sinusoid


class ConfigError(ValueError):
    """Config parse or validation failure, anchored to a source line."""

    def __init__(self, message, key=None, line=None, source=None):
        self.key = key
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}"
        if line is not None:
            where += f":{line}"
        prefix = f"{where}: " if where else ""
        field = f"{key}: " if key else ""
        super().__init__(f"{prefix}{field}{message}")


_PLANT_FIELDS = {f.name for f in dataclasses.fields(PlantModel)}
_ESTIMATE_FIELDS = {f.name for f in dataclasses.fields(EstimateState)}

# scalar keys outside the dataclass-backed sections
SCHEMA = {
    "name": str,
    "plant.model": str,
    "servo.mode": str, "servo.kp": "array", "servo.ki": "array", "servo.kd": "array",
    "controller.kind": str, "controller.friction": bool,
    "target.type": str, "target.x_d": "array", "target.offset": "array", "target.sin_amp": "array",
    "target.cos_amp": "array", "target.omega": float, "target.space": str, "target.units": str,
    "timing.dt_inner": float, "timing.dt_outer": float, "timing.duration": float, "timing.substeps": int,
    "state.q0": "array", "state.qd0": "array", "state.units": str,
    "monitor.lyapunov": bool, "monitor.ceiling": float,
    "noise.std": float, "noise.seed": int,
}
_ANNOTATED = {"int": int, "bool": bool, "str": str, "float": float, "float | None": float}
for _f in dataclasses.fields(OuterConfig):
    SCHEMA[f"outer.{_f.name}"] = _ANNOTATED.get(str(_f.type), "any")
for _n in _PLANT_FIELDS:
    SCHEMA[f"plant.{_n}"] = "array"
for _n in _ESTIMATE_FIELDS:
    SCHEMA[f"initial.{_n}"] = "array"

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
           ast.Pow: operator.pow}


def _eval_number(text: str) -> float:
    """Arithmetic on numbers and ``pi`` only."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return float(np.pi)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(f"not a number: {text!r}")

    return ev(ast.parse(text.strip(), mode="eval"))


def _number(v):
    if isinstance(v, bool):
        raise ValueError(f"expected a number, got {v!r}")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        return _eval_number(v)
    raise ValueError(f"expected a number, got {v!r}")


def _array(v):
    if isinstance(v, list):
        return np.array([_array(x) if isinstance(x, list) else _number(x) for x in v], dtype=float)
    return _number(v)


def _flatten(node, prefix, out, source):
    """Collect ``dotted.key -> (value, line)`` from a composed YAML node."""
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError("expected a mapping", prefix or None, node.start_mark.line + 1, source)
    loader = yaml.SafeLoader("")
    for knode, vnode in node.value:
        key = str(loader.construct_object(knode))
        full = f"{prefix}.{key}" if prefix else key
        line = knode.start_mark.line + 1
        if isinstance(vnode, yaml.MappingNode) and full not in SCHEMA:
            _flatten(vnode, full, out, source)
            continue
        if full in out:
            raise ConfigError("duplicate key", full, line, source)
        out[full] = (loader.construct_object(vnode, deep=True), line)


def _coerce(key, value, line, source):
    kind = SCHEMA.get(key)
    if kind is None:
        raise ConfigError("unknown key", key, line, source)
    try:
        if value is None:
            return None
        if kind == "array":
            return _array(value)
        if kind == "any":
            if isinstance(value, (bool, dict)) or value is None:
                return value
            if isinstance(value, str):
                try:
                    return _number(value)
                except ValueError:
                    return value
            return _array(value)
        if kind is float:
            return _number(value)
        if kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValueError(f"expected an integer, got {value!r}")
            return value
        if kind is bool:
            if not isinstance(value, bool):
                raise ValueError(f"expected true or false, got {value!r}")
            return value
        if not isinstance(value, str):
            raise ValueError(f"expected a string, got {value!r}")
        return value
    except ValueError as exc:
        raise ConfigError(str(exc), key, line, source) from None


def parse_config(text: str, source: str | None = None) -> dict:
    """Parse YAML text into ``{dotted_key: (value, line)}`` with coerced values."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"malformed YAML: {getattr(exc, 'problem', exc)}", None, line, source) from None
    if root is None:
        raise ConfigError("empty config", None, None, source)
    raw = {}
    _flatten(root, "", raw, source)
    return {k: (_coerce(k, v, line, source), line) for k, (v, line) in raw.items()}


def _section(entries, name):
    n = len(name) + 1
    return {k[n:]: v for k, (v, _) in entries.items() if k.startswith(name + ".")}


def build_scenario(entries: dict, source: str | None = None) -> ScenarioConfig:
    """Turn parsed entries into a validated :class:`ScenarioConfig`."""

    def line_of(key):
        return entries.get(key, (None, None))[1]

    def fail(msg, key):
        # anchor on the key itself, or on the first key of its section
        line = line_of(key)
        if line is None:
            sec = key.split(".")[0]
            lines = [ln for k, (_, ln) in entries.items() if k.startswith(sec + ".")]
            line = min(lines) if lines else None
        return ConfigError(msg, key, line, source)

    get = lambda key, default=None: entries[key][0] if key in entries and entries[key][0] is not None else default

    plant_kw = _section(entries, "plant")
    model_kind = plant_kw.pop("model", None)
    if "tool_angle" in plant_kw or "gravity" in plant_kw:
        for k in ("tool_angle", "gravity"):
            if k in plant_kw:
                plant_kw[k] = float(plant_kw[k])
    try:
        plant = PlantModel(**{k: v for k, v in plant_kw.items() if v is not None})
    except (ValueError, TypeError) as exc:
        raise fail(str(exc), "plant") from None
    if model_kind is not None:
        if model_kind not in ("rigid", "flexible"):
            raise fail(f"expected rigid or flexible, got {model_kind!r}", "plant.model")
        if (model_kind == "flexible") != plant.flexible:
            raise fail("a flexible plant needs plant.stiffness, a rigid one must not set it", "plant.model")

    try:
        servo = InnerGains(get("servo.mode", "pi_velocity"), get("servo.kp", 30.0), get("servo.ki", 15.0),
                           get("servo.kd"))
    except ValueError as exc:
        raise fail(str(exc), "servo.mode") from None

    kind = get("controller.kind")
    if kind is None:
        raise fail("missing controller kind", "controller.kind")
    if kind not in CONTROLLERS:
        raise fail(f"unknown controller {kind!r}; expected one of {sorted(CONTROLLERS)}", "controller.kind")

    outer_kw = _section(entries, "outer")
    for k, v in outer_kw.items():
        if isinstance(v, np.ndarray) and v.ndim == 0:
            outer_kw[k] = float(v)
    try:
        outer = OuterConfig(**outer_kw)
        initial = EstimateState(**{k: v for k, v in _section(entries, "initial").items() if v is not None})
    except (ValueError, TypeError) as exc:
        raise fail(str(exc), "outer") from None

    target = _build_target(entries, get, fail)

    units = get("state.units", "rad")
    if units not in ("rad", "deg"):
        raise fail(f"expected rad or deg, got {units!r}", "state.units")
    scale = np.pi / 180.0 if units == "deg" else 1.0
    q0 = get("state.q0", np.zeros(3)) * scale
    qd0 = get("state.qd0", np.zeros(3)) * scale

    kw = dict(
        name=get("name", Path(source).stem if source else "scenario"),
        plant=plant, servo=servo, controller=kind, outer=outer, initial=initial, target=target,
        q0=q0, qd0=qd0, controller_friction=get("controller.friction", False),
        monitor=get("monitor.lyapunov", True), noise_std=get("noise.std", 0.0), seed=get("noise.seed", 0),
    )
    for key, fld in (("timing.dt_inner", "dt_inner"), ("timing.dt_outer", "dt_outer"),
                     ("timing.duration", "duration"), ("timing.substeps", "substeps"),
                     ("monitor.ceiling", "ceiling")):
        if get(key) is not None:
            kw[fld] = get(key)
    try:
        return ScenarioConfig(**kw)
    except ValueError as exc:
        # validation messages lead with the offending field name
        first = str(exc).split()[0]
        key = {"noise_std": "noise.std", "ceiling": "monitor.ceiling"}.get(first, f"timing.{first}")
        raise fail(str(exc), key if key in SCHEMA else "timing") from None


def _build_target(entries, get, fail):
    ttype = get("target.type")
    if ttype is None:
        raise fail("missing target type", "target.type")
    units = get("target.units", "si")
    if units not in ("si", "deg"):
        raise fail(f"expected si or deg, got {units!r}", "target.units")
    scale = np.pi / 180.0 if units == "deg" else 1.0
    try:
        if ttype == "regulation":
            if get("target.x_d") is None:
                raise fail("regulation needs target.x_d", "target.x_d")
            return Regulation(get("target.x_d") * scale)
        if ttype == "sinusoid":
            zero = np.zeros(3)
            return Sinusoid(get("target.offset", zero) * scale, get("target.sin_amp", zero) * scale,
                            get("target.cos_amp", zero) * scale, get("target.omega", 1.0),
                            get("target.space", "joint"))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise fail(str(exc), "target.type") from None
    raise fail(f"unknown target type {ttype!r}; expected regulation or sinusoid", "target.type")


def load_config(path) -> ScenarioConfig:
    """Read and validate a scenario file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, None, str(path)) from None
    return build_scenario(parse_config(text, str(path)), str(path))


def loads_config(text: str, source: str = "<string>") -> ScenarioConfig:
    return build_scenario(parse_config(text, source), source)
