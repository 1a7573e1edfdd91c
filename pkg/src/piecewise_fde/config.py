"""Run configuration: JSON schema, presets and flag overrides.

A config document looks like::

    {
      "preset_name": "case1",
      "seed": 0,
      "params": {"r": 1.0, "lambda1": 2.0, "lambda2": 1.0, "lambda3": 1.5,
                 "lambda4": 1.0, "sigma1": 0.1, "sigma2": 0.1},
      "initial": {"x": 1.0, "y": 2.0},
      "schedule": {"step": 0.01, "segments": [
          {"kind": "classical", "t_start": 0.0, "t_end": 3.33},
          {"kind": "caputo", "t_start": 3.33, "t_end": 6.67, "delta": 0.91},
          {"kind": "stochastic", "t_start": 6.67, "t_end": 10.0}]}
    }

Every key is optional when a preset supplies it; unknown keys are errors.
Layering order is preset, then file, then command-line flags.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .model import LotkaVolterraParams, State
from .solvers import PiecewiseSchedule, SegmentKind, SegmentSpec
from .special_functions import FractionalOrder

__all__ = [
    "ConfigError",
    "RunConfig",
    "PRESETS",
    "BREAKPOINT_CONVENTION",
    "preset_document",
    "parse_config",
    "config_from_document",
    "load_document",
]

SCHEMA_VERSION = 1
MAX_SEED = 2**64 - 1

BREAKPOINT_CONVENTION = (
    "P=10, P1=P/3, P2=2P/3 snapped to the step grid; breakpoints and r=1 are conventions, "
    "not values taken from the source model"
)


class ConfigError(ValueError):
    def __init__(self, field: str, constraint: str) -> None:
        super().__init__(f"{field}: {constraint}")
        self.field = field
        self.constraint = constraint


@dataclass(frozen=True)
class RunConfig:
    params: LotkaVolterraParams
    initial: State
    schedule: PiecewiseSchedule
    seed: int = 0
    preset_name: str | None = None

    def to_document(self) -> dict[str, Any]:
        p = self.params
        segments = []
        for seg in self.schedule.segments:
            entry: dict[str, Any] = {"kind": seg.kind.value, "t_start": seg.t_start, "t_end": seg.t_end}
            if seg.kind.is_fractional:
                entry["delta"] = seg.delta.delta
            segments.append(entry)
        return {
            "schema": SCHEMA_VERSION,
            "preset_name": self.preset_name,
            "seed": self.seed,
            "params": {
                "r": p.r,
                "lambda1": p.lambda1,
                "lambda2": p.lambda2,
                "lambda3": p.lambda3,
                "lambda4": p.lambda4,
                "sigma1": p.sigma1,
                "sigma2": p.sigma2,
            },
            "initial": {"x": self.initial.x, "y": self.initial.y},
            "schedule": {"step": self.schedule.step, "segments": segments},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_document(), sort_keys=True, separators=(",", ":"))

    @property
    def fractional_delta(self) -> float | None:
        for seg in self.schedule.segments:
            if seg.kind.is_fractional:
                return seg.delta.delta
        return None


def _three_segments(middle: str, delta: float, step: float = 0.01, horizon: float = 10.0) -> dict:
    p1 = round(horizon / 3.0 / step) * step
    p2 = round(2.0 * horizon / 3.0 / step) * step
    return {
        "step": step,
        "segments": [
            {"kind": "classical", "t_start": 0.0, "t_end": p1},
            {"kind": middle, "t_start": p1, "t_end": p2, "delta": delta},
            {"kind": "stochastic", "t_start": p2, "t_end": horizon},
        ],
    }


def _lv(l3: float, l4: float, s1: float, s2: float) -> dict:
    return {"r": 1.0, "lambda1": 2.0, "lambda2": 1.0, "lambda3": l3, "lambda4": l4, "sigma1": s1, "sigma2": s2}


def _preset(name: str, middle: str, delta: float, params: dict) -> dict:
    return {
        "preset_name": name,
        "seed": 0,
        "params": params,
        "initial": {"x": 1.0, "y": 2.0},
        "schedule": _three_segments(middle, delta),
    }


def _build_presets() -> dict[str, dict]:
    presets = {
        "case1": _preset("case1", "caputo", 0.91, _lv(1.5, 1.0, 0.1, 0.1)),
        "case2": _preset("case2", "atangana-baleanu", 0.8, _lv(1.5, 1.0, 0.1, 0.11)),
        "case3": _preset("case3", "caputo-fabrizio", 0.94, _lv(1.5, 1.0, 0.1, 0.11)),
    }
    chaotic = {
        "case1": ("caputo", (0.6, 0.68, 0.85, 0.97), _lv(1.5, 1.0, 0.01, 0.02)),
        "case2": ("atangana-baleanu", (0.75, 0.82, 0.89, 0.98), _lv(1.7, 1.7, 0.01, 0.02)),
        "case3": ("caputo-fabrizio", (0.68, 0.78, 0.87, 0.98), _lv(1.5, 1.0, 0.01, 0.02)),
    }
    for case, (middle, deltas, params) in chaotic.items():
        for d in deltas:
            name = f"{case}-chaotic-{d:g}"
            presets[name] = _preset(name, middle, d, params)
        # bare name picks the first panel
        presets[f"{case}-chaotic"] = dict(presets[f"{case}-chaotic-{deltas[0]:g}"], preset_name=f"{case}-chaotic")
    presets["lipschitz-demo"] = {
        "preset_name": "lipschitz-demo",
        "seed": 0,
        "params": {"r": 0.0, "lambda1": 0.2, "lambda2": 0.1, "lambda3": 0.1, "lambda4": 0.11, "sigma1": 0.0, "sigma2": 0.0},
        "initial": {"x": 0.5, "y": 0.5},
        "schedule": {"step": 0.01, "segments": [{"kind": "caputo", "t_start": 0.0, "t_end": 1.0, "delta": 0.95}]},
    }
    return presets


PRESETS: dict[str, dict] = _build_presets()


def preset_document(name: str) -> dict:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}") from None


_TOP_KEYS = {"schema", "preset_name", "seed", "params", "initial", "schedule"}
_PARAM_KEYS = ("r", "lambda1", "lambda2", "lambda3", "lambda4", "sigma1", "sigma2")
_INITIAL_KEYS = ("x", "y")
_SCHEDULE_KEYS = {"step", "segments"}
_SEGMENT_KEYS = {"kind", "t_start", "t_end", "delta"}


def _reject_unknown(mapping: Mapping, allowed, where: str) -> None:
    if not isinstance(mapping, Mapping):
        raise ConfigError(where or "config", "must be a JSON object")
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"{where}.{key}" if where else key, "unknown key")


def _number(value: Any, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(field, f"must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(field, "must be finite")
    return value


def _merge(base: dict, update: Mapping) -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        if key in ("params", "initial") and isinstance(value, Mapping) and isinstance(out.get(key), dict):
            out[key].update(value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def config_from_document(doc: Mapping) -> RunConfig:
    """Validate a complete config document and build the :class:`RunConfig`."""
    _reject_unknown(doc, _TOP_KEYS, "")
    if "schema" in doc and doc["schema"] != SCHEMA_VERSION:
        raise ConfigError("schema", f"unsupported schema version {doc['schema']!r}")
    for key in ("params", "initial", "schedule"):
        if key not in doc:
            raise ConfigError(key, "missing (give a preset or set it explicitly)")

    raw = doc["params"]
    _reject_unknown(raw, _PARAM_KEYS, "params")
    values = {}
    for key in _PARAM_KEYS:
        if key not in raw:
            raise ConfigError(f"params.{key}", "missing")
        values[key] = _number(raw[key], f"params.{key}")
        if key != "r" and values[key] < 0:
            raise ConfigError(f"params.{key}", f"must be >= 0, got {values[key]!r}")
    params = LotkaVolterraParams(**values)

    raw = doc["initial"]
    _reject_unknown(raw, _INITIAL_KEYS, "initial")
    coords = []
    for key in _INITIAL_KEYS:
        if key not in raw:
            raise ConfigError(f"initial.{key}", "missing")
        coords.append(_number(raw[key], f"initial.{key}"))
    initial = State(*coords)

    raw = doc["schedule"]
    _reject_unknown(raw, _SCHEDULE_KEYS, "schedule")
    if "step" not in raw:
        raise ConfigError("schedule.step", "missing")
    step = _number(raw["step"], "schedule.step")
    if step <= 0:
        raise ConfigError("schedule.step", f"must be > 0, got {step!r}")
    segs_raw = raw.get("segments")
    if not isinstance(segs_raw, list) or not segs_raw:
        raise ConfigError("schedule.segments", "must be a non-empty list")
    segments = []
    for i, seg in enumerate(segs_raw):
        where = f"schedule.segments[{i}]"
        _reject_unknown(seg, _SEGMENT_KEYS, where)
        try:
            kind = SegmentKind(seg.get("kind"))
        except ValueError:
            choices = ", ".join(k.value for k in SegmentKind)
            raise ConfigError(f"{where}.kind", f"must be one of {choices}, got {seg.get('kind')!r}") from None
        for key in ("t_start", "t_end"):
            if key not in seg:
                raise ConfigError(f"{where}.{key}", "missing")
        t0 = _number(seg["t_start"], f"{where}.t_start")
        t1 = _number(seg["t_end"], f"{where}.t_end")
        if kind.is_fractional and "delta" not in seg:
            raise ConfigError(f"{where}.delta", "required for fractional segments")
        try:
            delta = FractionalOrder(_number(seg.get("delta", 1.0), f"{where}.delta"))
        except ValueError as exc:
            raise ConfigError(f"{where}.delta", str(exc)) from None
        try:
            segments.append(SegmentSpec(kind, t0, t1, delta))
        except ValueError as exc:
            raise ConfigError(where, str(exc)) from None
    try:
        schedule = PiecewiseSchedule(tuple(segments), step)
    except ValueError as exc:
        raise ConfigError("schedule", str(exc)) from None

    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= MAX_SEED:
        raise ConfigError("seed", f"must be an integer in [0, 2**64 - 1], got {seed!r}")
    name = doc.get("preset_name")
    if name is not None and not isinstance(name, str):
        raise ConfigError("preset_name", "must be a string or null")
    return RunConfig(params, initial, schedule, seed, name)


def load_document(path: str | Path) -> dict:
    """Read a JSON config, or the ``# config:`` header line of an output CSV."""
    text = Path(path).read_text(encoding="utf-8")
    if text.startswith("#"):
        for line in text.splitlines():
            if line.startswith("# config: "):
                text = line[len("# config: ") :]
                break
        else:
            raise ConfigError("config", f"{path} has a comment header but no '# config:' line")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"{path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config", "top level must be a JSON object")
    return doc


def _apply_overrides(doc: dict, overrides: Mapping[str, Any]) -> dict:
    doc = copy.deepcopy(doc)
    for key in _PARAM_KEYS:
        if overrides.get(key) is not None:
            doc.setdefault("params", {})[key] = overrides[key]
    for flag, key in (("x0", "x"), ("y0", "y")):
        if overrides.get(flag) is not None:
            doc.setdefault("initial", {})[key] = overrides[flag]
    if overrides.get("seed") is not None:
        doc["seed"] = overrides["seed"]
    sched = doc.get("schedule")
    if overrides.get("h") is not None:
        if sched is None:
            raise ConfigError("h", "no schedule to apply the step to")
        sched["step"] = overrides["h"]
    if overrides.get("delta") is not None:
        if sched is None:
            raise ConfigError("delta", "no schedule to apply the order to")
        for seg in sched.get("segments", []):
            if SegmentKind(seg.get("kind")).is_fractional:
                seg["delta"] = overrides["delta"]
    times = {k: overrides.get(k) for k in ("P1", "P2", "P")}
    if any(v is not None for v in times.values()):
        segs = sched.get("segments", []) if sched else []
        if len(segs) != 3:
            raise ConfigError("P1/P2/P", "breakpoint flags need a three-segment schedule")
        if times["P1"] is not None:
            segs[0]["t_end"] = segs[1]["t_start"] = times["P1"]
        if times["P2"] is not None:
            segs[1]["t_end"] = segs[2]["t_start"] = times["P2"]
        if times["P"] is not None:
            segs[2]["t_end"] = times["P"]
    return doc


def parse_config(
    path: str | Path | None = None,
    *,
    preset: str | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> RunConfig:
    """Layer preset, file and flag overrides, then validate."""
    doc: dict = preset_document(preset) if preset else {}
    if path is not None:
        file_doc = load_document(path)
        _reject_unknown(file_doc, _TOP_KEYS, "")
        if not preset and file_doc.get("preset_name") in PRESETS and not {"params", "initial", "schedule"} <= file_doc.keys():
            doc = preset_document(file_doc["preset_name"])
        doc = _merge(doc, file_doc)
    if overrides:
        doc = _apply_overrides(doc, overrides)
    if not doc:
        raise ConfigError("config", "nothing to run: give --preset and/or --config")
    return config_from_document(doc)
