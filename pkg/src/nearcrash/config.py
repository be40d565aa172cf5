"""Engine configuration: one JSON document, every field flag-overridable.

Defaults sit at the midpoints of the ranges that worked in field tuning:
detector confidence 0.4, size windows of 12 samples, center windows of
18, a 3 s height-TTC threshold with the width threshold at 2.25x that,
and a motion band of (-0.75, 0.05).

The camera section carries only frame geometry and nominal fps; the
engine never uses a focal length (that is the point of the TTC method),
so a placeholder focal of 1.0 backs the shared CameraSpec type.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

from .gps import GpsAffine
from .rules import RuleConfig
from .streams import CameraSpec


class ConfigError(ValueError):
    """Configuration rejected; the message carries the offending field path."""


DEFAULTS: Dict[str, Dict[str, Any]] = {
    "camera": {"frame_width": 1280.0, "frame_height": 720.0, "fps": 24.0},
    "tracker": {"confidence_min": 0.4, "iou_min": 0.3, "max_age": 5, "min_hits": 3},
    "regression": {
        "size_window_len": 12,
        "center_window_len": 18,
        "slope_epsilon": 0.001,
    },
    "rules": {
        "delta": 3.0,
        "phi": 6.75,
        "alpha": -0.75,
        "beta": 0.05,
        "c_los": None,
        "cooldown": 10.0,
    },
    "pipeline": {
        "mode": "offline",
        "buffer_seconds": 10.0,
        "process_min_interval": 0.0,
    },
    "gps": {
        "lat_scale": 1.666,
        "lat_offset": -31.30174,
        "lon_scale": 1.666,
        "lon_offset": 81.25186,
        "sample_period": 3.0,
    },
}


@dataclass(frozen=True)
class TrackerParams:
    confidence_min: float = 0.4
    iou_min: float = 0.3
    max_age: int = 5
    min_hits: int = 3


@dataclass(frozen=True)
class RegressionParams:
    size_window_len: int = 12
    center_window_len: int = 18
    slope_epsilon: float = 0.001


@dataclass(frozen=True)
class PipelineParams:
    mode: str = "offline"
    buffer_seconds: float = 10.0
    # consumer throttle for load testing and deterministic drop simulation
    process_min_interval: float = 0.0


@dataclass(frozen=True)
class GpsParams:
    affine: GpsAffine = GpsAffine()
    sample_period: float = 3.0


@dataclass(frozen=True)
class EngineConfig:
    camera: CameraSpec
    tracker: TrackerParams
    regression: RegressionParams
    rules: RuleConfig
    pipeline: PipelineParams
    gps: GpsParams

    @property
    def window_capacity(self) -> int:
        return max(self.regression.size_window_len, self.regression.center_window_len)


def _check(cond: bool, path: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def _merge(defaults: dict, user: dict, path: str = "") -> dict:
    merged = copy.deepcopy(defaults)
    for key, value in user.items():
        here = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"{here}: unknown field")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{here}: expected an object")
            merged[key] = _merge(defaults[key], value, here)
        else:
            merged[key] = value
    return merged


def _number(raw: dict, path: str, key: str) -> float:
    value = raw[key]
    here = f"{path}.{key}"
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{here}: expected a number, got {value!r}")
    return float(value)


def _integer(raw: dict, path: str, key: str) -> int:
    value = raw[key]
    here = f"{path}.{key}"
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{here}: expected an integer, got {value!r}")
    return value


def build_config(user: Optional[dict] = None) -> EngineConfig:
    """Validate a raw config dict against the schema and defaults."""
    raw = _merge(DEFAULTS, user or {})

    cam = raw["camera"]
    width = _number(cam, "camera", "frame_width")
    height = _number(cam, "camera", "frame_height")
    fps = _number(cam, "camera", "fps")
    _check(width > 0, "camera.frame_width", "must be > 0")
    _check(height > 0, "camera.frame_height", "must be > 0")
    _check(fps > 0, "camera.fps", "must be > 0")
    camera = CameraSpec(
        focal_px=1.0, frame_width=width, frame_height=height, fps=fps
    )

    trk = raw["tracker"]
    confidence_min = _number(trk, "tracker", "confidence_min")
    iou_min = _number(trk, "tracker", "iou_min")
    max_age = _integer(trk, "tracker", "max_age")
    min_hits = _integer(trk, "tracker", "min_hits")
    _check(0.0 <= confidence_min <= 1.0, "tracker.confidence_min", "must be in [0, 1]")
    _check(0.0 < iou_min < 1.0, "tracker.iou_min", "must be in (0, 1)")
    _check(max_age >= 0, "tracker.max_age", "must be >= 0")
    _check(min_hits >= 1, "tracker.min_hits", "must be >= 1")
    tracker = TrackerParams(
        confidence_min=confidence_min, iou_min=iou_min, max_age=max_age, min_hits=min_hits
    )

    reg = raw["regression"]
    size_len = _integer(reg, "regression", "size_window_len")
    center_len = _integer(reg, "regression", "center_window_len")
    slope_eps = _number(reg, "regression", "slope_epsilon")
    _check(size_len >= 2, "regression.size_window_len", "must be >= 2")
    _check(center_len >= 2, "regression.center_window_len", "must be >= 2")
    _check(slope_eps > 0, "regression.slope_epsilon", "must be > 0")
    regression = RegressionParams(
        size_window_len=size_len, center_window_len=center_len, slope_epsilon=slope_eps
    )

    rul = raw["rules"]
    c_los = rul["c_los"]
    if c_los is not None:
        c_los = _number(rul, "rules", "c_los")
    try:
        rules = RuleConfig(
            delta=_number(rul, "rules", "delta"),
            phi=_number(rul, "rules", "phi"),
            alpha=_number(rul, "rules", "alpha"),
            beta=_number(rul, "rules", "beta"),
            c_los=c_los,
            cooldown=_number(rul, "rules", "cooldown"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"rules: {exc}") from exc

    pipe = raw["pipeline"]
    mode = pipe["mode"]
    _check(mode in ("offline", "live"), "pipeline.mode", "must be 'offline' or 'live'")
    buffer_s = _number(pipe, "pipeline", "buffer_seconds")
    min_interval = _number(pipe, "pipeline", "process_min_interval")
    _check(buffer_s > 0, "pipeline.buffer_seconds", "must be > 0")
    _check(min_interval >= 0, "pipeline.process_min_interval", "must be >= 0")
    pipeline = PipelineParams(
        mode=mode, buffer_seconds=buffer_s, process_min_interval=min_interval
    )

    g = raw["gps"]
    lat_scale = _number(g, "gps", "lat_scale")
    lon_scale = _number(g, "gps", "lon_scale")
    period = _number(g, "gps", "sample_period")
    _check(lat_scale != 0, "gps.lat_scale", "must be nonzero")
    _check(lon_scale != 0, "gps.lon_scale", "must be nonzero")
    _check(period > 0, "gps.sample_period", "must be > 0")
    gps = GpsParams(
        affine=GpsAffine(
            lat_scale=lat_scale,
            lat_offset=_number(g, "gps", "lat_offset"),
            lon_scale=lon_scale,
            lon_offset=_number(g, "gps", "lon_offset"),
        ),
        sample_period=period,
    )

    return EngineConfig(
        camera=camera,
        tracker=tracker,
        regression=regression,
        rules=rules,
        pipeline=pipeline,
        gps=gps,
    )


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> EngineConfig:
    """Load a config file (optional) and apply dotted-path overrides."""
    user: dict = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fp:
            try:
                user = json.load(fp)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be an object")
    if overrides:
        for dotted, value in overrides.items():
            _apply_override(user, dotted, value)
    return build_config(user)


def _apply_override(user: dict, dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    schema: Any = DEFAULTS
    for part in parts[:-1]:
        if not isinstance(schema, dict) or part not in schema:
            raise ConfigError(f"{dotted}: unknown field")
        schema = schema[part]
    leaf = parts[-1]
    if not isinstance(schema, dict) or leaf not in schema or isinstance(schema[leaf], dict):
        raise ConfigError(f"{dotted}: unknown field")
    node = user
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[leaf] = value


def override_flags() -> List[str]:
    """All dotted override names, for CLI flag generation."""
    flags = []
    for section, fields in DEFAULTS.items():
        for name in fields:
            flags.append(f"{section}.{name}")
    return flags
