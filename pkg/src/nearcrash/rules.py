"""Near-crash decision rules.

Two rules must pass together. The size rule requires the height-TTC under
a tight threshold and the width-TTC under a looser one, both positive;
requiring both catches the case where a truncated box makes the height
grow while the width shrinks. The motion rule bounds the product of the
horizontal drift rate, the normalized center offset, and the normalized
bottom-edge distance from the frame bottom, which separates collision
courses and center-bound drifts from safe passes.

A per-track cooldown suppresses re-triggering on the same encounter.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from .streams import CameraSpec
from .ttc import MotionEstimate, TtcEstimate, normalized_center


@dataclass(frozen=True)
class RuleConfig:
    delta: float = 3.0          # height-TTC threshold, seconds
    phi: float = 6.75           # width-TTC threshold, seconds
    alpha: float = -0.75        # motion-product lower bound
    beta: float = 0.05          # motion-product upper bound
    c_los: Optional[float] = None  # center line of sight; None -> principal_x
    cooldown: float = 10.0      # per-track re-trigger suppression, seconds

    def __post_init__(self):
        if not (0 < self.delta < self.phi):
            raise ValueError(
                f"need 0 < delta < phi, got delta={self.delta}, phi={self.phi}"
            )
        if not (self.alpha < 0 < self.beta):
            raise ValueError(
                f"need alpha < 0 < beta, got alpha={self.alpha}, beta={self.beta}"
            )
        if self.cooldown < 0:
            raise ValueError("cooldown must be >= 0")


def check_size_rule(ttc: Optional[TtcEstimate], cfg: RuleConfig) -> bool:
    """True iff both TTCs exist, are positive, and are under their thresholds."""
    if ttc is None or ttc.ttc_h is None or ttc.ttc_w is None:
        return False
    return 0 < ttc.ttc_h < cfg.delta and 0 < ttc.ttc_w < cfg.phi


def _clamp(x: float, lo: float, hi: float) -> float:
    return max(lo, min(hi, x))


def check_motion_rule(
    motion: Optional[MotionEstimate],
    latest_cx: float,
    latest_by: float,
    camera: CameraSpec,
    cfg: RuleConfig,
) -> Tuple[bool, float]:
    """Evaluate the horizontal-motion band; returns (passed, product).

    The product is omega * x_norm * y_norm with x_norm in [-1, 1] and
    y_norm in [0, 1], so a fixed band admits larger drift rates for
    targets near the bottom of the frame.
    """
    if motion is None:
        return False, 0.0
    x_norm = _clamp(normalized_center(latest_cx, camera, cfg.c_los), -1.0, 1.0)
    y_norm = _clamp((camera.frame_height - latest_by) / camera.frame_height, 0.0, 1.0)
    product = motion.omega * x_norm * y_norm
    return cfg.alpha < product < cfg.beta, product


@dataclass(frozen=True)
class NearCrashDecision:
    triggered: bool
    size_rule_pass: bool
    motion_rule_pass: bool
    ttc: Optional[TtcEstimate]
    motion_product: float


def event_type_for(kind: str) -> str:
    return "vehicle-pedestrian" if kind == "pedestrian" else "vehicle-vehicle"


class RuleEngine:
    """Applies both rules per track per frame with trigger debouncing."""

    def __init__(self, cfg: RuleConfig, camera: CameraSpec):
        self.cfg = cfg
        self.camera = camera
        self._last_trigger: Dict[int, float] = {}

    def decide(
        self,
        track,
        ttc: Optional[TtcEstimate],
        motion: Optional[MotionEstimate],
        now: float,
    ) -> NearCrashDecision:
        size_ok = check_size_rule(ttc, self.cfg)
        latest = track.window.latest()
        motion_ok, product = check_motion_rule(
            motion, latest.cx, latest.by, self.camera, self.cfg
        )
        triggered = size_ok and motion_ok and self._cooldown_over(track.id, now)
        if triggered:
            self._last_trigger[track.id] = now
        return NearCrashDecision(
            triggered=triggered,
            size_rule_pass=size_ok,
            motion_rule_pass=motion_ok,
            ttc=ttc,
            motion_product=product,
        )

    def _cooldown_over(self, track_id: int, now: float) -> bool:
        last = self._last_trigger.get(track_id)
        return last is None or now - last >= self.cfg.cooldown

    def forget(self, track_id: int) -> None:
        """Drop debounce state for a dead track; ids are never reused."""
        self._last_trigger.pop(track_id, None)
