"""Sliding-window regressions over per-track box samples.

Height and width slopes give time-to-collision without any camera
intrinsics: TTC is the ratio of box size to size-change rate, and the
focal length cancels out of that ratio. The horizontal-center slope gives
the drift rate of the target across the frame.

Timestamps are carried per sample and used as-is, so non-uniform frame
intervals do not distort the slopes.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from .streams import CameraSpec


class DegenerateFitError(ValueError):
    """Raised when a regression has fewer than two samples or no time spread."""


@dataclass(frozen=True)
class Sample:
    """Box measurements for one matched frame of one track."""

    t: float
    h: float
    w: float
    cx: float
    by: float

    def __post_init__(self):
        if self.h <= 0 or self.w <= 0:
            raise ValueError("sample dimensions must be > 0")


class SampleWindow:
    """Ring buffer of samples with strictly increasing timestamps."""

    def __init__(self, capacity: int):
        if capacity < 2:
            raise ValueError("window capacity must be >= 2")
        self.capacity = capacity
        self._buf: deque = deque(maxlen=capacity)

    def append(self, sample: Sample) -> None:
        if self._buf and sample.t <= self._buf[-1].t:
            raise ValueError(
                f"sample timestamps must increase: {sample.t} after {self._buf[-1].t}"
            )
        self._buf.append(sample)

    def latest(self) -> Sample:
        return self._buf[-1]

    def newest(self, n: int) -> List[Sample]:
        if n > len(self._buf):
            raise ValueError(f"asked for {n} samples, have {len(self._buf)}")
        return list(self._buf)[-n:]

    def __len__(self) -> int:
        return len(self._buf)

    def __iter__(self):
        return iter(self._buf)


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    n: int
    fitted_latest: float
    t_mean: float
    value_mean: float
    t_latest: float


def fit_slope(points: Sequence[Tuple[float, float]]) -> RegressionResult:
    """Ordinary least squares over (t, value) points.

    Raises DegenerateFitError for fewer than two points or zero time
    variance.
    """
    n = len(points)
    if n < 2:
        raise DegenerateFitError(f"need >= 2 samples, got {n}")
    t_mean = sum(t for t, _ in points) / n
    v_mean = sum(v for _, v in points) / n
    sxx = sum((t - t_mean) ** 2 for t, _ in points)
    if sxx == 0.0:
        raise DegenerateFitError("all samples share one timestamp")
    sxy = sum((t - t_mean) * (v - v_mean) for t, v in points)
    slope = sxy / sxx
    intercept = v_mean - slope * t_mean
    t_latest = points[-1][0]
    return RegressionResult(
        slope=slope,
        intercept=intercept,
        n=n,
        fitted_latest=intercept + slope * t_latest,
        t_mean=t_mean,
        value_mean=v_mean,
        t_latest=t_latest,
    )


@dataclass(frozen=True)
class TtcEstimate:
    """Height- and width-based TTC in seconds; positive means approaching.

    A value of None means the corresponding size is not changing fast
    enough to divide by.
    """

    ttc_h: Optional[float]
    ttc_w: Optional[float]
    slope_h: float
    slope_w: float


def _ttc_from_fit(fit: RegressionResult, slope_epsilon: float) -> Optional[float]:
    # The fitted size and rate are most reliable at the window centroid;
    # the predicted closing time is then re-referenced to the newest sample.
    if abs(fit.slope) < slope_epsilon:
        return None
    return fit.value_mean / fit.slope - (fit.t_latest - fit.t_mean)


def ttc_from_window(
    window: SampleWindow, size_window_len: int, slope_epsilon: float = 1e-3
) -> Optional[TtcEstimate]:
    """TTC from the newest size_window_len samples, None while warming up."""
    if len(window) < size_window_len:
        return None
    samples = window.newest(size_window_len)
    fit_h = fit_slope([(s.t, s.h) for s in samples])
    fit_w = fit_slope([(s.t, s.w) for s in samples])
    return TtcEstimate(
        ttc_h=_ttc_from_fit(fit_h, slope_epsilon),
        ttc_w=_ttc_from_fit(fit_w, slope_epsilon),
        slope_h=fit_h.slope,
        slope_w=fit_w.slope,
    )


@dataclass(frozen=True)
class MotionEstimate:
    """Slope of the normalized horizontal center position, per second."""

    omega: float
    n: int


def normalized_center(cx: float, camera: CameraSpec, c_los: Optional[float] = None) -> float:
    if c_los is None:
        c_los = camera.principal_x
    return (cx - c_los) / (camera.frame_width / 2.0)


def horizontal_motion(
    window: SampleWindow,
    center_window_len: int,
    camera: CameraSpec,
    c_los: Optional[float] = None,
) -> Optional[MotionEstimate]:
    """Drift rate of the box center, None while warming up."""
    if len(window) < center_window_len:
        return None
    samples = window.newest(center_window_len)
    fit = fit_slope([(s.t, normalized_center(s.cx, camera, c_los)) for s in samples])
    return MotionEstimate(omega=fit.slope, n=fit.n)
