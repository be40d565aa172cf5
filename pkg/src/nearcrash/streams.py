"""Detection stream model and JSON Lines serialization.

A detection stream is one JSON object per line, one line per frame:

    {"frame_id": 0, "t_seconds": 0.0,
     "detections": [{"class": "vehicle", "confidence": 1.0,
                     "x1": 10.0, "y1": 20.0, "x2": 30.0, "y2": 40.0}]}

The same format is produced by the scenario simulator and consumed by the
pipeline, so external detectors only need to emit these lines.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, List, Optional, Tuple

Box = Tuple[float, float, float, float]

ROAD_USER_KINDS = ("vehicle", "pedestrian")


class StreamFormatError(ValueError):
    """Raised when a detection stream line cannot be parsed."""


@dataclass(frozen=True)
class CameraSpec:
    """Pinhole camera and frame geometry.

    The detection engine itself only uses the frame dimensions and the
    principal column; the focal length matters only when projecting
    synthetic scenes.
    """

    focal_px: float
    frame_width: float
    frame_height: float
    fps: float
    principal_x: Optional[float] = None

    def __post_init__(self):
        if self.focal_px <= 0:
            raise ValueError(f"focal_px must be > 0, got {self.focal_px}")
        if self.frame_width <= 0 or self.frame_height <= 0:
            raise ValueError("frame dimensions must be > 0")
        if self.fps <= 0:
            raise ValueError(f"fps must be > 0, got {self.fps}")
        if self.principal_x is None:
            object.__setattr__(self, "principal_x", self.frame_width / 2.0)


@dataclass(frozen=True)
class Detection:
    """One timestamped, classified bounding box."""

    t: float
    frame_id: int
    kind: str
    confidence: float
    box: Box

    def __post_init__(self):
        x1, y1, x2, y2 = self.box
        if not (x2 > x1 and y2 > y1):
            raise ValueError(f"degenerate box {self.box}")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")

    @property
    def width(self) -> float:
        return self.box[2] - self.box[0]

    @property
    def height(self) -> float:
        return self.box[3] - self.box[1]

    @property
    def center_x(self) -> float:
        return (self.box[0] + self.box[2]) / 2.0

    @property
    def bottom_y(self) -> float:
        # image y grows downward, so the bottom edge is the larger y
        return self.box[3]


@dataclass
class FrameRecord:
    """All detections captured in a single frame."""

    frame_id: int
    t: float
    detections: List[Detection] = field(default_factory=list)


def frame_to_json(frame: FrameRecord) -> str:
    dets = [
        {
            "class": d.kind,
            "confidence": d.confidence,
            "x1": d.box[0],
            "y1": d.box[1],
            "x2": d.box[2],
            "y2": d.box[3],
        }
        for d in frame.detections
    ]
    return json.dumps(
        {"frame_id": frame.frame_id, "t_seconds": frame.t, "detections": dets},
        sort_keys=True,
    )


def frame_from_json(line: str, lineno: int = 0) -> FrameRecord:
    try:
        obj = json.loads(line)
        frame_id = int(obj["frame_id"])
        t = float(obj["t_seconds"])
        dets = [
            Detection(
                t=t,
                frame_id=frame_id,
                kind=str(d["class"]),
                confidence=float(d["confidence"]),
                box=(float(d["x1"]), float(d["y1"]), float(d["x2"]), float(d["y2"])),
            )
            for d in obj["detections"]
        ]
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise StreamFormatError(f"line {lineno}: {exc}") from exc
    return FrameRecord(frame_id=frame_id, t=t, detections=dets)


def write_detection_stream(frames: Iterable[FrameRecord], fp: IO[str]) -> int:
    """Write frames as JSON Lines; returns the number of lines written."""
    n = 0
    for frame in frames:
        fp.write(frame_to_json(frame))
        fp.write("\n")
        n += 1
    return n


def read_detection_stream(fp: IO[str]) -> Iterator[FrameRecord]:
    """Parse a JSON Lines detection stream, skipping blank lines."""
    for lineno, line in enumerate(fp, start=1):
        line = line.strip()
        if not line:
            continue
        yield frame_from_json(line, lineno)
