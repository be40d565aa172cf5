"""Event-level scoring: temporal matching, F1, and report rendering.

A prediction counts as a true positive when it falls within the matching
window of a ground-truth event in the same video; matching is one-to-one,
greedy by smallest time distance, so it does not depend on input order.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

DEFAULT_MATCH_WINDOW_S = 10.0


@dataclass(frozen=True)
class ScoredEvent:
    video_id: str
    time: float

    def __post_init__(self):
        if self.time < 0:
            raise ValueError(f"event time must be >= 0, got {self.time}")


@dataclass(frozen=True)
class MatchResult:
    tp: int
    fp: int
    fn: int
    matches: Tuple[Tuple[ScoredEvent, ScoredEvent], ...]  # (ground truth, prediction)


def match_events(
    predictions: Sequence[ScoredEvent],
    ground_truth: Sequence[ScoredEvent],
    window: float = DEFAULT_MATCH_WINDOW_S,
) -> MatchResult:
    by_video: Dict[str, Tuple[List[ScoredEvent], List[ScoredEvent]]] = defaultdict(
        lambda: ([], [])
    )
    for p in predictions:
        by_video[p.video_id][0].append(p)
    for g in ground_truth:
        by_video[g.video_id][1].append(g)

    matches: List[Tuple[ScoredEvent, ScoredEvent]] = []
    for video_id in sorted(by_video):
        preds, gts = by_video[video_id]
        pairs = [
            (abs(g.time - p.time), g.time, p.time, gi, pi)
            for gi, g in enumerate(gts)
            for pi, p in enumerate(preds)
            if abs(g.time - p.time) <= window
        ]
        # sort key uses event times, not list positions, so input order is irrelevant
        pairs.sort()
        used_g, used_p = set(), set()
        for _, _, _, gi, pi in pairs:
            if gi in used_g or pi in used_p:
                continue
            used_g.add(gi)
            used_p.add(pi)
            matches.append((gts[gi], preds[pi]))

    tp = len(matches)
    return MatchResult(
        tp=tp,
        fp=len(predictions) - tp,
        fn=len(ground_truth) - tp,
        matches=tuple(matches),
    )


def precision(tp: int, fp: int) -> float:
    return tp / (tp + fp) if tp + fp > 0 else 0.0


def recall(tp: int, fn: int) -> float:
    return tp / (tp + fn) if tp + fn > 0 else 0.0


def f1(tp: int, fp: int, fn: int) -> float:
    """Harmonic mean of precision and recall; 0 when there is nothing to score."""
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom > 0 else 0.0


@dataclass(frozen=True)
class EvalReport:
    n_videos: int
    n_events: int
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    fps: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "n_videos": self.n_videos,
            "n_events": self.n_events,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "fps": self.fps,
        }

    @staticmethod
    def from_dict(obj: dict) -> "EvalReport":
        return EvalReport(
            n_videos=int(obj["n_videos"]),
            n_events=int(obj["n_events"]),
            tp=int(obj["tp"]),
            fp=int(obj["fp"]),
            fn=int(obj["fn"]),
            precision=float(obj["precision"]),
            recall=float(obj["recall"]),
            f1=float(obj["f1"]),
            fps=None if obj.get("fps") is None else float(obj["fps"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def make_report(
    tp: int,
    fp: int,
    fn: int,
    n_videos: int,
    n_events: int,
    fps: Optional[float] = None,
) -> EvalReport:
    if min(tp, fp, fn) < 0:
        raise ValueError("counts must be >= 0")
    return EvalReport(
        n_videos=n_videos,
        n_events=n_events,
        tp=tp,
        fp=fp,
        fn=fn,
        precision=precision(tp, fp),
        recall=recall(tp, fn),
        f1=f1(tp, fp, fn),
        fps=fps,
    )


def score(
    predictions: Sequence[ScoredEvent],
    ground_truth: Sequence[ScoredEvent],
    window: float = DEFAULT_MATCH_WINDOW_S,
    n_videos: Optional[int] = None,
    fps: Optional[float] = None,
) -> EvalReport:
    result = match_events(predictions, ground_truth, window)
    if n_videos is None:
        n_videos = len({e.video_id for e in list(predictions) + list(ground_truth)})
    return make_report(
        result.tp, result.fp, result.fn, n_videos, len(ground_truth), fps
    )


_COLUMNS = ("# videos", "# events", "TP", "FP", "FN", "F1", "FPS")


def render_table(report: EvalReport) -> str:
    """Fixed-column text table, one header row and one value row."""
    values = (
        str(report.n_videos),
        str(report.n_events),
        str(report.tp),
        str(report.fp),
        str(report.fn),
        f"{report.f1:.3f}",
        "-" if report.fps is None else f"{report.fps:.1f}",
    )
    widths = [max(len(c), len(v)) for c, v in zip(_COLUMNS, values)]
    header = " | ".join(c.ljust(w) for c, w in zip(_COLUMNS, widths))
    row = " | ".join(v.ljust(w) for v, w in zip(values, widths))
    rule = "-+-".join("-" * w for w in widths)
    return "\n".join((header, rule, row))


def events_from_json(obj) -> List[ScoredEvent]:
    """Parse scored events from JSON.

    Accepts a list of {"video_id", "time"} objects; pipeline event logs
    using "trigger_time" are accepted too, with video_id defaulting to
    "default" so single-video round trips need no extra wiring.
    """
    if not isinstance(obj, list):
        raise ValueError("expected a JSON array of events")
    events = []
    for i, entry in enumerate(obj):
        if not isinstance(entry, dict):
            raise ValueError(f"event {i}: expected an object")
        if "time" in entry:
            t = entry["time"]
        elif "trigger_time" in entry:
            t = entry["trigger_time"]
        else:
            raise ValueError(f"event {i}: missing 'time' or 'trigger_time'")
        events.append(
            ScoredEvent(video_id=str(entry.get("video_id", "default")), time=float(t))
        )
    return events
