"""Three-stage detection runtime.

Stages: a frame source (producer), the processing loop that owns tracker
and rule state (single consumer), and an event recorder that assembles
near-crash records with surrounding context.

Two modes share one engine. Offline mode consumes every frame in order,
so results are reproducible byte for byte. Live mode couples the source
to the processor through a capacity-one latest-wins queue: when frames
arrive faster than they can be processed, older unconsumed frames are
counted as dropped and never delivered, and the processor always sees the
freshest frame. The processor-to-recorder channel is lossless and never
blocks the processor, so slow event persistence cannot stall detection.

Frame timestamps always come from the source (capture time), never from
processing time.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass
from queue import SimpleQueue
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

from .config import EngineConfig
from .gps import GpsFix, TrajectoryLog, sample_trajectory
from .rules import NearCrashDecision, RuleEngine, event_type_for
from .streams import FrameRecord
from .tracker import NonMonotonicFrameError, Tracker
from .ttc import horizontal_motion, ttc_from_window

PRE_EVENT_SECONDS = 10.0
POST_EVENT_SECONDS = 10.0


class LatestFrameQueue:
    """Capacity-one channel where a new item replaces an unconsumed one.

    Replaced items are counted as dropped. get() blocks until an item is
    available or the queue is closed and drained, then returns None.
    """

    def __init__(self):
        self._cond = threading.Condition()
        self._item = None
        self._has_item = False
        self._closed = False
        self._dropped = 0

    def put(self, item) -> None:
        with self._cond:
            if self._closed:
                raise RuntimeError("put() on a closed queue")
            if self._has_item:
                self._dropped += 1
            self._item = item
            self._has_item = True
            self._cond.notify()

    def get(self, timeout: Optional[float] = None):
        with self._cond:
            while not self._has_item and not self._closed:
                if not self._cond.wait(timeout):
                    raise TimeoutError("no frame within timeout")
            if self._has_item:
                item = self._item
                self._item = None
                self._has_item = False
                return item
            return None

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    @property
    def dropped(self) -> int:
        with self._cond:
            return self._dropped


@dataclass(frozen=True)
class TrackAnnotation:
    track_id: int
    kind: str
    box: Tuple[float, float, float, float]
    ttc_h: Optional[float]
    ttc_w: Optional[float]
    omega: Optional[float]
    size_rule_pass: bool
    motion_rule_pass: bool
    motion_product: float
    triggered: bool

    def to_dict(self) -> dict:
        return {
            "track_id": self.track_id,
            "class": self.kind,
            "box": list(self.box),
            "ttc_h": self.ttc_h,
            "ttc_w": self.ttc_w,
            "omega": self.omega,
            "size_rule_pass": self.size_rule_pass,
            "motion_rule_pass": self.motion_rule_pass,
            "motion_product": self.motion_product,
            "triggered": self.triggered,
        }


@dataclass(frozen=True)
class FrameSummary:
    frame_id: int
    t: float
    tracks: Tuple[TrackAnnotation, ...]

    def to_dict(self) -> dict:
        return {
            "frame_id": self.frame_id,
            "t": self.t,
            "tracks": [a.to_dict() for a in self.tracks],
        }


class ContextBuffer:
    """Ring buffer of frame summaries spanning the pre-event window."""

    def __init__(self, span_seconds: float):
        if span_seconds <= 0:
            raise ValueError("span_seconds must be > 0")
        self.span_seconds = span_seconds
        self._buf: deque = deque()

    def append(self, summary: FrameSummary) -> None:
        self._buf.append(summary)
        cutoff = summary.t - self.span_seconds
        while self._buf and self._buf[0].t < cutoff:
            self._buf.popleft()

    def frames_since(self, t_min: float) -> List[FrameSummary]:
        return [s for s in self._buf if s.t >= t_min]

    def __len__(self) -> int:
        return len(self._buf)


@dataclass(frozen=True)
class TriggerSnapshot:
    """Immutable record handed from the processor to the recorder."""

    event_id: int
    track_id: int
    event_type: str
    trigger_time: float
    ttc_h: Optional[float]
    ttc_w: Optional[float]
    motion_product: float
    size_rule_pass: bool
    motion_rule_pass: bool
    gps: Optional[dict]
    pre_frame_ids: Tuple[int, ...]


@dataclass
class NearCrashEvent:
    event_id: int
    track_id: int
    event_type: str
    trigger_time: float
    ttc_h: Optional[float]
    ttc_w: Optional[float]
    gps: Optional[dict]
    clip_start: float
    clip_end: float
    frame_ids: Tuple[int, ...]
    truncated: bool
    size_rule_pass: bool
    motion_rule_pass: bool
    motion_product: float

    def to_dict(self) -> dict:
        return {
            "event_id": self.event_id,
            "track_id": self.track_id,
            "event_type": self.event_type,
            "trigger_time": self.trigger_time,
            "ttc_h": self.ttc_h,
            "ttc_w": self.ttc_w,
            "gps": self.gps,
            "clip_start": self.clip_start,
            "clip_end": self.clip_end,
            "frame_ids": list(self.frame_ids),
            "truncated": self.truncated,
            "size_rule_pass": self.size_rule_pass,
            "motion_rule_pass": self.motion_rule_pass,
            "motion_product": self.motion_product,
        }


class EventRecorder:
    """Builds final event records around trigger snapshots.

    After a trigger it keeps accumulating frame ids until the post window
    elapses; events whose post window runs past the end of the stream are
    truncated there and flagged. Persistence failures keep the event in
    memory and are reported at shutdown.
    """

    def __init__(
        self,
        pre_seconds: float = PRE_EVENT_SECONDS,
        post_seconds: float = POST_EVENT_SECONDS,
        sink: Optional[Callable[[NearCrashEvent], None]] = None,
    ):
        self.pre_seconds = pre_seconds
        self.post_seconds = post_seconds
        self.sink = sink
        self.events: List[NearCrashEvent] = []
        self.sink_failures: List[str] = []
        self._pending: List[dict] = []
        self._stream_start: Optional[float] = None

    def on_frame(self, frame_id: int, t: float) -> None:
        if self._stream_start is None:
            self._stream_start = t
        still_open = []
        for p in self._pending:
            if t <= p["snap"].trigger_time + self.post_seconds:
                p["frame_ids"].append(frame_id)
                still_open.append(p)
            else:
                self._finalize(p, truncated=False)
        self._pending = still_open

    def on_trigger(self, snap: TriggerSnapshot) -> None:
        if self._stream_start is None:
            self._stream_start = snap.trigger_time
        # the triggering frame is already in the snapshot's context ids
        self._pending.append({"snap": snap, "frame_ids": list(snap.pre_frame_ids)})

    def finish(self, stream_end_t: Optional[float]) -> None:
        for p in self._pending:
            snap = p["snap"]
            end = snap.trigger_time + self.post_seconds
            truncated = stream_end_t is not None and stream_end_t < end
            self._finalize(p, truncated=truncated, stream_end_t=stream_end_t)
        self._pending = []

    def _finalize(self, p, truncated: bool, stream_end_t: Optional[float] = None) -> None:
        snap: TriggerSnapshot = p["snap"]
        start = snap.trigger_time - self.pre_seconds
        if self._stream_start is not None:
            start = max(start, self._stream_start)
        end = snap.trigger_time + self.post_seconds
        if truncated and stream_end_t is not None:
            end = min(end, stream_end_t)
        event = NearCrashEvent(
            event_id=snap.event_id,
            track_id=snap.track_id,
            event_type=snap.event_type,
            trigger_time=snap.trigger_time,
            ttc_h=snap.ttc_h,
            ttc_w=snap.ttc_w,
            gps=snap.gps,
            clip_start=start,
            clip_end=end,
            frame_ids=tuple(p["frame_ids"]),
            truncated=truncated,
            size_rule_pass=snap.size_rule_pass,
            motion_rule_pass=snap.motion_rule_pass,
            motion_product=snap.motion_product,
        )
        self.events.append(event)
        if self.sink is not None:
            try:
                self.sink(event)
            except Exception as exc:  # event stays in memory either way
                self.sink_failures.append(f"event {event.event_id}: {exc}")


@dataclass
class ThroughputReport:
    frames_produced: int = 0
    frames_processed: int = 0
    frames_dropped: int = 0
    frames_rejected: int = 0
    wall_seconds: float = 0.0
    achieved_fps: float = 0.0
    sink_failures: int = 0

    def to_dict(self) -> dict:
        return {
            "frames_produced": self.frames_produced,
            "frames_processed": self.frames_processed,
            "frames_dropped": self.frames_dropped,
            "frames_rejected": self.frames_rejected,
            "wall_seconds": self.wall_seconds,
            "achieved_fps": self.achieved_fps,
            "sink_failures": self.sink_failures,
        }


@dataclass
class RunResult:
    events: List[NearCrashEvent]
    trajectory: Optional[TrajectoryLog]
    report: ThroughputReport
    annotations: Optional[List[FrameSummary]]
    error: Optional[str] = None


class _Processor:
    """Single owner of tracker, rule, and context state."""

    def __init__(
        self,
        config: EngineConfig,
        gps_fixes: Optional[Sequence[GpsFix]],
        emit_frame: Callable[[int, float], None],
        emit_trigger: Callable[[TriggerSnapshot], None],
        collect_annotations: bool,
    ):
        self.config = config
        self.tracker = Tracker(
            confidence_min=config.tracker.confidence_min,
            iou_min=config.tracker.iou_min,
            max_age=config.tracker.max_age,
            min_hits=config.tracker.min_hits,
            window_capacity=config.window_capacity,
        )
        self.engine = RuleEngine(config.rules, config.camera)
        self.context = ContextBuffer(config.pipeline.buffer_seconds)
        self.emit_frame = emit_frame
        self.emit_trigger = emit_trigger
        self.annotations: Optional[List[FrameSummary]] = (
            [] if collect_annotations else None
        )
        self._fixes = sorted(gps_fixes, key=lambda f: f.t) if gps_fixes else []
        self._fix_idx = -1
        self.processed = 0
        self.rejected = 0
        self.last_t: Optional[float] = None
        self._next_event_id = 1

    def process(self, frame: FrameRecord) -> None:
        try:
            tracks = self.tracker.step(frame)
        except NonMonotonicFrameError:
            self.rejected += 1
            return
        cfg = self.config
        annotations = []
        triggered_decisions = []
        for trk in tracks:
            est = ttc_from_window(
                trk.window, cfg.regression.size_window_len, cfg.regression.slope_epsilon
            )
            motion = horizontal_motion(
                trk.window, cfg.regression.center_window_len, cfg.camera, cfg.rules.c_los
            )
            decision = self.engine.decide(trk, est, motion, frame.t)
            annotations.append(
                TrackAnnotation(
                    track_id=trk.id,
                    kind=trk.kind,
                    box=trk.box(),
                    ttc_h=est.ttc_h if est else None,
                    ttc_w=est.ttc_w if est else None,
                    omega=motion.omega if motion else None,
                    size_rule_pass=decision.size_rule_pass,
                    motion_rule_pass=decision.motion_rule_pass,
                    motion_product=decision.motion_product,
                    triggered=decision.triggered,
                )
            )
            if decision.triggered:
                triggered_decisions.append((trk, decision))

        summary = FrameSummary(
            frame_id=frame.frame_id, t=frame.t, tracks=tuple(annotations)
        )
        self.context.append(summary)
        if self.annotations is not None:
            self.annotations.append(summary)
        self.emit_frame(frame.frame_id, frame.t)
        for trk, decision in triggered_decisions:
            self.emit_trigger(self._snapshot(trk, decision, frame.t))
        self.processed += 1
        self.last_t = frame.t

    def _snapshot(self, trk, decision: NearCrashDecision, t: float) -> TriggerSnapshot:
        pre_ids = tuple(
            s.frame_id for s in self.context.frames_since(t - PRE_EVENT_SECONDS)
        )
        snap = TriggerSnapshot(
            event_id=self._next_event_id,
            track_id=trk.id,
            event_type=event_type_for(trk.kind),
            trigger_time=t,
            ttc_h=decision.ttc.ttc_h if decision.ttc else None,
            ttc_w=decision.ttc.ttc_w if decision.ttc else None,
            motion_product=decision.motion_product,
            size_rule_pass=decision.size_rule_pass,
            motion_rule_pass=decision.motion_rule_pass,
            gps=self._latest_gps(t),
            pre_frame_ids=pre_ids,
        )
        self._next_event_id += 1
        return snap

    def _latest_gps(self, t: float) -> Optional[dict]:
        while (
            self._fix_idx + 1 < len(self._fixes)
            and self._fixes[self._fix_idx + 1].t <= t
        ):
            self._fix_idx += 1
        if self._fix_idx < 0:
            return None
        fix = self._fixes[self._fix_idx]
        return {"lat": fix.lat_wgs84, "lon": fix.lon_wgs84, "t": fix.t}


def run(
    source: Iterable[FrameRecord],
    config: EngineConfig,
    gps_fixes: Optional[Sequence[GpsFix]] = None,
    event_sink: Optional[Callable[[NearCrashEvent], None]] = None,
    on_frame: Optional[Callable[[FrameRecord], None]] = None,
    collect_annotations: bool = False,
) -> RunResult:
    """Run the engine over a frame source in the configured mode.

    on_frame, when given, is called by the processing stage after each
    consumed frame (instrumentation hook). event_sink is called by the
    recorder stage for each finalized event.
    """
    if config.pipeline.mode == "live":
        return _run_live(source, config, gps_fixes, event_sink, on_frame, collect_annotations)
    return _run_offline(source, config, gps_fixes, event_sink, on_frame, collect_annotations)


def _make_trajectory(
    gps_fixes: Optional[Sequence[GpsFix]], config: EngineConfig
) -> Optional[TrajectoryLog]:
    if gps_fixes is None:
        return None
    ordered = sorted(gps_fixes, key=lambda f: f.t)
    return sample_trajectory(ordered, period=config.gps.sample_period)


def _run_offline(source, config, gps_fixes, event_sink, on_frame, collect_annotations):
    recorder = EventRecorder(sink=event_sink)
    proc = _Processor(
        config, gps_fixes, recorder.on_frame, recorder.on_trigger, collect_annotations
    )
    error = None
    start = time.monotonic()
    frames = iter(source)
    while True:
        try:
            frame = next(frames)
        except StopIteration:
            break
        except Exception as exc:
            error = f"source error: {exc}"
            break
        proc.process(frame)
        if on_frame is not None:
            on_frame(frame)
    recorder.finish(proc.last_t)
    wall = time.monotonic() - start
    report = ThroughputReport(
        frames_produced=proc.processed + proc.rejected,
        frames_processed=proc.processed,
        frames_dropped=0,
        frames_rejected=proc.rejected,
        wall_seconds=wall,
        achieved_fps=proc.processed / wall if wall > 0 else 0.0,
        sink_failures=len(recorder.sink_failures),
    )
    return RunResult(
        events=recorder.events,
        trajectory=_make_trajectory(gps_fixes, config),
        report=report,
        annotations=proc.annotations,
        error=error,
    )


def _run_live(source, config, gps_fixes, event_sink, on_frame, collect_annotations):
    frame_queue = LatestFrameQueue()
    recorder_queue: SimpleQueue = SimpleQueue()
    recorder = EventRecorder(sink=event_sink)

    produced = 0
    producer_error: List[str] = []

    def produce():
        nonlocal produced
        try:
            for frame in source:
                frame_queue.put(frame)
                produced += 1
        except Exception as exc:
            producer_error.append(f"source error: {exc}")
        finally:
            frame_queue.close()

    def record():
        while True:
            kind, payload = recorder_queue.get()
            if kind == "frame":
                recorder.on_frame(*payload)
            elif kind == "trigger":
                recorder.on_trigger(payload)
            else:  # "end"
                recorder.finish(payload)
                return

    proc = _Processor(
        config,
        gps_fixes,
        emit_frame=lambda fid, t: recorder_queue.put(("frame", (fid, t))),
        emit_trigger=lambda snap: recorder_queue.put(("trigger", snap)),
        collect_annotations=collect_annotations,
    )

    producer = threading.Thread(target=produce, name="nearcrash-source", daemon=True)
    recorder_thread = threading.Thread(target=record, name="nearcrash-recorder", daemon=True)
    producer.start()
    recorder_thread.start()

    min_interval = config.pipeline.process_min_interval
    start = time.monotonic()
    next_allowed = start
    while True:
        frame = frame_queue.get()
        if frame is None:
            break
        if min_interval > 0:
            now = time.monotonic()
            if now < next_allowed:
                time.sleep(next_allowed - now)
            next_allowed = max(next_allowed + min_interval, now)
        proc.process(frame)
        if on_frame is not None:
            on_frame(frame)
    producer.join()
    recorder_queue.put(("end", proc.last_t))
    recorder_thread.join()
    wall = time.monotonic() - start

    report = ThroughputReport(
        frames_produced=produced,
        frames_processed=proc.processed,
        frames_dropped=frame_queue.dropped,
        frames_rejected=proc.rejected,
        wall_seconds=wall,
        achieved_fps=proc.processed / wall if wall > 0 else 0.0,
        sink_failures=len(recorder.sink_failures),
    )
    return RunResult(
        events=recorder.events,
        trajectory=_make_trajectory(gps_fixes, config),
        report=report,
        annotations=proc.annotations,
        error=producer_error[0] if producer_error else None,
    )
