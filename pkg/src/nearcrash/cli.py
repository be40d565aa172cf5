"""Command-line entry point.

Subcommands: simulate (scenario -> detection stream + oracle labels),
run (detection stream -> events/trajectory/throughput), eval (score
predictions against ground truth), gps (convert and export trajectories),
report (render a saved evaluation report).

Exit codes: 0 success, 2 input error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path
from typing import List, Optional

from . import config as config_mod
from . import evaluation, gps as gps_mod, pipeline, sim, streams
from .config import ConfigError


def _parse_flag_value(text: str):
    # numbers, booleans, and null parse as JSON; anything else is a string
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _add_override_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("config overrides")
    for dotted in config_mod.override_flags():
        group.add_argument(
            f"--{dotted}",
            dest=f"override__{dotted.replace('.', '__')}",
            metavar="VALUE",
            help=argparse.SUPPRESS,
        )
    group.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="FIELD=VALUE",
        help="override a config field by dotted path, e.g. --set rules.delta=2.5 "
        "(any field may also be set directly, e.g. --rules.delta 2.5)",
    )


def _collect_overrides(args: argparse.Namespace) -> dict:
    overrides = {}
    for key, value in vars(args).items():
        if key.startswith("override__") and value is not None:
            dotted = key[len("override__"):].replace("__", ".")
            overrides[dotted] = _parse_flag_value(value)
    for item in getattr(args, "set", []):
        if "=" not in item:
            raise ConfigError(f"--set {item}: expected FIELD=VALUE")
        dotted, _, value = item.partition("=")
        overrides[dotted.strip()] = _parse_flag_value(value.strip())
    return overrides


def _load_scenario(spec_arg: str) -> sim.ScenarioSpec:
    if spec_arg.startswith("builtin:"):
        name = spec_arg[len("builtin:"):]
        ref = resources.files("nearcrash").joinpath(f"scenarios/{name}.json")
        if not ref.is_file():
            raise ValueError(f"no bundled scenario named {name!r}")
        text = ref.read_text(encoding="utf-8")
    else:
        text = Path(spec_arg).read_text(encoding="utf-8")
    try:
        return sim.ScenarioSpec.from_json(text)
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ValueError(f"{spec_arg}: invalid scenario ({exc})") from exc


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        scenario = _load_scenario(args.scenario)
        frames = sim.generate_detections(scenario)
        labels = sim.label_ground_truth_events(scenario, args.delta)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    # all outputs are generated before anything is written
    with open(args.out_detections, "w", encoding="utf-8") as fp:
        streams.write_detection_stream(frames, fp)
    label_objs = [
        {
            "video_id": args.video_id,
            "time": lab.time,
            "actor_index": lab.actor_index,
            "class": lab.kind,
        }
        for lab in labels
    ]
    with open(args.out_labels, "w", encoding="utf-8") as fp:
        json.dump(label_objs, fp, indent=2, sort_keys=True)
        fp.write("\n")
    print(f"wrote {len(frames)} frames, {len(labels)} ground-truth events")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    try:
        overrides = _collect_overrides(args)
        if args.mode is not None:
            overrides["pipeline.mode"] = args.mode
        cfg = config_mod.load_config(args.config, overrides)
        fixes = None
        gps_warnings: List[str] = []
        if args.gps is not None:
            with open(args.gps, "r", encoding="utf-8") as fp:
                fixes, gps_warnings = gps_mod.read_fix_csv(fp, cfg.gps.affine)
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        stream_fp = sys.stdin if args.detections == "-" else open(
            args.detections, "r", encoding="utf-8"
        )
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    for warning in gps_warnings:
        print(f"gps warning: {warning}", file=sys.stderr)

    try:
        if cfg.pipeline.mode == "offline":
            # materialize up front so parse errors are input errors
            try:
                frames = list(streams.read_detection_stream(stream_fp))
            except streams.StreamFormatError as exc:
                print(f"error: {exc}", file=sys.stderr)
                return 2
        else:
            # live mode streams lazily so dropping sees real arrival timing;
            # a malformed line mid-stream is then a runtime (source) failure
            frames = streams.read_detection_stream(stream_fp)
        result = pipeline.run(
            frames, cfg, gps_fixes=fixes, collect_annotations=args.debug_annotations
        )
    finally:
        if stream_fp is not sys.stdin:
            stream_fp.close()

    with open(out_dir / "events.json", "w", encoding="utf-8") as fp:
        json.dump([e.to_dict() for e in result.events], fp, indent=2, sort_keys=True)
        fp.write("\n")
    with open(out_dir / "throughput.json", "w", encoding="utf-8") as fp:
        json.dump(result.report.to_dict(), fp, indent=2, sort_keys=True)
        fp.write("\n")
    if result.trajectory is not None:
        with open(out_dir / "trajectory.csv", "w", encoding="utf-8", newline="") as fp:
            gps_mod.write_trajectory_csv(result.trajectory, fp)
        with open(out_dir / "trajectory.geojson", "w", encoding="utf-8") as fp:
            json.dump(gps_mod.trajectory_geojson(result.trajectory), fp, indent=2)
            fp.write("\n")
    if result.annotations is not None:
        with open(out_dir / "annotations.jsonl", "w", encoding="utf-8") as fp:
            for summary in result.annotations:
                fp.write(json.dumps(summary.to_dict(), sort_keys=True))
                fp.write("\n")

    print(
        f"processed {result.report.frames_processed} frames "
        f"({result.report.frames_dropped} dropped), "
        f"{len(result.events)} events -> {out_dir}"
    )
    if result.error:
        print(f"error: {result.error}", file=sys.stderr)
        return 3
    return 0


def _load_events_file(path: str) -> List[evaluation.ScoredEvent]:
    with open(path, "r", encoding="utf-8") as fp:
        return evaluation.events_from_json(json.load(fp))


def cmd_eval(args: argparse.Namespace) -> int:
    try:
        predictions = _load_events_file(args.predictions)
        ground_truth = _load_events_file(args.ground_truth)
        fps = None
        if args.throughput is not None:
            with open(args.throughput, "r", encoding="utf-8") as fp:
                fps = float(json.load(fp)["achieved_fps"])
    except (OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = evaluation.score(
        predictions,
        ground_truth,
        window=args.window,
        n_videos=args.n_videos,
        fps=fps,
    )
    print(evaluation.render_table(report))
    if args.out is not None:
        with open(args.out, "w", encoding="utf-8") as fp:
            fp.write(report.to_json())
            fp.write("\n")
    return 0


def cmd_gps(args: argparse.Namespace) -> int:
    try:
        overrides = _collect_overrides(args)
        cfg = config_mod.load_config(args.config, overrides)
        with open(args.fixes, "r", encoding="utf-8") as fp:
            fixes, warnings = gps_mod.read_fix_csv(fp, cfg.gps.affine)
        events = None
        if args.events is not None:
            with open(args.events, "r", encoding="utf-8") as fp:
                events = json.load(fp)
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)

    period = args.period if args.period is not None else cfg.gps.sample_period
    log = gps_mod.sample_trajectory(fixes, period)
    with open(out_dir / "trajectory.csv", "w", encoding="utf-8", newline="") as fp:
        gps_mod.write_trajectory_csv(log, fp)
    with open(out_dir / "trajectory.geojson", "w", encoding="utf-8") as fp:
        json.dump(gps_mod.trajectory_geojson(log), fp, indent=2)
        fp.write("\n")
    if events is not None:
        with open(out_dir / "events.geojson", "w", encoding="utf-8") as fp:
            json.dump(gps_mod.events_geojson(events), fp, indent=2)
            fp.write("\n")
    print(
        f"kept {len(log.fixes)} of {len(fixes)} fixes "
        f"({len(warnings)} rows skipped) -> {out_dir}"
    )
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    try:
        with open(args.report, "r", encoding="utf-8") as fp:
            report = evaluation.EvalReport.from_dict(json.load(fp))
        if args.throughput is not None:
            with open(args.throughput, "r", encoding="utf-8") as fp:
                fps = float(json.load(fp)["achieved_fps"])
            report = evaluation.make_report(
                report.tp, report.fp, report.fn, report.n_videos, report.n_events, fps
            )
    except (OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(evaluation.render_table(report))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nearcrash",
        description="Near-crash detection engine for timestamped bounding-box streams",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser(
        "simulate", help="render a scenario to a detection stream and oracle labels"
    )
    p_sim.add_argument(
        "scenario",
        help="scenario JSON path, or builtin:<name> (head_on, cut_in, adjacent_pass, "
        "receding, truncated_oncoming, jaywalking_pedestrian)",
    )
    p_sim.add_argument("--out-detections", required=True)
    p_sim.add_argument("--out-labels", required=True)
    p_sim.add_argument("--video-id", default="default")
    p_sim.add_argument(
        "--delta", type=float, default=3.0, help="TTC threshold for oracle labels"
    )
    p_sim.set_defaults(func=cmd_simulate)

    p_run = sub.add_parser("run", help="run the detection engine over a stream")
    p_run.add_argument("detections", help="detection JSONL path, or - for stdin")
    p_run.add_argument("--config", default=None, help="engine config JSON")
    p_run.add_argument("--gps", default=None, help="GPS fix CSV (t,lat_raw,lon_raw)")
    p_run.add_argument("--out-dir", required=True)
    p_run.add_argument("--mode", choices=("offline", "live"), default=None)
    p_run.add_argument("--debug-annotations", action="store_true")
    _add_override_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="score predictions against ground truth")
    p_eval.add_argument("--predictions", required=True)
    p_eval.add_argument("--ground-truth", required=True)
    p_eval.add_argument("--window", type=float, default=evaluation.DEFAULT_MATCH_WINDOW_S)
    p_eval.add_argument("--n-videos", type=int, default=None)
    p_eval.add_argument("--throughput", default=None, help="throughput JSON for the FPS column")
    p_eval.add_argument("--out", default=None, help="write the report JSON here")
    p_eval.set_defaults(func=cmd_eval)

    p_gps = sub.add_parser("gps", help="convert raw fixes and export trajectory artifacts")
    p_gps.add_argument("fixes", help="CSV with header t,lat_raw,lon_raw")
    p_gps.add_argument("--out-dir", required=True)
    p_gps.add_argument("--events", default=None, help="event log JSON for a map overlay")
    p_gps.add_argument("--period", type=float, default=None)
    p_gps.add_argument("--config", default=None)
    _add_override_flags(p_gps)
    p_gps.set_defaults(func=cmd_gps)

    p_rep = sub.add_parser("report", help="render a saved evaluation report")
    p_rep.add_argument("report")
    p_rep.add_argument("--throughput", default=None)
    p_rep.set_defaults(func=cmd_report)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # anything unplanned is a runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
