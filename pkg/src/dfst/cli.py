"""Command-line interface: run sequences, synthesize them, score results.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness, synth
from .errors import DataError, NumericError
from .imaging import default_cn_table, load_cn_table
from .tracker import TrackerConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser():
    parser = _Parser(prog="dfst", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="track a sequence and write results + report")
    run.add_argument("--sequence", type=Path, help="sequence directory (frames + groundtruth.txt)")
    run.add_argument("--synthetic", type=Path, help="render and track a synthetic spec instead")
    run.add_argument("--cn-table", type=Path, help="color-name table (.csv or .bin); defaults to the built-in procedural table")
    run.add_argument("--config", type=Path, help="tracker config file (.json or .toml)")
    run.add_argument("--output", type=Path, default=Path("dfst_output"), help="output directory")
    run.add_argument("--render", action="store_true", help="write overlay images")
    run.add_argument("--dump-ranking", action="store_true", help="write per-frame feature ranking CSV")
    run.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                     help="override a config key (repeatable)")
    run.set_defaults(func=_cmd_run)

    syn = sub.add_parser("synth", help="render a synthetic sequence to disk")
    syn.add_argument("--spec", type=Path, required=True, help="JSON synthesis spec")
    syn.add_argument("--out", type=Path, required=True, help="output directory")
    syn.set_defaults(func=_cmd_synth)

    met = sub.add_parser("metrics", help="score a results file against ground truth")
    met.add_argument("--results", type=Path, required=True)
    met.add_argument("--groundtruth", type=Path, required=True)
    met.set_defaults(func=_cmd_metrics)
    return parser


def _parse_override(item):
    if "=" not in item:
        raise _UsageError(f"--set expects KEY=VALUE, got {item!r}")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _build_config(args):
    data = {}
    if args.config:
        cfg = harness.load_config_file(args.config)
        data = dict(cfg.__dict__)
    for item in args.overrides:
        key, value = _parse_override(item)
        data[key] = value
    return harness.config_from_dict(data) if data else TrackerConfig()


def _cmd_run(args):
    if (args.sequence is None) == (args.synthetic is None):
        raise _UsageError("exactly one of --sequence or --synthetic is required")
    cn = load_cn_table(args.cn_table) if args.cn_table else default_cn_table()
    cfg = _build_config(args)
    if args.synthetic is not None:
        seq = synth.synth_sequence(synth.load_spec(args.synthetic))
    else:
        seq = harness.load_sequence(args.sequence)
    out = args.output
    out.mkdir(parents=True, exist_ok=True)
    dump = out / "ranking.csv" if args.dump_ranking else None
    result = harness.run_tracker(seq, cfg, cn, ranking_dump=dump)
    harness.write_results(result, out / "results.txt")
    report = harness.compute_metrics(result.boxes, seq.groundtruth)
    report.fps = result.fps
    report.fps_end_to_end = result.fps_end_to_end
    report.config_snapshot = result.config_snapshot
    harness.write_report(report, out / "report.json")
    if args.render:
        harness.render_overlay(seq, result, out / "overlay")
    print(
        f"{seq.name}: {len(seq)} frames, mean IoU {report.mean_iou:.3f}, "
        f"precision@20 {report.precision_20:.3f}, failures {report.failures}, "
        f"{report.fps:.1f} fps (tracker-only)"
    )
    print(f"results written to {out}")
    return EXIT_OK


def _cmd_synth(args):
    seq = synth.synth_sequence(synth.load_spec(args.spec))
    out = synth.write_sequence(seq, args.out)
    print(f"{seq.name}: {len(seq)} frames written to {out}")
    return EXIT_OK


def _cmd_metrics(args):
    boxes = harness.read_results(args.results)
    groundtruth = harness.load_groundtruth_file(args.groundtruth)
    report = harness.compute_metrics(boxes, groundtruth)
    print(json.dumps(
        {
            "mean_iou": report.mean_iou,
            "precision_20": report.precision_20,
            "failures": report.failures,
            "frames_evaluated": report.frames_evaluated,
        },
        indent=2,
    ))
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
