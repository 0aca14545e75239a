"""``vidskit`` command line.

Exit codes: 0 success / validation passed, 1 validation failed,
2 usage error, 3 operational error (I/O, a required validation not met).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

from . import __version__
from .exporter import export_flat, export_training_layout
from .model import Profile, VidsError
from .quality import recompute_quality
from .scaffold import FixtureConfig, generate_fixture, mutate_fixture, scaffold_dataset
from .scorer import load_scorecard, render_row, score
from .splits import generate_splits, write_splits
from .validator import render_report, scan_dataset, validate

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_ERROR = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


class _UsageError(Exception):
    pass


def _ratios(text: str) -> tuple[float, float, float]:
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"ratios must be three comma-separated numbers, got {text!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"need exactly three ratios, got {len(vals)}")
    return vals


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vidskit", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("validate", help="run the 21 validation rules")
    v.add_argument("path")
    v.add_argument("--profile", choices=["auto", "poc", "full"], default="auto",
                   help="auto reads the .vids marker (default)")
    v.add_argument("--json", action="store_true", help="print the JSON report")

    s = sub.add_parser("scaffold", help="generate a compliant synthetic dataset")
    s.add_argument("path")
    s.add_argument("--subjects", type=int, required=True)
    s.add_argument("--profile", choices=["poc", "full"], default="poc")
    s.add_argument("--seed", type=_seed, default=0)
    s.add_argument("--readers", type=int, default=None,
                   help="readers per subject; generates reader masks, consensus and agreement (default 4 for full)")
    s.add_argument("--unannotated", type=int, default=0, help="subjects left without annotations")
    s.add_argument("--dims", type=int, nargs=3, default=(16, 16, 16), metavar=("NX", "NY", "NZ"))
    s.add_argument("--json", action="store_true")

    q = sub.add_parser("quality", help="recompute agreement from reader masks under derivatives/")
    q.add_argument("path")
    q.add_argument("--json", action="store_true")

    sp = sub.add_parser("splits", help="write ml/splits.json")
    sp.add_argument("path")
    sp.add_argument("--seed", type=_seed, required=True)
    sp.add_argument("--ratios", type=_ratios, default=(0.70, 0.15, 0.15))
    sp.add_argument("--json", action="store_true")

    sc = sub.add_parser("score", help="score a 22-dimension scorecard")
    sc.add_argument("scorecard")
    sc.add_argument("--json", action="store_true")

    e = sub.add_parser("export", help="export to a downstream layout")
    e.add_argument("path")
    e.add_argument("out")
    e.add_argument("--layout", choices=["flat", "training"], required=True)
    e.add_argument("--task", default="VIDS", help="task name for the training layout")
    e.add_argument("--json", action="store_true")

    m = sub.add_parser("mutate", help="copy a fixture and break one rule (test harness)")
    m.add_argument("src")
    m.add_argument("dst")
    m.add_argument("--rule", required=True)
    m.add_argument("--json", action="store_true")
    return p


def _emit(args, payload: dict, text: str) -> None:
    print(json.dumps(payload, indent=2) if args.json else text)


def _cmd_validate(args) -> int:
    profile = None if args.profile == "auto" else Profile.parse(args.profile)
    report = validate(args.path, profile)
    print(render_report(report, "json" if args.json else "human"))
    return EXIT_OK if report.passed else EXIT_FAIL


def _cmd_scaffold(args) -> int:
    profile = Profile.parse(args.profile)
    readers = args.readers
    if readers is None and profile is Profile.FULL:
        readers = 4
    cfg = FixtureConfig(
        n_subjects=args.subjects,
        readers_per_subject=readers or 2,
        volume_dims=tuple(args.dims),
        profile=profile,
        seed=args.seed,
        unannotated_subjects=args.unannotated,
    )
    stats = generate_fixture(args.path, cfg) if readers else scaffold_dataset(args.path, cfg)
    payload = asdict(stats)
    _emit(args, payload, f"wrote {stats.n_subjects} subjects ({stats.n_segmentations} segmentations) to {args.path}")
    return EXIT_OK


def _cmd_quality(args) -> int:
    ix = scan_dataset(args.path)
    summary = recompute_quality(args.path, ix.subject_ids)
    d = summary.to_dict()["Dataset"]
    text = (
        f"quality artifacts written: {summary.pair_count} reader pairs, "
        f"mean Dice {d['MeanDice']}, min {d['MinDice']}, max {d['MaxDice']}"
    )
    _emit(args, summary.to_dict(), text)
    return EXIT_OK


def _cmd_splits(args) -> int:
    ix = scan_dataset(args.path)
    spec = generate_splits(ix.subject_ids, args.ratios, args.seed)
    path = write_splits(args.path, spec)
    train, val, test = spec.sizes
    _emit(args, spec.to_dict(), f"wrote {path}: train {train}, val {val}, test {test}")
    return EXIT_OK


def _cmd_score(args) -> int:
    result = score(load_scorecard(args.scorecard))
    _emit(args, result.to_dict(), render_row(result))
    return EXIT_OK


def _cmd_export(args) -> int:
    if args.layout == "flat":
        manifest = export_flat(args.path, args.out)
    else:
        manifest = export_training_layout(args.path, args.out, args.task)
    _emit(args, manifest.to_dict(), f"exported {len(manifest.entries)} cases to {args.out} ({manifest.layout})")
    return EXIT_OK


def _cmd_mutate(args) -> int:
    desc = mutate_fixture(args.src, args.rule, args.dst)
    _emit(args, {"Rule": args.rule.upper(), "Mutation": desc}, desc)
    return EXIT_OK


_COMMANDS = {
    "validate": _cmd_validate,
    "scaffold": _cmd_scaffold,
    "quality": _cmd_quality,
    "splits": _cmd_splits,
    "score": _cmd_score,
    "export": _cmd_export,
    "mutate": _cmd_mutate,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except (VidsError, OSError, ValueError) as exc:
        print(f"vidskit {args.command}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
