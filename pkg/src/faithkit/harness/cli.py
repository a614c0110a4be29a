"""``faithkit`` command line: train, evaluate, curves, interpolate, report.

Exit status: 0 on success, 1 when every evaluated example failed numerically,
2 on usage, input or I/O errors.
"""

from __future__ import annotations

import argparse
import logging
import sys

from faithkit.errors import DegenerateDataError, FaithkitError
from faithkit.harness import experiments, report
from faithkit.harness.config import ExperimentConfig, load_config, with_overrides

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value config file")
    common.add_argument("--seed", type=int, metavar="U64", help="overrides the config seed")
    common.add_argument("--out", metavar="PATH", help="output file")
    common.add_argument("--format", choices=("csv", "text"), default="text")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="faithkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="train the classifier and write a checkpoint")
    sub.add_parser("evaluate", parents=[common], help="attribute and measure; writes a report")
    curves = sub.add_parser("curves", parents=[common], help="metric vs number of touched tokens")
    curves.add_argument("--ks", type=int, nargs="+", help="token counts (default: config curve_ks)")
    sub.add_parser("interpolate", parents=[common], help="interpolation curves f(0..4)")
    rep = sub.add_parser("report", parents=[common], help="render a report as a table")
    rep.add_argument("report", nargs="?", help="report JSON (default: config output_path)")
    return parser


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig().validate()
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ValueError("--seed must be an unsigned 64-bit integer")
        cfg = with_overrides(cfg, seed=args.seed)
    return cfg


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_train(args, cfg) -> int:
    outcome = experiments.run_train(cfg)
    print(f"epochs: {len(outcome.history)}")
    print(f"dev accuracy: {outcome.dev_accuracy:.4f}")
    print(f"checkpoint: {cfg.checkpoint_path}")
    return EXIT_OK


def cmd_evaluate(args, cfg) -> int:
    out = args.out or cfg.output_path
    indices, records, eps = experiments.run_evaluate(cfg)
    rep = report.build_report(cfg, indices, records, eps)
    report.write_report(rep, records, out)
    print(f"report: {out}")
    print(f"examples: {report.examples_path(out)}")
    if records and all(r.failed for r in records):
        print("error: every example failed", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_curves(args, cfg) -> int:
    rows = experiments.run_curves(cfg, ks=args.ks)
    text = report.write_rows(rows, experiments.CURVE_COLUMNS, args.out)
    if not args.out:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_interpolate(args, cfg) -> int:
    outcome = experiments.run_interpolate(cfg)
    rows = outcome.rows + [outcome.mean]
    text = report.write_rows(rows, experiments.INTERP_COLUMNS, args.out)
    if not args.out:
        sys.stdout.write(text)
    print(f"degenerate examples skipped: {outcome.degenerate}", file=sys.stderr)
    if not outcome.rows:
        print("error: no example produced a curve", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_report(args, cfg) -> int:
    rep = report.load_report(args.report or cfg.output_path)
    text = report.render_csv(rep) if args.format == "csv" else report.render_text(rep)
    _emit(text, args.out)
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "curves": cmd_curves,
    "interpolate": cmd_interpolate,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except FileNotFoundError as exc:
        print(f"error: {exc.filename or exc}: no such file", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, DegenerateDataError, FaithkitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
