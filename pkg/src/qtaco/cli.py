"""Command-line entry point: ``qtaco {train,scan,analyze,report}``.

Exit status is 0 on success, 1 on usage errors and 2 on runtime errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .engine import EstimatorSettings
from .io import EVENTS, FEEDBACK, MANIFEST, analyze, export_csv, run_training
from .scan import fit_log_slope, variance_scaling_experiment, write_variance_csv
from .trainer import TrainingConfig

log = logging.getLogger("qtaco")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qtaco", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a circuit with live barren plateau monitoring")
    p.add_argument("--config", required=True, help="config JSON (or a run manifest)")
    p.add_argument("--out", required=True, help="run directory")

    p = sub.add_parser("scan", help="gradient-variance scaling over qubit counts")
    p.add_argument("--qubits", type=_int_list, default=[2, 4, 6, 8])
    p.add_argument("--layers-per-qubit", type=int, default=2)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("analyze", help="replay the estimator over an events file")
    p.add_argument("--events", required=True)
    p.add_argument("--window", type=int)
    p.add_argument("--tau-abs", type=float)
    p.add_argument("--tau-rel", type=float)
    p.add_argument("--drop-ratio", type=float)
    p.add_argument("--feedback", help="write feedback lines here instead of stdout")

    p = sub.add_parser("report", help="export plot-ready CSVs from an events file")
    p.add_argument("--events", required=True)
    p.add_argument("--out", required=True)
    return parser


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p


def _analysis_settings(args) -> EstimatorSettings:
    # Start from the run's own settings when the events file sits in a run directory.
    base = EstimatorSettings()
    manifest = Path(args.events).with_name(MANIFEST)
    if manifest.is_file():
        base = TrainingConfig.load(manifest).estimator
    overrides = {
        "window": args.window,
        "tau_abs": args.tau_abs,
        "tau_rel": args.tau_rel,
        "drop_ratio": args.drop_ratio,
    }
    merged = base.to_dict()
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return EstimatorSettings.from_dict(merged)


def cmd_train(args) -> None:
    config = TrainingConfig.load(_require_file(args.config))
    records, recorder = run_training(config, args.out)
    last = records[-1]
    print(
        f"trained {len(records)} epochs: train_loss={last.train_loss:.4f} "
        f"test_accuracy={last.test_accuracy:.3f} feedback_lines={len(recorder.messages)}"
    )
    print(f"wrote {Path(args.out) / EVENTS} and {Path(args.out) / FEEDBACK}")


def cmd_scan(args) -> None:
    table = variance_scaling_experiment(args.qubits, args.layers_per_qubit, args.samples, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_variance_csv(table, out / "variance_scaling.csv")
    for row in table:
        print(f"n={row.n_qubits:<3d} layers={row.n_layers:<3d} var={row.variance:.4e} +/- {row.stderr:.1e}")
    if len(table) >= 3:
        print(f"log-variance slope per qubit: {fit_log_slope(table):.4f}")


def cmd_analyze(args) -> None:
    events = _require_file(args.events)
    settings = _analysis_settings(args)
    reports, messages = analyze(events, settings, args.feedback)
    if args.feedback is None:
        for m in messages:
            print(m.text)
    flagged = sum(int(r.flags.sum()) for r in reports)
    print(f"analyzed {len(reports)} epochs, {flagged} parameter flags", file=sys.stderr)


def cmd_report(args) -> None:
    paths = export_csv(_require_file(args.events), args.out)
    for path in paths.values():
        print(path)


COMMANDS = {"train": cmd_train, "scan": cmd_scan, "analyze": cmd_analyze, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"qtaco {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, RuntimeError, OSError) as exc:
        log.debug("command failed", exc_info=True)
        print(f"qtaco {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
