"""Run directories: manifest, JSONL event stream, feedback file and CSV exports.

Event lines are single JSON objects with a ``kind`` discriminator:

``epoch``
    ``{"kind": "epoch", "epoch", "train_loss", "test_accuracy"}``
``gradient``
    ``{"kind": "gradient", "epoch", "param", "gate_kind", "grad", "window_variance", "flagged"}``;
    ``window_variance`` is null during estimator warm-up.
``gate_variance``
    ``{"kind": "gate_variance", "epoch", "gate_kind", "variance"}``

Both the events file and the feedback file are flushed once per epoch.
"""

from __future__ import annotations

import csv
import json
from collections import namedtuple
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .engine import (
    BarrenPlateauEstimator,
    BarrenPlateauReport,
    EstimatorSettings,
    FeedbackMessage,
    extract_structure,
    format_value,
    generate_feedback,
)
from .sim import ROTATION_KINDS
from .trainer import EpochRecord, TrainingConfig, prepare, train
from .vqc import VqcStructure, named_parameters

MANIFEST = "manifest.json"
STRUCTURE = "structure.json"
EVENTS = "events.jsonl"
FEEDBACK = "feedback.txt"
METRICS_CSV = "metrics.csv"
GATE_VARIANCE_CSV = "gate_variance.csv"
FLAGS_CSV = "flags.csv"

# Parameter identity as recoverable from an events file.
RecordedParam = namedtuple("RecordedParam", "index gate_kind")


class EventParseError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


def _dumps(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def event_lines(record: EpochRecord, report: BarrenPlateauReport, descriptors) -> list[dict]:
    lines = [
        {
            "kind": "epoch",
            "epoch": record.epoch,
            "train_loss": record.train_loss,
            "test_accuracy": record.test_accuracy,
        }
    ]
    for d in descriptors:
        lines.append(
            {
                "kind": "gradient",
                "epoch": record.epoch,
                "param": d.index,
                "gate_kind": d.gate_kind,
                "grad": float(record.gradient[d.index]),
                "window_variance": None if report.warming_up else float(report.per_param_variance[d.index]),
                "flagged": bool(report.flags[d.index]),
            }
        )
    for kind, variance in report.per_gate_type_variance.items():
        lines.append({"kind": "gate_variance", "epoch": record.epoch, "gate_kind": kind, "variance": variance})
    return lines


def write_events(sink, lines) -> None:
    """Append JSON lines to an open text sink and flush."""
    sink.write("".join(_dumps(line) + "\n" for line in lines))
    sink.flush()


def write_feedback(sink, messages) -> None:
    if messages:
        sink.write("".join(m.text + "\n" for m in messages))
    sink.flush()


@dataclass
class RunRecorder:
    """Training sink: runs the estimator on each epoch and writes events and feedback."""

    descriptors: tuple
    settings: EstimatorSettings
    events: object
    feedback: object
    reports: list = field(default_factory=list)
    messages: list = field(default_factory=list)

    def __post_init__(self):
        self.estimator = BarrenPlateauEstimator(len(self.descriptors), self.settings)

    def __call__(self, record: EpochRecord) -> None:
        report = self.estimator.update(record.epoch, record.gradient, self.descriptors)
        messages = generate_feedback(report, self.descriptors)
        write_events(self.events, event_lines(record, report, self.descriptors))
        write_feedback(self.feedback, messages)
        self.reports.append(report)
        self.messages.extend(messages)


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def build_manifest(config: TrainingConfig, vqc: VqcStructure, status: str, epochs_completed: int, **extra) -> dict:
    manifest = {
        "tool": "qtaco",
        "version": __version__,
        "started": _timestamp(),
        "status": status,
        "epochs_completed": epochs_completed,
        "config": config.to_dict(),
        "structure": vqc.to_dict(),
        "estimator": config.estimator.to_dict(),
        "files": [MANIFEST, STRUCTURE, EVENTS, FEEDBACK],
    }
    manifest.update(extra)
    return manifest


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def run_training(config: TrainingConfig, out_dir) -> tuple[list[EpochRecord], RunRecorder]:
    """Train with live monitoring, writing a self-contained run directory.

    On failure the manifest records ``status: "failed"`` with the error and
    the number of epochs that reached the events file.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    vqc, train_set, test_set = prepare(config)
    manifest = build_manifest(config, vqc, "running", 0)
    write_json(out / MANIFEST, manifest)
    write_json(out / STRUCTURE, extract_structure(vqc).to_dict())
    with open(out / EVENTS, "w") as events, open(out / FEEDBACK, "w") as feedback:
        recorder = RunRecorder(named_parameters(vqc), config.estimator, events, feedback)
        try:
            records = train(config, [recorder], vqc=vqc, datasets=(train_set, test_set))
        except Exception as exc:
            manifest.update(
                status="failed",
                epochs_completed=len(recorder.reports),
                error=f"{type(exc).__name__}: {exc}",
                notice="events.jsonl and feedback.txt are partial",
            )
            write_json(out / MANIFEST, manifest)
            raise
    manifest.update(status="complete", epochs_completed=len(records))
    write_json(out / MANIFEST, manifest)
    return records, recorder


def read_events(path) -> list[dict]:
    """Parse and validate an events file; errors name the offending line."""
    out = []
    last_epoch = None
    required = {
        "epoch": ("epoch", "train_loss", "test_accuracy"),
        "gradient": ("epoch", "param", "gate_kind", "grad", "window_variance", "flagged"),
        "gate_variance": ("epoch", "gate_kind", "variance"),
    }
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise EventParseError(path, lineno, f"invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict) or obj.get("kind") not in required:
                raise EventParseError(path, lineno, "missing or unknown 'kind'")
            missing = [k for k in required[obj["kind"]] if k not in obj]
            if missing:
                raise EventParseError(path, lineno, f"{obj['kind']} line lacks {missing}")
            if not isinstance(obj["epoch"], int):
                raise EventParseError(path, lineno, "epoch must be an integer")
            if last_epoch is not None and obj["epoch"] < last_epoch:
                raise EventParseError(path, lineno, f"epoch {obj['epoch']} after epoch {last_epoch}")
            last_epoch = obj["epoch"]
            obj["_line"] = lineno
            out.append(obj)
    return out


def gradient_stream(events, path="<events>") -> tuple[tuple[RecordedParam, ...], list[tuple[int, list[float]]]]:
    """Group gradient lines into (epoch, gradient vector) pairs plus the parameter registry."""
    by_epoch: dict[int, list[dict]] = {}
    for ev in events:
        if ev["kind"] == "gradient":
            by_epoch.setdefault(ev["epoch"], []).append(ev)
    if not by_epoch:
        return (), []
    first = sorted(by_epoch[min(by_epoch)], key=lambda e: e["param"])
    params = tuple(RecordedParam(e["param"], e["gate_kind"]) for e in first)
    if [p.index for p in params] != list(range(len(params))):
        raise EventParseError(path, first[0]["_line"], "parameter indices are not 0..P-1")
    stream = []
    for epoch in sorted(by_epoch):
        lines = sorted(by_epoch[epoch], key=lambda e: e["param"])
        if [(e["param"], e["gate_kind"]) for e in lines] != [tuple(p) for p in params]:
            raise EventParseError(path, lines[0]["_line"], f"epoch {epoch} gradient lines do not match registry")
        stream.append((epoch, [float(e["grad"]) for e in lines]))
    return params, stream


def analyze(events_path, settings: EstimatorSettings, feedback_path=None):
    """Replay the estimator over a recorded gradient stream.

    Returns ``(reports, messages)`` and writes the feedback lines to
    ``feedback_path`` when given.
    """
    params, stream = gradient_stream(read_events(events_path), events_path)
    estimator = BarrenPlateauEstimator(len(params), settings)
    reports: list[BarrenPlateauReport] = []
    messages: list[FeedbackMessage] = []
    for epoch, gradient in stream:
        report = estimator.update(epoch, gradient, params)
        reports.append(report)
        messages.extend(generate_feedback(report, params))
    if feedback_path is not None:
        Path(feedback_path).write_text("".join(m.text + "\n" for m in messages))
    return reports, messages


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def export_csv(events_path, out_dir) -> dict[str, Path]:
    """Write metrics.csv, gate_variance.csv and flags.csv for plotting."""
    events = read_events(events_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    metrics = [
        (ev["epoch"], format_value(ev["train_loss"]), format_value(ev["test_accuracy"]))
        for ev in events
        if ev["kind"] == "epoch"
    ]
    _write_csv(out / METRICS_CSV, ("epoch", "train_loss", "test_accuracy"), metrics)

    gate_rows: dict[int, dict[str, float]] = {}
    for ev in events:
        if ev["kind"] == "gate_variance":
            gate_rows.setdefault(ev["epoch"], {})[ev["gate_kind"]] = ev["variance"]
    kinds = [k for k in ROTATION_KINDS if any(k in row for row in gate_rows.values())]
    _write_csv(
        out / GATE_VARIANCE_CSV,
        ("epoch", *kinds),
        [(epoch, *(format_value(row[k]) if k in row else "" for k in kinds)) for epoch, row in gate_rows.items()],
    )

    flags = [
        (ev["epoch"], ev["param"], ev["gate_kind"], format_value(ev["window_variance"]))
        for ev in events
        if ev["kind"] == "gradient" and ev["flagged"]
    ]
    _write_csv(out / FLAGS_CSV, ("epoch", "param", "type", "value"), flags)
    return {name: out / name for name in (METRICS_CSV, GATE_VARIANCE_CSV, FLAGS_CSV)}
