"""Experiment metrics: per-step rows, sweep summaries, flat-file exports.

``aggregate`` folds transmission traces into one row per (session, step);
cross-session means with standard errors are produced by ``summarize`` and
``sweep_from_groups`` (the paper-style figures report bare means over runs,
here every mean carries its standard error and sample count).

Perceptual scores are never computed here: ``ingest_lpips`` merges a scores
file produced externally, matching rows by (session_id, t). Exports are CSV
or line-delimited JSON with a stable column order and lossless re-import.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .protocol import TransmissionTrace
from .scc import survival_decode

logger = logging.getLogger(__name__)

ROW_COLUMNS = ["session_id", "t", "words_sent", "chars_sent", "word_ratio",
               "char_ratio", "char_error_rate", "survival_rate", "lpips"]
SWEEP_COLUMNS = ["axis", "axis_value", "mean", "std_error", "n"]


class InconsistentConfigsError(ValueError):
    """Traces aggregated together must share one channel configuration."""


class MalformedScoreFileError(ValueError):
    """Scores file line is not valid JSON or misses required keys."""


class ExportFormat(Enum):
    CSV = "csv"
    JSONL = "jsonl"


class SweepAxis(Enum):
    SNR = "snr"
    CHARS_TRANSMITTED = "chars_transmitted"


@dataclass(frozen=True)
class MetricsRow:
    """Metrics after step t of one session; rates are cumulative."""

    session_id: str
    t: int
    words_sent: int
    chars_sent: int
    word_ratio: float
    char_ratio: float
    char_error_rate: float
    survival_rate: float
    lpips: float | None = None


@dataclass(frozen=True)
class SweepPoint:
    axis_value: float
    mean: float
    std_error: float
    n: int


@dataclass(frozen=True)
class SweepResult:
    axis: SweepAxis
    points: tuple[SweepPoint, ...]

    def __post_init__(self):
        values = [p.axis_value for p in self.points]
        if values != sorted(values):
            raise ValueError("sweep points must be sorted by axis value")
        if any(p.n < 1 for p in self.points):
            raise ValueError("every sweep point needs n >= 1")


def _channel_signature(trace: TransmissionTrace) -> tuple:
    c = trace.channel
    return (c.kind, c.snr_db, c.epsilon)


def aggregate(traces: Sequence[TransmissionTrace]) -> list[MetricsRow]:
    """One row per (session, step).

    char_error_rate is corrupted / transmitted characters up to t; the
    survival rate counts words recovered exactly by nearest-word decoding
    against the session's sent vocabulary. Compression ratios come from the
    trace meta (1.0, i.e. full prompt, when absent).
    """
    if not traces:
        raise ValueError("no traces to aggregate")
    signatures = {_channel_signature(t) for t in traces}
    if len(signatures) > 1:
        raise InconsistentConfigsError(
            f"traces mix channel configurations: {sorted(map(str, signatures))}")
    rows: list[MetricsRow] = []
    for trace in traces:
        vocabulary = sorted(set(trace.sent_words))
        word_ratio = float(trace.meta.get("word_ratio", 1.0))
        char_ratio = float(trace.meta.get("char_ratio", 1.0))
        survived = 0
        for step in trace.steps:
            decoded, _ = survival_decode(step.frame_received.payload, vocabulary)
            if decoded == step.frame_sent.payload:
                survived += 1
            t = step.metrics.words_sent
            rows.append(MetricsRow(
                session_id=trace.session_id,
                t=t,
                words_sent=t,
                chars_sent=step.metrics.chars_sent,
                word_ratio=word_ratio,
                char_ratio=char_ratio,
                char_error_rate=step.metrics.char_errors / step.metrics.chars_sent,
                survival_rate=survived / t,
            ))
    return rows


def summarize(values: Sequence[float]) -> tuple[float, float, int]:
    """Mean, standard error of the mean, and count."""
    n = len(values)
    if n == 0:
        raise ValueError("cannot summarize an empty sample")
    mean = sum(values) / n
    if n == 1:
        return mean, 0.0, 1
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n), n


def sweep_from_groups(axis: SweepAxis,
                      groups: Iterable[tuple[float, Sequence[float]]]) -> SweepResult:
    """Build a sweep from (axis_value, samples) groups, sorted by axis."""
    points = []
    for value, samples in sorted(groups, key=lambda g: g[0]):
        mean, se, n = summarize(list(samples))
        points.append(SweepPoint(axis_value=value, mean=mean, std_error=se, n=n))
    return SweepResult(axis=axis, points=tuple(points))


def ingest_lpips(rows: Sequence[MetricsRow], scores_file: str | Path) -> list[MetricsRow]:
    """Merge externally computed perceptual scores into matching rows.

    The file is line-delimited JSON with at least {"session_id", "t",
    "lpips"} per line. Unmatched lines are logged as warnings; rows are never
    invented.
    """
    scores: dict[tuple[str, int], float] = {}
    with open(scores_file) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                key = (str(obj["session_id"]), int(obj["t"]))
                scores[key] = float(obj["lpips"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise MalformedScoreFileError(
                    f"{scores_file}:{lineno}: {e}") from e
    row_keys = {(r.session_id, r.t) for r in rows}
    for key in sorted(scores.keys() - row_keys):
        logger.warning("lpips score for %s has no matching row", key)
    return [replace(r, lpips=scores.get((r.session_id, r.t), r.lpips)) for r in rows]


def _format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def export_rows(rows: Sequence[MetricsRow], fmt: ExportFormat, path: str | Path) -> None:
    """Write rows with the documented stable column order."""
    path = Path(path)
    if fmt is ExportFormat.CSV:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(ROW_COLUMNS)
            for r in rows:
                writer.writerow([_format_value(getattr(r, c)) for c in ROW_COLUMNS])
    else:
        with open(path, "w") as fh:
            for r in rows:
                fh.write(json.dumps({c: getattr(r, c) for c in ROW_COLUMNS},
                                    sort_keys=True) + "\n")


def import_rows(fmt: ExportFormat, path: str | Path) -> list[MetricsRow]:
    """Inverse of export_rows."""
    path = Path(path)
    rows: list[MetricsRow] = []
    if fmt is ExportFormat.CSV:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for rec in reader:
                rows.append(MetricsRow(
                    session_id=rec["session_id"],
                    t=int(rec["t"]),
                    words_sent=int(rec["words_sent"]),
                    chars_sent=int(rec["chars_sent"]),
                    word_ratio=float(rec["word_ratio"]),
                    char_ratio=float(rec["char_ratio"]),
                    char_error_rate=float(rec["char_error_rate"]),
                    survival_rate=float(rec["survival_rate"]),
                    lpips=float(rec["lpips"]) if rec["lpips"] else None,
                ))
    else:
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                rows.append(MetricsRow(**obj))
    return rows


def export_sweep(sweep: SweepResult, fmt: ExportFormat, path: str | Path) -> None:
    path = Path(path)
    records = [{"axis": sweep.axis.value, "axis_value": p.axis_value,
                "mean": p.mean, "std_error": p.std_error, "n": p.n}
               for p in sweep.points]
    if fmt is ExportFormat.CSV:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SWEEP_COLUMNS)
            for rec in records:
                writer.writerow([_format_value(rec[c]) for c in SWEEP_COLUMNS])
    else:
        with open(path, "w") as fh:
            for rec in records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def import_sweep(fmt: ExportFormat, path: str | Path) -> SweepResult:
    path = Path(path)
    if fmt is ExportFormat.CSV:
        with open(path, newline="") as fh:
            records = list(csv.DictReader(fh))
    else:
        with open(path) as fh:
            records = [json.loads(line) for line in fh if line.strip()]
    if not records:
        raise ValueError(f"{path} holds no sweep points")
    axis = SweepAxis(records[0]["axis"])
    points = tuple(SweepPoint(axis_value=float(r["axis_value"]), mean=float(r["mean"]),
                              std_error=float(r["std_error"]), n=int(r["n"]))
                   for r in records)
    return SweepResult(axis=axis, points=points)
