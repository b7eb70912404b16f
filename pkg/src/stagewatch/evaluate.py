"""Temporal-IoU efficiency evaluation over stage timelines.

A run's timeline is a list of contiguous half-open intervals [start, end) in
integer milliseconds, one per stage. Efficiency is the Jaccard overlap of the
predicted interval with the true interval, per stage, aggregated over runs.

File formats owned here:

* Timeline CSV: header ``run_id,cohort,stage_index,start_s`` with one row per
  stage start and one final row per run where ``stage_index`` equals the
  stage count and ``start_s`` is the completion time. Times are seconds as
  decimal strings, converted to milliseconds exactly (x1000, no float round
  trip).
* Efficiency report JSON: ``{"per_stage": [...], "overall": x,
  "cohorts": {...}, "histogram": {"edges": [...], "counts": [...]},
  "sample_count": n}``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import FormatError, InputError

DEFAULT_HIST_BINS = 20


@dataclass(frozen=True)
class StageInterval:
    """Half-open interval [start_ms, end_ms)."""

    start_ms: int
    end_ms: int

    def __post_init__(self) -> None:
        if self.end_ms < self.start_ms:
            raise InputError(f"interval end {self.end_ms} precedes start {self.start_ms}")

    @property
    def length_ms(self) -> int:
        return self.end_ms - self.start_ms


@dataclass(frozen=True)
class Timeline:
    """Per-run stage intervals; contiguous and ordered."""

    run_id: str
    cohort: str
    intervals: tuple[StageInterval, ...]

    def __post_init__(self) -> None:
        if not self.intervals:
            raise InputError("timeline must contain at least one stage interval")
        for i in range(len(self.intervals) - 1):
            if self.intervals[i].end_ms != self.intervals[i + 1].start_ms:
                raise InputError(
                    f"timeline intervals must be contiguous: interval {i} ends at "
                    f"{self.intervals[i].end_ms} but interval {i + 1} starts at "
                    f"{self.intervals[i + 1].start_ms}"
                )

    @property
    def stage_count(self) -> int:
        return len(self.intervals)

    @property
    def stage_starts(self) -> tuple[int, ...]:
        return tuple(iv.start_ms for iv in self.intervals)

    @property
    def completion_ms(self) -> int:
        return self.intervals[-1].end_ms


@dataclass(frozen=True)
class IoUVector:
    """Per-stage IoU values for one run."""

    run_id: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class EfficiencyReport:
    per_stage_mean: tuple[float, ...]
    per_stage_std: tuple[float, ...]
    overall_mean: float
    cohort_means: dict[str, float]
    histogram_edges: tuple[float, ...]
    histogram_counts: tuple[int, ...]
    sample_count: int

    @property
    def stage_count(self) -> int:
        return len(self.per_stage_mean)


def interval_iou(a: StageInterval, b: StageInterval) -> float:
    """Overlap duration divided by union duration, in [0, 1].

    Conventions for degenerate inputs: two empty intervals agree perfectly
    (1.0); one empty against one non-empty is total disagreement (0.0). Both
    are the limits of the ratio and keep the metric total.
    """
    overlap = max(0, min(a.end_ms, b.end_ms) - max(a.start_ms, b.start_ms))
    union = a.length_ms + b.length_ms - overlap
    if union == 0:
        return 1.0
    return overlap / union


def discretized_iou_oracle(a: StageInterval, b: StageInterval, resolution_ms: int) -> float:
    """Mask-based cross-check for :func:`interval_iou`.

    Rasterizes both intervals into binary masks sampled every
    ``resolution_ms`` and returns the mask-count ratio. Exact for integer-ms
    intervals at resolution 1; a test oracle, not a production path.
    """
    if resolution_ms < 1:
        raise InputError(f"resolution_ms must be >= 1, got {resolution_ms}")
    lo = min(a.start_ms, b.start_ms)
    hi = max(a.end_ms, b.end_ms)
    points = np.arange(lo, hi, resolution_ms)
    mask_a = (points >= a.start_ms) & (points < a.end_ms)
    mask_b = (points >= b.start_ms) & (points < b.end_ms)
    union = int(np.count_nonzero(mask_a | mask_b))
    if union == 0:
        return 1.0
    return int(np.count_nonzero(mask_a & mask_b)) / union


def timeline_from_starts(stage_starts: Sequence[int], completion_ms: int,
                         run_id: str = "run", cohort: str = "") -> Timeline:
    """Build contiguous intervals from stage-start timestamps.

    ``stage_starts`` must be strictly increasing and ``completion_ms`` must
    exceed the final start; interval i runs from start i to start i+1, the
    last interval ends at completion.
    """
    if not stage_starts:
        raise InputError("at least one stage start is required")
    boundaries = list(stage_starts) + [completion_ms]
    for i in range(len(boundaries) - 1):
        if boundaries[i + 1] <= boundaries[i]:
            raise InputError(
                f"stage starts must be strictly increasing and completion must follow "
                f"the last start; got {boundaries[i + 1]} after {boundaries[i]}"
            )
    intervals = tuple(StageInterval(boundaries[i], boundaries[i + 1])
                      for i in range(len(stage_starts)))
    return Timeline(run_id=run_id, cohort=cohort, intervals=intervals)


def timeline_iou(predicted: Timeline, truth: Timeline) -> IoUVector:
    """Element-wise interval IoU between a predicted and a true timeline."""
    if predicted.stage_count != truth.stage_count:
        raise InputError(
            f"stage-count mismatch: predicted has {predicted.stage_count}, "
            f"truth has {truth.stage_count}"
        )
    if predicted.run_id != truth.run_id:
        raise InputError(
            f"run mismatch: predicted {predicted.run_id!r} vs truth {truth.run_id!r}"
        )
    values = tuple(interval_iou(p, t)
                   for p, t in zip(predicted.intervals, truth.intervals))
    return IoUVector(run_id=truth.run_id, values=values)


def aggregate(iou_vectors: Sequence[IoUVector],
              cohorts: Mapping[str, str] | None = None,
              hist_bins: int = DEFAULT_HIST_BINS) -> EfficiencyReport:
    """Per-stage means and deviations, overall and per-cohort means, histogram.

    ``cohorts`` maps run_id to a cohort label; when given it must cover every
    run. Standard deviations are population deviations (ddof=0) so a report
    is a deterministic function of its samples.
    """
    if not iou_vectors:
        raise InputError("aggregate requires at least one IoU vector")
    stage_count = len(iou_vectors[0].values)
    for vec in iou_vectors:
        if len(vec.values) != stage_count:
            raise InputError(
                f"run {vec.run_id!r} has {len(vec.values)} stages, expected {stage_count}"
            )

    matrix = np.array([vec.values for vec in iou_vectors], dtype=float)
    per_stage_mean = tuple(float(v) for v in matrix.mean(axis=0))
    per_stage_std = tuple(float(v) for v in matrix.std(axis=0, ddof=0))
    overall_mean = float(matrix.mean())

    cohort_means: dict[str, float] = {}
    if cohorts is not None:
        by_label: dict[str, list[np.ndarray]] = {}
        for vec, row in zip(iou_vectors, matrix):
            try:
                label = cohorts[vec.run_id]
            except KeyError:
                raise InputError(f"run {vec.run_id!r} has no cohort label") from None
            by_label.setdefault(label, []).append(row)
        cohort_means = {label: float(np.mean(rows))
                        for label, rows in sorted(by_label.items())}

    if hist_bins < 1:
        raise InputError(f"hist_bins must be >= 1, got {hist_bins}")
    counts, edges = np.histogram(matrix.ravel(), bins=hist_bins, range=(0.0, 1.0))

    return EfficiencyReport(
        per_stage_mean=per_stage_mean,
        per_stage_std=per_stage_std,
        overall_mean=overall_mean,
        cohort_means=cohort_means,
        histogram_edges=tuple(float(e) for e in edges),
        histogram_counts=tuple(int(c) for c in counts),
        sample_count=int(matrix.size),
    )


# ---------------------------------------------------------------------------
# Timeline CSV
# ---------------------------------------------------------------------------

TIMELINE_CSV_HEADER = ("run_id", "cohort", "stage_index", "start_s")


def format_seconds(ms: int) -> str:
    """Milliseconds to an exact decimal-seconds string (1234 -> "1.234")."""
    return str(Decimal(ms).scaleb(-3))


def parse_seconds(text: str) -> int:
    """Decimal-seconds string to integer milliseconds, exactly."""
    try:
        value = Decimal(text) * 1000
    except InvalidOperation as exc:
        raise FormatError(f"not a decimal seconds value: {text!r}") from exc
    if value != value.to_integral_value():
        raise FormatError(f"time {text!r} is finer than millisecond resolution")
    return int(value)


def timeline_csv_rows(timeline: Timeline) -> list[tuple[str, str, int, str]]:
    rows = [(timeline.run_id, timeline.cohort, i, format_seconds(iv.start_ms))
            for i, iv in enumerate(timeline.intervals)]
    rows.append((timeline.run_id, timeline.cohort, timeline.stage_count,
                 format_seconds(timeline.completion_ms)))
    return rows


def write_timeline_csv(timelines: Iterable[Timeline], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TIMELINE_CSV_HEADER)
        for timeline in timelines:
            writer.writerows(timeline_csv_rows(timeline))


def read_timeline_csv(path: str | Path) -> list[Timeline]:
    """Parse a timeline CSV back into Timeline values.

    Every run must be complete: stage rows 0..n-1 in order plus the final
    completion row at index n. Partial exports (from runs that never
    finished) are rejected by name.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TIMELINE_CSV_HEADER:
            raise FormatError(
                f"{path}: expected header {','.join(TIMELINE_CSV_HEADER)}, got {header}"
            )
        runs: dict[str, dict[str, Any]] = {}
        order: list[str] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
            run_id, cohort, index_text, start_text = row
            try:
                index = int(index_text)
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: bad stage_index {index_text!r}") from exc
            entry = runs.get(run_id)
            if entry is None:
                entry = {"cohort": cohort, "starts": []}
                runs[run_id] = entry
                order.append(run_id)
            if entry["cohort"] != cohort:
                raise FormatError(f"{path}:{lineno}: run {run_id!r} changes cohort")
            if index != len(entry["starts"]):
                raise FormatError(
                    f"{path}:{lineno}: run {run_id!r} stage_index {index} out of order"
                )
            entry["starts"].append(parse_seconds(start_text))

    timelines = []
    for run_id in order:
        entry = runs[run_id]
        starts = entry["starts"]
        if len(starts) < 2:
            raise FormatError(f"{path}: run {run_id!r} is incomplete (no completion row)")
        try:
            timelines.append(timeline_from_starts(starts[:-1], starts[-1],
                                                  run_id=run_id, cohort=entry["cohort"]))
        except InputError as exc:
            raise FormatError(f"{path}: run {run_id!r}: {exc}") from exc
    return timelines


# ---------------------------------------------------------------------------
# Efficiency report JSON
# ---------------------------------------------------------------------------

def report_to_dict(report: EfficiencyReport) -> dict[str, Any]:
    return {
        "per_stage": [{"stage_index": i, "mean_iou": m, "std_iou": s}
                      for i, (m, s) in enumerate(zip(report.per_stage_mean,
                                                     report.per_stage_std))],
        "overall": report.overall_mean,
        "cohorts": dict(report.cohort_means),
        "histogram": {"edges": list(report.histogram_edges),
                      "counts": list(report.histogram_counts)},
        "sample_count": report.sample_count,
    }


def report_from_dict(doc: Mapping[str, Any]) -> EfficiencyReport:
    try:
        per_stage = doc["per_stage"]
        means = tuple(float(entry["mean_iou"]) for entry in per_stage)
        stds = tuple(float(entry["std_iou"]) for entry in per_stage)
        for i, entry in enumerate(per_stage):
            if entry["stage_index"] != i:
                raise FormatError(f"per_stage[{i}] carries stage_index {entry['stage_index']}")
        return EfficiencyReport(
            per_stage_mean=means,
            per_stage_std=stds,
            overall_mean=float(doc["overall"]),
            cohort_means={str(k): float(v) for k, v in doc["cohorts"].items()},
            histogram_edges=tuple(float(e) for e in doc["histogram"]["edges"]),
            histogram_counts=tuple(int(c) for c in doc["histogram"]["counts"]),
            sample_count=int(doc["sample_count"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed efficiency report: {exc}") from exc


def write_report_json(report: EfficiencyReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report_to_dict(report), indent=2) + "\n",
                          encoding="utf-8")


def read_report_json(path: str | Path) -> EfficiencyReport:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    return report_from_dict(doc)
