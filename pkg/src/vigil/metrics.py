"""Mission evaluation metrics and comparison reports.

Interval attribution is right-open: a sample's state covers the time until
the next sample, and the final sample covers one nominal frame interval.
Usable-frame percentages are reported to 0.1%.
"""

from __future__ import annotations

import csv
import io
import logging
import statistics
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .core import VigilanceConfig, VigilanceSample
from .replay import ReplayResult, adverse_runs
from .trace_io import EventKind, GroundTruthEvent, MissionTrace

logger = logging.getLogger(__name__)


class InterventionAccounting(str, Enum):
    """How frames touched by a simulated intervention enter usable-frame
    percentages. The recording cannot say which is right, so all three are
    computable; CALMED_USABLE is the reporting default."""

    CALMED_USABLE = "calmed_usable"          # counterfactually calm frames count as usable
    INTERVENED_UNUSABLE = "intervened_unusable"  # engage..release frames never usable
    INTERVENED_EXCLUDED = "intervened_excluded"  # engage..release frames leave the denominator


@dataclass(frozen=True)
class UsableFrames:
    total_pct: float
    sampling_pct: float | None
    usable_count: int
    total_count: int
    sampling_usable_count: int
    sampling_count: int


@dataclass(frozen=True)
class DurationPair:
    total_ms: float
    sampling_ms: float | None


@dataclass(frozen=True)
class MetricsReport:
    mission_id: str
    warning_window_s: float | None
    first_detection_ms: int | None
    usable: UsableFrames
    adverse_behavior_ms: float
    raw_adverse_ms: float
    mission_duration: DurationPair
    detection_true_positives: tuple[bool, ...]
    diagnostics: tuple[str, ...]


def _infer_interval_ms(samples: Sequence[VigilanceSample]) -> float:
    diffs = [
        b.timestamp_ms - a.timestamp_ms
        for a, b in zip(samples, samples[1:])
        if b.timestamp_ms > a.timestamp_ms
    ]
    if not diffs:
        raise ValueError("cannot infer a frame interval from fewer than two samples")
    return float(statistics.median(diffs))


def first_exceedance_ms(samples: Sequence[VigilanceSample], theta_s: float) -> int | None:
    """Timestamp of the first sample whose score strictly exceeds theta_s."""
    for sample in samples:
        if sample.score is not None and sample.score > theta_s:
            return sample.timestamp_ms
    return None


def warning_window(
    samples: Sequence[VigilanceSample],
    events: Iterable[GroundTruthEvent],
    theta_s: float,
) -> float | None:
    """Seconds between the first threshold exceedance and the first recorded
    flight response. Absent when either endpoint is missing; negative values
    (detection after flight began) are reported as-is with a logged
    diagnostic."""
    detected_ms = first_exceedance_ms(samples, theta_s)
    flight_starts = [e.start_ms for e in events if e.kind is EventKind.FLIGHT_RESPONSE]
    if detected_ms is None or not flight_starts:
        return None
    window_s = (min(flight_starts) - detected_ms) / 1000.0
    if window_s < 0:
        logger.warning(
            "first exceedance at %d ms follows flight response at %d ms: missed warning",
            detected_ms,
            min(flight_starts),
        )
    return window_s


def _in_any(ts: int | float, spans: Sequence[tuple[float, float]]) -> bool:
    return any(start <= ts < end for start, end in spans)


def usable_frames(
    samples: Sequence[VigilanceSample],
    trace: MissionTrace,
    config: VigilanceConfig,
) -> UsableFrames:
    """Raw data-quality yardstick: percentage of frames with at least one
    confidently-scored individual and a score at or below theta_s."""
    sampling_spans = trace.metadata.sampling_phases
    return _usable(samples, sampling_spans, config.theta_s, cf_spans=None, accounting=None, interventions=())


def usable_frames_counterfactual(
    result: ReplayResult,
    accounting: InterventionAccounting = InterventionAccounting.CALMED_USABLE,
) -> UsableFrames:
    """Usable percentages under the replay's counterfactual adverse spans."""
    intervened = tuple((i.engage_ms, i.release_ms) for i in result.interventions)
    return _usable(
        result.samples,
        result.metadata.sampling_phases,
        result.theta_s,
        cf_spans=result.counterfactual_adverse_spans,
        accounting=accounting,
        interventions=intervened,
    )


def _usable(
    samples: Sequence[VigilanceSample],
    sampling_spans: Sequence[tuple[int, int]],
    theta_s: float,
    cf_spans: Sequence[tuple[float, float]] | None,
    accounting: InterventionAccounting | None,
    interventions: Sequence[tuple[float, float]],
) -> UsableFrames:
    usable_count = 0
    total_count = 0
    sampling_usable = 0
    sampling_count = 0
    for sample in samples:
        ts = sample.timestamp_ms
        in_sampling = _in_any(ts, sampling_spans)
        if accounting is InterventionAccounting.INTERVENED_EXCLUDED and _in_any(ts, interventions):
            continue
        total_count += 1
        if in_sampling:
            sampling_count += 1
        detected = sample.n_included >= 1
        if cf_spans is None:
            calm = sample.score is not None and sample.score <= theta_s
        else:
            calm = not _in_any(ts, cf_spans) and not sample.degraded
        ok = detected and calm
        if ok and accounting is InterventionAccounting.INTERVENED_UNUSABLE and _in_any(ts, interventions):
            ok = False
        if ok:
            usable_count += 1
            if in_sampling:
                sampling_usable += 1
    total_pct = 100.0 * usable_count / total_count if total_count else 0.0
    sampling_pct = (
        100.0 * sampling_usable / sampling_count if sampling_count else None
    )
    return UsableFrames(
        total_pct=total_pct,
        sampling_pct=sampling_pct,
        usable_count=usable_count,
        total_count=total_count,
        sampling_usable_count=sampling_usable,
        sampling_count=sampling_count,
    )


def adverse_duration(
    samples: Sequence[VigilanceSample],
    config: VigilanceConfig,
    frame_interval_ms: float | None = None,
) -> float:
    """Cumulative milliseconds above theta_s under right-open attribution."""
    if not samples:
        return 0.0
    if frame_interval_ms is None:
        if len(samples) == 1:
            raise ValueError("frame_interval_ms required for a single-sample timeline")
        frame_interval_ms = _infer_interval_ms(samples)
    runs = adverse_runs(samples, config.theta_s, frame_interval_ms)
    return sum(end - start for start, end in runs)


def detection_true_positives(
    samples: Sequence[VigilanceSample],
    events: Iterable[GroundTruthEvent],
    theta_s: float,
) -> tuple[bool, ...]:
    """Per annotated vigilance event: did any sample inside the interval
    exceed theta_s?"""
    flags = []
    for event in events:
        if event.kind is not EventKind.ALERT_VIGILANCE:
            continue
        hit = any(
            s.score is not None
            and s.score > theta_s
            and event.start_ms <= s.timestamp_ms < event.end_ms
            for s in samples
        )
        flags.append(hit)
    return tuple(flags)


def build_metrics_report(
    result: ReplayResult,
    accounting: InterventionAccounting = InterventionAccounting.CALMED_USABLE,
) -> MetricsReport:
    """Aggregate one replay into the standard per-mission metrics."""
    interval = result.metadata.frame_interval_ms
    samples = result.samples
    diagnostics: list[str] = []

    window = warning_window(samples, result.ground_truth, result.theta_s)
    if window is not None and window < 0:
        diagnostics.append("first exceedance follows flight response: missed warning")

    if result.intervention is None:
        usable = _usable(
            samples, result.metadata.sampling_phases, result.theta_s,
            cf_spans=None, accounting=None, interventions=(),
        )
        adverse_ms = result.raw_adverse_ms
    else:
        usable = usable_frames_counterfactual(result, accounting)
        adverse_ms = result.counterfactual_adverse_ms

    duration_total = samples[-1].timestamp_ms + interval if samples else 0.0
    sampling_ms: float | None = None
    if result.metadata.sampling_phases:
        sampling_ms = float(sum(end - start for start, end in result.metadata.sampling_phases))

    return MetricsReport(
        mission_id=result.mission_id,
        warning_window_s=window,
        first_detection_ms=first_exceedance_ms(samples, result.theta_s),
        usable=usable,
        adverse_behavior_ms=adverse_ms,
        raw_adverse_ms=result.raw_adverse_ms,
        mission_duration=DurationPair(total_ms=duration_total, sampling_ms=sampling_ms),
        detection_true_positives=detection_true_positives(
            samples, result.ground_truth, result.theta_s
        ),
        diagnostics=tuple(diagnostics),
    )


def format_mmss(ms: float | None) -> str:
    """mm:ss rendering, rounded to the nearest second."""
    if ms is None:
        return "-"
    total_s = int(round(ms / 1000.0))
    return f"{total_s // 60:02d}:{total_s % 60:02d}"


def format_pct(pct: float | None) -> str:
    return "-" if pct is None else f"{pct:.1f}"


@dataclass(frozen=True)
class ComparisonRow:
    label: str
    usable_total_pct: float
    usable_sampling_pct: float | None
    adverse_ms: float
    duration_total_ms: float
    duration_sampling_ms: float | None


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[ComparisonRow, ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(
            [
                "method",
                "usable_total_pct",
                "usable_sampling_pct",
                "adverse_mmss",
                "mission_total_mmss",
                "mission_sampling_mmss",
            ]
        )
        for row in self.rows:
            writer.writerow(
                [
                    row.label,
                    format_pct(row.usable_total_pct),
                    format_pct(row.usable_sampling_pct),
                    format_mmss(row.adverse_ms),
                    format_mmss(row.duration_total_ms),
                    format_mmss(row.duration_sampling_ms),
                ]
            )
        return buf.getvalue()

    def to_markdown(self) -> str:
        lines = [
            "| Method | Usable frames (%) total / sampling | Adverse (mm:ss) | Mission time total / sampling |",
            "| --- | --- | --- | --- |",
        ]
        for row in self.rows:
            lines.append(
                f"| {row.label} "
                f"| {format_pct(row.usable_total_pct)} / {format_pct(row.usable_sampling_pct)} "
                f"| {format_mmss(row.adverse_ms)} "
                f"| {format_mmss(row.duration_total_ms)} / {format_mmss(row.duration_sampling_ms)} |"
            )
        return "\n".join(lines) + "\n"


def comparison_report(
    results: Sequence[tuple[str, ReplayResult]],
    accounting: InterventionAccounting = InterventionAccounting.CALMED_USABLE,
) -> ComparisonReport:
    """Per-method comparison rows from labeled replay results."""
    if not results:
        raise ValueError("comparison_report requires at least one result")
    rows = []
    for label, result in results:
        report = build_metrics_report(result, accounting)
        rows.append(
            ComparisonRow(
                label=label,
                usable_total_pct=report.usable.total_pct,
                usable_sampling_pct=report.usable.sampling_pct,
                adverse_ms=report.adverse_behavior_ms,
                duration_total_ms=report.mission_duration.total_ms,
                duration_sampling_ms=report.mission_duration.sampling_ms,
            )
        )
    return ComparisonReport(rows=tuple(rows))


def mean_warning_window_s(reports: Iterable[MetricsReport]) -> float | None:
    windows = [r.warning_window_s for r in reports if r.warning_window_s is not None]
    if not windows:
        return None
    return sum(windows) / len(windows)
