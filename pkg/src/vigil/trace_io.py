"""Mission trace files: parsing, validation, writing.

Format (`.vtrace.jsonl`, schema version 1): the first line is a JSON header
object carrying the metadata and ground-truth events; every following line is
one frame observation as a JSON object. The format is streamable (consumers
can start before the file ends) and appendable during live capture. Unknown
fields are preserved through a parse/write round trip so third-party exports
can carry extra annotations.

The parser is total: malformed input of any kind raises a typed TraceError
naming the offending line and field, never an unhandled exception.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Iterator

from .core import BehaviorLabel, BoundingBox, FrameObservation, IndividualObservation

SCHEMA_VERSION = 1
TRACE_SUFFIX = ".vtrace.jsonl"


class TraceError(Exception):
    """Base class for trace file problems."""

    def __init__(self, message: str, *, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)


class TraceSchemaError(TraceError):
    """Malformed JSON, missing or mistyped fields."""


class TraceOrderingError(TraceError):
    """Frame indices or timestamps out of order."""


class TraceInvariantError(TraceError):
    """Structurally well-formed but semantically invalid content."""


class CollectionMode(str, Enum):
    HITL = "hitl"
    HOTL = "hotl"
    SYNTHETIC = "synthetic"


class EventKind(str, Enum):
    FLIGHT_RESPONSE = "flight_response"
    ALERT_VIGILANCE = "alert_vigilance"


@dataclass(frozen=True)
class GroundTruthEvent:
    kind: EventKind
    start_ms: int
    end_ms: int
    extra: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class MissionMetadata:
    mission_id: str
    species: str = "unknown"
    herd_size: int = 1
    fps: float = 30.0
    altitude_m: float | None = None
    collection_mode: CollectionMode = CollectionMode.SYNTHETIC
    battery_pct: float | None = None
    # Half-open [start_ms, end_ms) intervals marking the active sampling
    # phase(s) of the mission, used by data-quality metrics.
    sampling_phases: tuple[tuple[int, int], ...] = ()
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.herd_size < 1:
            raise ValueError(f"herd_size must be >= 1, got {self.herd_size}")
        if not self.fps > 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        if not isinstance(self.sampling_phases, tuple):
            object.__setattr__(
                self, "sampling_phases", tuple(tuple(p) for p in self.sampling_phases)
            )

    @property
    def frame_interval_ms(self) -> float:
        return 1000.0 / self.fps


@dataclass(frozen=True)
class MissionTrace:
    metadata: MissionMetadata
    frames: tuple[FrameObservation, ...]
    events: tuple[GroundTruthEvent, ...] = ()
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not isinstance(self.frames, tuple):
            object.__setattr__(self, "frames", tuple(self.frames))
        if not isinstance(self.events, tuple):
            object.__setattr__(self, "events", tuple(self.events))

    @property
    def duration_ms(self) -> int:
        """Nominal mission length: last frame timestamp plus one frame interval."""
        if not self.frames:
            return 0
        return int(round(self.frames[-1].timestamp_ms + self.metadata.frame_interval_ms))


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    location: str
    message: str


_METADATA_KEYS = {
    "mission_id",
    "species",
    "herd_size",
    "fps",
    "altitude_m",
    "collection_mode",
    "battery_pct",
    "sampling_phases",
}
_EVENT_KEYS = {"kind", "start_ms", "end_ms"}
_FRAME_KEYS = {"frame_index", "timestamp_ms", "individuals"}
_INDIVIDUAL_KEYS = {"id", "bbox", "detection_confidence", "behavior", "behavior_confidence"}
_HEADER_KEYS = {"v", "metadata", "events"}


def _require(obj: dict, key: str, line: int) -> Any:
    if key not in obj:
        raise TraceSchemaError("missing required field", line=line, field=key)
    return obj[key]


def _as_int(value: Any, key: str, line: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise TraceSchemaError(f"expected integer, got {value!r}", line=line, field=key)
    return value


def _as_number(value: Any, key: str, line: int) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TraceSchemaError(f"expected number, got {value!r}", line=line, field=key)
    return float(value)


def _as_str(value: Any, key: str, line: int) -> str:
    if not isinstance(value, str):
        raise TraceSchemaError(f"expected string, got {value!r}", line=line, field=key)
    return value


def _parse_individual(obj: Any, line: int) -> IndividualObservation:
    if not isinstance(obj, dict):
        raise TraceSchemaError("individual must be an object", line=line, field="individuals")
    raw_bbox = _require(obj, "bbox", line)
    if not (isinstance(raw_bbox, list) and len(raw_bbox) == 4):
        raise TraceSchemaError("bbox must be [x, y, w, h]", line=line, field="bbox")
    coords = [_as_number(v, "bbox", line) for v in raw_bbox]
    behavior_raw = _as_str(_require(obj, "behavior", line), "behavior", line)
    try:
        behavior = BehaviorLabel(behavior_raw)
    except ValueError:
        raise TraceSchemaError(
            f"unrecognized behavior label {behavior_raw!r}", line=line, field="behavior"
        ) from None
    try:
        return IndividualObservation(
            individual_id=_as_str(_require(obj, "id", line), "id", line),
            bbox=BoundingBox(*coords),
            detection_confidence=_as_number(
                _require(obj, "detection_confidence", line), "detection_confidence", line
            ),
            behavior=behavior,
            behavior_confidence=_as_number(
                _require(obj, "behavior_confidence", line), "behavior_confidence", line
            ),
            extra={k: v for k, v in obj.items() if k not in _INDIVIDUAL_KEYS},
        )
    except ValueError as exc:
        raise TraceInvariantError(str(exc), line=line, field="individuals") from None


def _parse_frame(obj: Any, line: int) -> FrameObservation:
    if not isinstance(obj, dict):
        raise TraceSchemaError("frame must be a JSON object", line=line)
    individuals_raw = _require(obj, "individuals", line)
    if not isinstance(individuals_raw, list):
        raise TraceSchemaError("individuals must be a list", line=line, field="individuals")
    individuals = tuple(_parse_individual(ind, line) for ind in individuals_raw)
    try:
        return FrameObservation(
            frame_index=_as_int(_require(obj, "frame_index", line), "frame_index", line),
            timestamp_ms=_as_int(_require(obj, "timestamp_ms", line), "timestamp_ms", line),
            individuals=individuals,
            extra={k: v for k, v in obj.items() if k not in _FRAME_KEYS},
        )
    except ValueError as exc:
        raise TraceInvariantError(str(exc), line=line) from None


def _parse_metadata(obj: Any, line: int) -> MissionMetadata:
    if not isinstance(obj, dict):
        raise TraceSchemaError("metadata must be a JSON object", line=line, field="metadata")
    mode_raw = obj.get("collection_mode", CollectionMode.SYNTHETIC.value)
    try:
        mode = CollectionMode(_as_str(mode_raw, "collection_mode", line))
    except ValueError:
        raise TraceSchemaError(
            f"unrecognized collection_mode {mode_raw!r}", line=line, field="collection_mode"
        ) from None
    phases_raw = obj.get("sampling_phases", [])
    if not isinstance(phases_raw, list):
        raise TraceSchemaError("sampling_phases must be a list", line=line, field="sampling_phases")
    phases = []
    for pair in phases_raw:
        if not (isinstance(pair, list) and len(pair) == 2):
            raise TraceSchemaError(
                "sampling_phases entries must be [start_ms, end_ms]",
                line=line,
                field="sampling_phases",
            )
        phases.append((_as_int(pair[0], "sampling_phases", line), _as_int(pair[1], "sampling_phases", line)))
    altitude = obj.get("altitude_m")
    battery = obj.get("battery_pct")
    try:
        return MissionMetadata(
            mission_id=_as_str(_require(obj, "mission_id", line), "mission_id", line),
            species=_as_str(obj.get("species", "unknown"), "species", line),
            herd_size=_as_int(obj.get("herd_size", 1), "herd_size", line),
            fps=_as_number(obj.get("fps", 30.0), "fps", line),
            altitude_m=None if altitude is None else _as_number(altitude, "altitude_m", line),
            collection_mode=mode,
            battery_pct=None if battery is None else _as_number(battery, "battery_pct", line),
            sampling_phases=tuple(phases),
            extra={k: v for k, v in obj.items() if k not in _METADATA_KEYS},
        )
    except ValueError as exc:
        raise TraceInvariantError(str(exc), line=line, field="metadata") from None


def _parse_event(obj: Any, line: int) -> GroundTruthEvent:
    if not isinstance(obj, dict):
        raise TraceSchemaError("event must be a JSON object", line=line, field="events")
    kind_raw = _as_str(_require(obj, "kind", line), "kind", line)
    try:
        kind = EventKind(kind_raw)
    except ValueError:
        raise TraceSchemaError(
            f"unrecognized event kind {kind_raw!r}", line=line, field="kind"
        ) from None
    return GroundTruthEvent(
        kind=kind,
        start_ms=_as_int(_require(obj, "start_ms", line), "start_ms", line),
        end_ms=_as_int(_require(obj, "end_ms", line), "end_ms", line),
        extra={k: v for k, v in obj.items() if k not in _EVENT_KEYS},
    )


def _check_events(events: Iterable[GroundTruthEvent], last_timestamp_ms: int | None) -> None:
    flights = []
    for event in events:
        if event.start_ms >= event.end_ms:
            raise TraceInvariantError(
                f"event interval must satisfy start < end, got [{event.start_ms}, {event.end_ms}]",
                line=1,
                field="events",
            )
        if event.start_ms < 0 or (last_timestamp_ms is not None and event.end_ms > last_timestamp_ms):
            raise TraceInvariantError(
                f"event [{event.start_ms}, {event.end_ms}] outside mission span",
                line=1,
                field="events",
            )
        if last_timestamp_ms is None:
            raise TraceInvariantError(
                "trace with events must contain frames", line=1, field="events"
            )
        if event.kind is EventKind.FLIGHT_RESPONSE:
            flights.append(event)
    flights.sort(key=lambda e: e.start_ms)
    for a, b in zip(flights, flights[1:]):
        if b.start_ms < a.end_ms:
            raise TraceInvariantError(
                f"flight_response intervals overlap at {b.start_ms}", line=1, field="events"
            )


def parse_trace_lines(lines: Iterable[str], source: str = "<memory>") -> MissionTrace:
    """Parse trace content from an iterable of text lines."""
    it: Iterator[str] = iter(lines)
    header_line = None
    line_no = 0
    for raw in it:
        line_no += 1
        if raw.strip():
            header_line = raw
            break
    if header_line is None:
        raise TraceSchemaError(f"{source}: empty trace file", line=1)
    try:
        header = json.loads(header_line)
    except json.JSONDecodeError as exc:
        raise TraceSchemaError(f"invalid JSON: {exc.msg}", line=line_no) from None
    if not isinstance(header, dict):
        raise TraceSchemaError("header must be a JSON object", line=line_no)
    version = header.get("v")
    if version != SCHEMA_VERSION:
        raise TraceSchemaError(f"unsupported schema version {version!r}", line=line_no, field="v")
    metadata = _parse_metadata(_require(header, "metadata", line_no), line_no)
    events_raw = header.get("events", [])
    if not isinstance(events_raw, list):
        raise TraceSchemaError("events must be a list", line=line_no, field="events")
    events = tuple(_parse_event(e, line_no) for e in events_raw)
    header_extra = {k: v for k, v in header.items() if k not in _HEADER_KEYS}

    frames: list[FrameObservation] = []
    for raw in it:
        line_no += 1
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise TraceSchemaError(f"invalid JSON: {exc.msg}", line=line_no) from None
        frame = _parse_frame(obj, line_no)
        if frames:
            prev = frames[-1]
            if frame.frame_index <= prev.frame_index:
                raise TraceOrderingError(
                    f"frame_index {frame.frame_index} does not increase past {prev.frame_index}",
                    line=line_no,
                    field="frame_index",
                )
            if frame.timestamp_ms < prev.timestamp_ms:
                raise TraceOrderingError(
                    f"timestamp_ms {frame.timestamp_ms} decreases below {prev.timestamp_ms}",
                    line=line_no,
                    field="timestamp_ms",
                )
        frames.append(frame)

    _check_events(events, frames[-1].timestamp_ms if frames else None)
    return MissionTrace(
        metadata=metadata, frames=tuple(frames), events=events, extra=header_extra
    )


def parse_trace(path: str | Path) -> MissionTrace:
    """Parse and fully validate a `.vtrace.jsonl` file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise TraceSchemaError(f"{path}: not valid UTF-8 text: {exc}") from None
    return parse_trace_lines(text.splitlines(), source=str(path))


def _individual_to_obj(ind: IndividualObservation) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "id": ind.individual_id,
        "bbox": [ind.bbox.x, ind.bbox.y, ind.bbox.w, ind.bbox.h],
        "detection_confidence": ind.detection_confidence,
        "behavior": ind.behavior.value,
        "behavior_confidence": ind.behavior_confidence,
    }
    obj.update(ind.extra)
    return obj


def _frame_to_obj(frame: FrameObservation) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "frame_index": frame.frame_index,
        "timestamp_ms": frame.timestamp_ms,
        "individuals": [_individual_to_obj(ind) for ind in frame.individuals],
    }
    obj.update(frame.extra)
    return obj


def frame_to_obj(frame: FrameObservation) -> dict[str, Any]:
    """One frame as its JSON-ready object (the per-line schema); also the
    response shape of the live backend socket protocol."""
    return _frame_to_obj(frame)


def parse_frame_obj(obj: Any, line: int = 0) -> FrameObservation:
    """Parse a single frame object (inverse of frame_to_obj)."""
    return _parse_frame(obj, line)


def _metadata_to_obj(meta: MissionMetadata) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "mission_id": meta.mission_id,
        "species": meta.species,
        "herd_size": meta.herd_size,
        "fps": meta.fps,
        "collection_mode": meta.collection_mode.value,
    }
    if meta.altitude_m is not None:
        obj["altitude_m"] = meta.altitude_m
    if meta.battery_pct is not None:
        obj["battery_pct"] = meta.battery_pct
    if meta.sampling_phases:
        obj["sampling_phases"] = [list(p) for p in meta.sampling_phases]
    obj.update(meta.extra)
    return obj


def _event_to_obj(event: GroundTruthEvent) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "kind": event.kind.value,
        "start_ms": event.start_ms,
        "end_ms": event.end_ms,
    }
    obj.update(event.extra)
    return obj


def trace_to_lines(trace: MissionTrace) -> Iterator[str]:
    header: dict[str, Any] = {"v": SCHEMA_VERSION, "metadata": _metadata_to_obj(trace.metadata)}
    if trace.events:
        header["events"] = [_event_to_obj(e) for e in trace.events]
    header.update(trace.extra)
    yield json.dumps(header, separators=(",", ":"))
    for frame in trace.frames:
        yield json.dumps(_frame_to_obj(frame), separators=(",", ":"))


def write_trace(trace: MissionTrace, path: str | Path, *, validate: bool = True) -> None:
    """Write a trace; by default refuses to write one that would not parse
    back cleanly."""
    if validate:
        problems = [d for d in validate_trace(trace) if d.severity == "error"]
        if problems:
            first = problems[0]
            raise TraceInvariantError(f"{first.location}: {first.message}")
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for line in trace_to_lines(trace):
            fh.write(line)
            fh.write("\n")


def validate_trace(trace: MissionTrace) -> list[Diagnostic]:
    """All invariant violations as diagnostics; empty list means valid.

    Errors mirror what parse_trace would reject; warnings flag suspicious but
    tolerated content such as frame timestamps drifting more than one frame
    interval from the nominal fps grid.
    """
    diagnostics: list[Diagnostic] = []
    prev: FrameObservation | None = None
    interval = trace.metadata.frame_interval_ms
    for frame in trace.frames:
        loc = f"frame {frame.frame_index}"
        if prev is not None:
            if frame.frame_index <= prev.frame_index:
                diagnostics.append(
                    Diagnostic("error", loc, f"frame_index does not increase past {prev.frame_index}")
                )
            if frame.timestamp_ms < prev.timestamp_ms:
                diagnostics.append(
                    Diagnostic("error", loc, f"timestamp_ms decreases below {prev.timestamp_ms}")
                )
        expected_ts = frame.frame_index * interval
        if abs(frame.timestamp_ms - expected_ts) > interval:
            diagnostics.append(
                Diagnostic(
                    "warning",
                    loc,
                    f"timestamp {frame.timestamp_ms} drifts more than one frame interval "
                    f"from nominal {expected_ts:.1f} at {trace.metadata.fps} fps",
                )
            )
        prev = frame
    last_ts = trace.frames[-1].timestamp_ms if trace.frames else None
    flights = []
    for i, event in enumerate(trace.events):
        loc = f"event {i}"
        if event.start_ms >= event.end_ms:
            diagnostics.append(
                Diagnostic("error", loc, f"interval must satisfy start < end, got [{event.start_ms}, {event.end_ms}]")
            )
            continue
        if last_ts is None:
            diagnostics.append(Diagnostic("error", loc, "trace with events must contain frames"))
            continue
        if event.start_ms < 0 or event.end_ms > last_ts:
            diagnostics.append(
                Diagnostic("error", loc, f"interval [{event.start_ms}, {event.end_ms}] outside mission span")
            )
        if event.kind is EventKind.FLIGHT_RESPONSE:
            flights.append((event.start_ms, event.end_ms, i))
    flights.sort()
    for (s1, e1, _), (s2, _, i2) in zip(flights, flights[1:]):
        if s2 < e1:
            diagnostics.append(
                Diagnostic("error", f"event {i2}", f"flight_response intervals overlap at {s2}")
            )
    return diagnostics
