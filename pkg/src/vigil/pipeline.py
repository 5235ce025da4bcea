"""Latency-budgeted streaming frame processor.

The pipeline pulls frame handles from a source, asks an inference backend for
the per-frame observations, scores and alerts, and records per-stage latency
against the frame budget (33 ms for 30 fps monitoring; override with the
VIGIL_BUDGET_MS environment variable).

Backpressure is modeled as deterministic bounded-queue accounting: every
arrival and completion is tracked in stream time using *measured* service
durations, and when the backend falls behind, the oldest waiting frame is
dropped and reported as skipped. This gives drop-oldest semantics that are
exactly reproducible in tests (drive it with a VirtualClock) and honest in
live use (durations come from the wall clock).
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import socket
import socketserver
import threading
import time
from abc import ABC, abstractmethod
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Iterator, Sequence

from .alerting import AlertEvent, AlertEventKind, AlertMachine
from .core import FrameObservation, VigilanceConfig, VigilanceSample, compute_vigilance
from .trace_io import MissionTrace, frame_to_obj, parse_frame_obj

DEFAULT_BUDGET_MS = 33.0
BUDGET_ENV_VAR = "VIGIL_BUDGET_MS"
MAX_STRIDE = 120


def default_budget_ms() -> float:
    raw = os.environ.get(BUDGET_ENV_VAR)
    if raw is None:
        return DEFAULT_BUDGET_MS
    try:
        value = float(raw)
    except ValueError:
        raise ValueError(f"{BUDGET_ENV_VAR} must be a number, got {raw!r}") from None
    if value <= 0:
        raise ValueError(f"{BUDGET_ENV_VAR} must be positive, got {value}")
    return value


class BackendError(Exception):
    """Inference backend failure for one frame; the pipeline keeps running."""


class BackendMode(str, Enum):
    GPU_CLASS = "gpu_class"
    CPU_CLASS = "cpu_class"
    TRACE = "trace"


@dataclass(frozen=True)
class BackendCapabilities:
    detect_latency_estimate_ms: float = 0.0
    behavior_latency_estimate_ms: float = 0.0
    mode: BackendMode = BackendMode.TRACE

    @property
    def total_estimate_ms(self) -> float:
        return self.detect_latency_estimate_ms + self.behavior_latency_estimate_ms


class InferenceBackend(ABC):
    """Produces one FrameObservation per frame handle.

    Implementations must not block indefinitely; callers apply a deadline
    (socket backends take a timeout, trace backends are in-process).
    """

    @abstractmethod
    def capabilities(self) -> BackendCapabilities: ...

    @abstractmethod
    def infer(self, frame_index: int) -> FrameObservation: ...


class Clock:
    """Time source for latency measurement. now_ms/sleep_ms share one unit."""

    def now_ms(self) -> float:
        raise NotImplementedError

    def sleep_ms(self, duration_ms: float) -> None:
        raise NotImplementedError


class WallClock(Clock):
    def now_ms(self) -> float:
        return time.perf_counter() * 1000.0

    def sleep_ms(self, duration_ms: float) -> None:
        if duration_ms > 0:
            time.sleep(duration_ms / 1000.0)


class VirtualClock(Clock):
    """Deterministic clock: sleeping advances time instantly. Lets latency
    scenarios (23.8 ms GPU, 926.9 ms CPU) run in microseconds of wall time."""

    def __init__(self, start_ms: float = 0.0):
        self._now = start_ms

    def now_ms(self) -> float:
        return self._now

    def sleep_ms(self, duration_ms: float) -> None:
        if duration_ms > 0:
            self._now += duration_ms

    def advance(self, duration_ms: float) -> None:
        self.sleep_ms(duration_ms)


@dataclass(frozen=True)
class LatencyRecord:
    frame_index: int
    detect_ms: float
    behave_ms: float
    score_ms: float
    alert_ms: float
    total_ms: float
    budget_ms: float = DEFAULT_BUDGET_MS
    met_slo: bool = True


class SamplingMode(str, Enum):
    EVERY_FRAME = "every_frame"
    STRIDE = "stride"
    ADAPTIVE = "adaptive"


@dataclass(frozen=True)
class SamplingPolicy:
    """Frame selection policy.

    STRIDE processes frame indices divisible by `stride` (the CPU-profile
    default of 40 reproduces every-40th-frame sampling). ADAPTIVE derives the
    stride from measured latency; for CPU_CLASS backends the configured
    stride additionally acts as a floor, which is stricter than the formula's
    minimum.
    """

    mode: SamplingMode = SamplingMode.EVERY_FRAME
    stride: int = 40

    def __post_init__(self) -> None:
        if self.stride < 1:
            raise ValueError(f"stride must be positive, got {self.stride}")

    @classmethod
    def every_frame(cls) -> "SamplingPolicy":
        return cls(mode=SamplingMode.EVERY_FRAME)

    @classmethod
    def fixed_stride(cls, k: int) -> "SamplingPolicy":
        return cls(mode=SamplingMode.STRIDE, stride=k)

    @classmethod
    def adaptive(cls, cpu_floor: int = 40) -> "SamplingPolicy":
        return cls(mode=SamplingMode.ADAPTIVE, stride=cpu_floor)


def adaptive_stride(recent: Sequence[LatencyRecord], frame_interval_ms: float) -> int:
    """Stride that keeps a backend with the observed mean latency from
    falling behind: ceil(mean total / frame interval), clamped to [1, 120];
    1 whenever the mean fits the budget."""
    if not recent:
        raise ValueError("adaptive_stride requires a non-empty window")
    if frame_interval_ms <= 0:
        raise ValueError("frame_interval_ms must be positive")
    mean_total = math.fsum(r.total_ms for r in recent) / len(recent)
    if mean_total <= recent[-1].budget_ms:
        return 1
    return max(1, min(MAX_STRIDE, math.ceil(mean_total / frame_interval_ms)))


@dataclass(frozen=True)
class FrameHandle:
    """Lightweight frame descriptor; pixels never enter this system."""

    frame_index: int
    timestamp_ms: int


def trace_frame_source(trace: MissionTrace) -> Iterator[FrameHandle]:
    for frame in trace.frames:
        yield FrameHandle(frame.frame_index, frame.timestamp_ms)


class SkipReason(str, Enum):
    SAMPLED_OUT = "sampled_out"
    DROPPED_BACKPRESSURE = "dropped_backpressure"


@dataclass(frozen=True)
class ProcessedFrame:
    sample: VigilanceSample
    event: AlertEvent | None
    latency: LatencyRecord


@dataclass(frozen=True)
class SkippedFrame:
    frame_index: int
    timestamp_ms: int
    reason: SkipReason


PipelineEmission = ProcessedFrame | SkippedFrame


@dataclass
class PipelineStats:
    processed: int = 0
    skipped_sampling: int = 0
    dropped_backpressure: int = 0
    backend_failures: int = 0
    max_in_flight: int = 0
    # Wall milliseconds spent outside backend.infer, across processed frames.
    overhead_wall_ms_total: float = 0.0
    last_stride: int = 1
    stride_history: deque[int] = field(default_factory=lambda: deque(maxlen=64))


class TraceBackend(InferenceBackend):
    """Serves pre-recorded observations, optionally with injected stage
    latency for budget testing (sleeps on the supplied clock)."""

    def __init__(
        self,
        trace: MissionTrace,
        detect_delay_ms: float = 0.0,
        behave_delay_ms: float = 0.0,
        mode: BackendMode = BackendMode.TRACE,
        clock: Clock | None = None,
    ):
        if detect_delay_ms < 0 or behave_delay_ms < 0:
            raise ValueError("injected delays must be >= 0")
        self._frames = {frame.frame_index: frame for frame in trace.frames}
        self._detect_ms = detect_delay_ms
        self._behave_ms = behave_delay_ms
        self._mode = mode
        self._clock = clock or WallClock()

    def capabilities(self) -> BackendCapabilities:
        return BackendCapabilities(
            detect_latency_estimate_ms=self._detect_ms,
            behavior_latency_estimate_ms=self._behave_ms,
            mode=self._mode,
        )

    def infer(self, frame_index: int) -> FrameObservation:
        frame = self._frames.get(frame_index)
        if frame is None:
            raise BackendError(f"frame index {frame_index} out of range")
        total = self._detect_ms + self._behave_ms
        if total > 0:
            self._clock.sleep_ms(total)
        return frame


class FailingBackend(InferenceBackend):
    """Always fails; exercises degraded-mode handling."""

    def capabilities(self) -> BackendCapabilities:
        return BackendCapabilities(mode=BackendMode.TRACE)

    def infer(self, frame_index: int) -> FrameObservation:
        raise BackendError("backend offline")


class SocketBackend(InferenceBackend):
    """Live backend protocol client: newline-delimited JSON over a local
    stream socket. Request {"frame_index": i}; response is one frame
    observation object (same schema as trace frame lines) or {"error": msg}.
    """

    def __init__(
        self,
        address: tuple[str, int] | str,
        capabilities: BackendCapabilities | None = None,
        timeout_s: float = 5.0,
    ):
        self._address = address
        self._caps = capabilities or BackendCapabilities(mode=BackendMode.GPU_CLASS)
        self._timeout = timeout_s
        self._sock: socket.socket | None = None
        self._reader = None

    def _connect(self) -> None:
        if isinstance(self._address, str):
            sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
            sock.settimeout(self._timeout)
            sock.connect(self._address)
        else:
            sock = socket.create_connection(self._address, timeout=self._timeout)
        self._sock = sock
        self._reader = sock.makefile("r", encoding="utf-8")

    def capabilities(self) -> BackendCapabilities:
        return self._caps

    def infer(self, frame_index: int) -> FrameObservation:
        try:
            if self._sock is None:
                self._connect()
            self._sock.sendall((json.dumps({"frame_index": frame_index}) + "\n").encode("utf-8"))
            line = self._reader.readline()
        except OSError as exc:
            self.close()
            raise BackendError(f"socket backend failure: {exc}") from exc
        if not line:
            self.close()
            raise BackendError("socket backend closed the connection")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BackendError(f"socket backend sent invalid JSON: {exc.msg}") from None
        if isinstance(obj, dict) and "error" in obj:
            raise BackendError(f"backend error: {obj['error']}")
        try:
            return parse_frame_obj(obj)
        except Exception as exc:
            raise BackendError(f"socket backend sent a malformed frame: {exc}") from None

    def close(self) -> None:
        if self._reader is not None:
            try:
                self._reader.close()
            except OSError:
                pass
            self._reader = None
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None


class TraceSocketServer:
    """Minimal threaded server speaking the live backend protocol from a
    trace; handy for demos and for exercising SocketBackend in tests."""

    def __init__(self, trace: MissionTrace, host: str = "127.0.0.1", port: int = 0):
        frames = {frame.frame_index: frame for frame in trace.frames}

        class Handler(socketserver.StreamRequestHandler):
            def handle(self) -> None:
                while True:
                    line = self.rfile.readline()
                    if not line:
                        return
                    try:
                        request = json.loads(line)
                        index = int(request["frame_index"])
                    except (ValueError, KeyError, TypeError):
                        self._reply({"error": "malformed request"})
                        continue
                    frame = frames.get(index)
                    if frame is None:
                        self._reply({"error": f"frame index {index} out of range"})
                        continue
                    self._reply(frame_to_obj(frame))

            def _reply(self, obj: dict) -> None:
                self.wfile.write((json.dumps(obj, separators=(",", ":")) + "\n").encode("utf-8"))

        self._server = socketserver.ThreadingTCPServer((host, port), Handler)
        self._server.daemon_threads = True
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    def start(self) -> "TraceSocketServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()


def _degraded_sample(handle: FrameHandle) -> VigilanceSample:
    return VigilanceSample(
        frame_index=handle.frame_index,
        timestamp_ms=handle.timestamp_ms,
        score=None,
        n_included=0,
        n_adverse=0,
        n_detected_raw=0,
        centroid=None,
        degraded=True,
    )


def run_pipeline(
    source: Iterable[FrameHandle],
    backend: InferenceBackend,
    config: VigilanceConfig,
    policy: SamplingPolicy | None = None,
    sinks: Sequence[Callable[[object], None]] = (),
    *,
    clock: Clock | None = None,
    budget_ms: float | None = None,
    buffer_size: int = 4,
    frame_interval_ms: float | None = None,
    adapt_window: int = 8,
    stats: PipelineStats | None = None,
) -> Iterator[ProcessedFrame | SkippedFrame]:
    """Stream frames through inference, scoring, and alerting.

    Yields one ProcessedFrame per processed frame and one SkippedFrame per
    frame skipped by sampling or dropped under backpressure. Backend failures
    yield degraded samples with MODEL_DEGRADED events; the pipeline never
    stops for them. Source exhaustion drains the queue and ends cleanly.
    """
    policy = policy or SamplingPolicy.every_frame()
    clock = clock or WallClock()
    if budget_ms is None:
        budget_ms = default_budget_ms()
    if buffer_size < 1:
        raise ValueError("buffer_size must be >= 1")
    stats = stats if stats is not None else PipelineStats()

    caps = backend.capabilities()
    machine = AlertMachine(config)
    recent: deque[LatencyRecord] = deque(maxlen=adapt_window)
    pending: deque[FrameHandle] = deque()
    free_at = -math.inf
    interval = frame_interval_ms
    prev_ts: int | None = None
    next_adaptive_index: int | None = None

    # Stage-split attribution of the single measured infer duration.
    est_total = caps.total_estimate_ms
    detect_fraction = (
        caps.detect_latency_estimate_ms / est_total if est_total > 0 else 1.0
    )

    def should_process(handle: FrameHandle) -> bool:
        nonlocal next_adaptive_index
        if policy.mode is SamplingMode.EVERY_FRAME:
            return True
        if policy.mode is SamplingMode.STRIDE:
            return handle.frame_index % policy.stride == 0
        if next_adaptive_index is None:
            next_adaptive_index = handle.frame_index
        return handle.frame_index >= next_adaptive_index

    def emit(record: ProcessedFrame | SkippedFrame) -> ProcessedFrame | SkippedFrame:
        for sink in sinks:
            sink(record)
        return record

    def process(handle: FrameHandle) -> ProcessedFrame:
        nonlocal free_at, next_adaptive_index
        wall0 = time.perf_counter()
        infer_start = clock.now_ms()
        infer_wall0 = time.perf_counter()
        failed = False
        frame: FrameObservation | None = None
        try:
            frame = backend.infer(handle.frame_index)
        except BackendError:
            failed = True
        infer_wall_ms = (time.perf_counter() - infer_wall0) * 1000.0
        infer_ms = clock.now_ms() - infer_start

        score0 = time.perf_counter()
        if failed:
            stats.backend_failures += 1
            sample = _degraded_sample(handle)
        else:
            sample = compute_vigilance(frame, config)
        score_ms = (time.perf_counter() - score0) * 1000.0

        alert0 = time.perf_counter()
        event = machine.step(sample)
        if failed and event is not None and event.kind is AlertEventKind.NO_DETECTIONS:
            # A dead backend is a model failure, not an empty field of view.
            event = dataclasses.replace(event, kind=AlertEventKind.MODEL_DEGRADED)
        alert_ms = (time.perf_counter() - alert0) * 1000.0

        total_ms = infer_ms + score_ms + alert_ms
        record = LatencyRecord(
            frame_index=handle.frame_index,
            detect_ms=infer_ms * detect_fraction,
            behave_ms=infer_ms * (1.0 - detect_fraction),
            score_ms=score_ms,
            alert_ms=alert_ms,
            total_ms=total_ms,
            budget_ms=budget_ms,
            met_slo=total_ms <= budget_ms,
        )
        recent.append(record)
        free_at = max(free_at, float(handle.timestamp_ms)) + total_ms
        stats.processed += 1
        stats.overhead_wall_ms_total += (time.perf_counter() - wall0) * 1000.0 - infer_wall_ms
        if policy.mode is SamplingMode.ADAPTIVE:
            stride = adaptive_stride(recent, interval or (1000.0 / 30.0))
            if caps.mode is BackendMode.CPU_CLASS:
                stride = max(stride, policy.stride)
            stats.last_stride = stride
            stats.stride_history.append(stride)
            next_adaptive_index = handle.frame_index + stride
        return ProcessedFrame(sample=sample, event=event, latency=record)

    for handle in source:
        if interval is None and prev_ts is not None and handle.timestamp_ms > prev_ts:
            interval = float(handle.timestamp_ms - prev_ts)
        prev_ts = handle.timestamp_ms

        # Let the worker virtually consume queued frames whose start time
        # falls at or before this arrival, so sampling decisions below see
        # up-to-date stride state.
        arrival = float(handle.timestamp_ms)
        while pending and max(free_at, float(pending[0].timestamp_ms)) <= arrival:
            yield emit(process(pending.popleft()))

        if not should_process(handle):
            stats.skipped_sampling += 1
            yield emit(SkippedFrame(handle.frame_index, handle.timestamp_ms, SkipReason.SAMPLED_OUT))
            continue

        pending.append(handle)
        while len(pending) > buffer_size:
            dropped = pending.popleft()
            stats.dropped_backpressure += 1
            yield emit(
                SkippedFrame(dropped.frame_index, dropped.timestamp_ms, SkipReason.DROPPED_BACKPRESSURE)
            )
        stats.max_in_flight = max(stats.max_in_flight, len(pending))

    while pending:
        yield emit(process(pending.popleft()))
