"""Mission replay: batch scoring, counterfactual intervention simulation, a
controllable pacing clock, and a synthetic trace generator.

Replaying a recorded mission cannot change what the animals did; intervention
simulation therefore adjusts the *accounting*, never the samples. Each adverse
run (maximal stretch of consecutive samples strictly above the threshold) is
clamped at the moment a simulated operator response would have calmed the
group: red-alert time + operator response latency + a parameterized
de-escalation delay. The de-escalation delay is an explicit modeling knob, not
a fidelity claim, and is surfaced in every report.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable

from .alerting import AlertEvent, AlertEventKind, AlertMachine
from .core import (
    BehaviorLabel,
    BoundingBox,
    FrameObservation,
    IndividualObservation,
    VigilanceConfig,
    VigilanceSample,
    compute_vigilance,
)
from .trace_io import (
    CollectionMode,
    EventKind,
    GroundTruthEvent,
    MissionMetadata,
    MissionTrace,
    TraceInvariantError,
    validate_trace,
)

# Sentinel speed: replay unpaced.
AS_FAST_AS_POSSIBLE = None


@dataclass(frozen=True)
class InterventionModel:
    """Counterfactual operator-response parameters.

    response_latency_ms: delay from the red alert to engagement (0 models an
    automated hook, 5000 a human operator). intervention_duration_ms: how long
    the drone pauses/retreats per engagement. deescalation_delay_ms: assumed
    time for the group to drop below threshold once the drone responds.
    resume_calm_frames: consecutive sub-threshold frames required before
    normal operation resumes.
    """

    response_latency_ms: float = 0.0
    intervention_duration_ms: float = 5000.0
    deescalation_delay_ms: float = 1000.0
    resume_calm_frames: int = 5
    action: str = "pause"

    def __post_init__(self) -> None:
        if self.response_latency_ms < 0:
            raise ValueError("response_latency_ms must be >= 0")
        if self.intervention_duration_ms < 0 or self.deescalation_delay_ms < 0:
            raise ValueError("durations must be >= 0")
        if self.resume_calm_frames < 0:
            raise ValueError("resume_calm_frames must be >= 0")
        if self.action not in ("pause", "retreat"):
            raise ValueError(f"action must be 'pause' or 'retreat', got {self.action!r}")

    @classmethod
    def operator_profile(cls) -> "InterventionModel":
        """Human-operator preset: five-second reaction to the alert."""
        return cls(response_latency_ms=5000.0)


@dataclass(frozen=True)
class Intervention:
    engage_ms: float
    release_ms: float


@dataclass(frozen=True)
class DroneStateInterval:
    state: str  # "pause" | "retreat"
    start_ms: float
    end_ms: float


@dataclass(frozen=True)
class ReplayResult:
    mission_id: str
    theta_s: float
    metadata: MissionMetadata
    ground_truth: tuple[GroundTruthEvent, ...]
    samples: tuple[VigilanceSample, ...]
    alert_events: tuple[AlertEvent, ...]
    interventions: tuple[Intervention, ...]
    drone_states: tuple[DroneStateInterval, ...]
    raw_adverse_ms: float
    counterfactual_adverse_ms: float
    # Half-open [start, end) spans that remain adverse under the
    # counterfactual; equals the raw adverse runs when no intervention ran.
    counterfactual_adverse_spans: tuple[tuple[float, float], ...]
    raw_adverse_spans: tuple[tuple[float, float], ...]
    intervention: InterventionModel | None = None


def batch_scores(trace: MissionTrace, config: VigilanceConfig) -> list[VigilanceSample]:
    """Pure batch scoring of every frame, in order."""
    return [compute_vigilance(frame, config) for frame in trace.frames]


def adverse_runs(
    samples: list[VigilanceSample] | tuple[VigilanceSample, ...],
    theta_s: float,
    frame_interval_ms: float,
) -> list[tuple[float, float]]:
    """Maximal [start, end) stretches of consecutive samples strictly above
    theta_s. A sample covers the interval up to the next sample; the final
    sample covers one nominal frame interval. Degraded samples carry no score
    and terminate a run."""
    runs: list[tuple[float, float]] = []
    start: float | None = None
    for i, sample in enumerate(samples):
        is_adverse = sample.score is not None and sample.score > theta_s
        if is_adverse and start is None:
            start = float(sample.timestamp_ms)
        elif not is_adverse and start is not None:
            runs.append((start, float(sample.timestamp_ms)))
            start = None
    if start is not None:
        runs.append((start, samples[-1].timestamp_ms + frame_interval_ms))
    return runs


def replay_mission(
    trace: MissionTrace,
    config: VigilanceConfig,
    intervention: InterventionModel | None = None,
    speed: float | None = AS_FAST_AS_POSSIBLE,
) -> ReplayResult:
    """Replay a mission deterministically.

    Scores every frame, runs the alert machine, and (optionally) applies the
    counterfactual intervention accounting. `speed` only paces wall-clock
    emission; it never changes the result.
    """
    problems = [d for d in validate_trace(trace) if d.severity == "error"]
    if problems:
        first = problems[0]
        raise TraceInvariantError(f"{first.location}: {first.message}")
    if speed is not None and speed <= 0:
        raise ValueError(f"speed must be positive, got {speed}")

    clock = replay_clock(speed)
    machine = AlertMachine(config)
    samples: list[VigilanceSample] = []
    events: list[AlertEvent] = []
    clock.start()
    for frame in trace.frames:
        clock.wait_until(frame.timestamp_ms)
        sample = compute_vigilance(frame, config)
        event = machine.step(sample)
        samples.append(sample)
        if event is not None:
            events.append(event)

    interval = trace.metadata.frame_interval_ms
    runs = adverse_runs(samples, config.theta_s, interval)
    raw_adverse_ms = sum(end - start for start, end in runs)

    interventions: list[Intervention] = []
    drone_states: list[DroneStateInterval] = []
    cf_spans: list[tuple[float, float]] = []
    if intervention is None:
        counterfactual_ms = raw_adverse_ms
        cf_spans = list(runs)
    else:
        counterfactual_ms = 0.0
        red_times = [e.timestamp_ms for e in events if e.kind is AlertEventKind.ENTER_RED]
        active_release: float | None = None
        active_cut: float | None = None
        for start, end in runs:
            if active_release is not None and start < active_release:
                # The drone is already responding; this run is governed by the
                # active engagement's de-escalation cut.
                cut = active_cut if active_cut is not None else end
                clamped = min(end, max(start, cut))
                contribution = max(0.0, clamped - start)
                if contribution > 0:
                    cf_spans.append((start, start + contribution))
                counterfactual_ms += contribution
                continue
            red_in_run = next((t for t in red_times if start <= t < end), None)
            engage = None
            if red_in_run is not None and not math.isinf(intervention.response_latency_ms):
                engage = red_in_run + intervention.response_latency_ms
            if engage is None:
                counterfactual_ms += end - start
                cf_spans.append((start, end))
                continue
            cut = engage + intervention.deescalation_delay_ms
            contribution = min(end - start, max(0.0, cut - start))
            counterfactual_ms += contribution
            if contribution > 0:
                cf_spans.append((start, start + contribution))
            calm_start = min(end, cut)
            resume_done = calm_start + intervention.resume_calm_frames * interval
            release = max(engage + intervention.intervention_duration_ms, resume_done)
            interventions.append(Intervention(engage_ms=engage, release_ms=release))
            drone_states.append(
                DroneStateInterval(
                    state=intervention.action,
                    start_ms=engage,
                    end_ms=engage + intervention.intervention_duration_ms,
                )
            )
            active_release = release
            active_cut = cut

    return ReplayResult(
        mission_id=trace.metadata.mission_id,
        theta_s=config.theta_s,
        metadata=trace.metadata,
        ground_truth=trace.events,
        samples=tuple(samples),
        alert_events=tuple(events),
        interventions=tuple(interventions),
        drone_states=tuple(drone_states),
        raw_adverse_ms=raw_adverse_ms,
        counterfactual_adverse_ms=counterfactual_ms,
        counterfactual_adverse_spans=tuple(cf_spans),
        raw_adverse_spans=tuple(runs),
        intervention=intervention,
    )


def replay_result_to_dict(result: ReplayResult, *, include_samples: bool = False) -> dict[str, Any]:
    """JSON-ready document for a replay result (schema in the README)."""
    doc: dict[str, Any] = {
        "v": 1,
        "mission_id": result.mission_id,
        "theta_s": result.theta_s,
        "raw_adverse_ms": result.raw_adverse_ms,
        "counterfactual_adverse_ms": result.counterfactual_adverse_ms,
        "n_frames": len(result.samples),
        "alert_events": [
            {
                "kind": e.kind.value,
                "timestamp_ms": e.timestamp_ms,
                "score": e.score,
                "audio": e.audio,
                "flashing": e.flashing,
            }
            for e in result.alert_events
        ],
        "interventions": [
            {"engage_ms": i.engage_ms, "release_ms": i.release_ms} for i in result.interventions
        ],
        "drone_states": [
            {"state": d.state, "start_ms": d.start_ms, "end_ms": d.end_ms}
            for d in result.drone_states
        ],
    }
    if result.intervention is not None:
        doc["intervention_model"] = {
            "response_latency_ms": result.intervention.response_latency_ms,
            "intervention_duration_ms": result.intervention.intervention_duration_ms,
            "deescalation_delay_ms": result.intervention.deescalation_delay_ms,
            "resume_calm_frames": result.intervention.resume_calm_frames,
            "action": result.intervention.action,
        }
    if include_samples:
        doc["samples"] = [
            {
                "frame_index": s.frame_index,
                "timestamp_ms": s.timestamp_ms,
                "score": s.score,
                "n_included": s.n_included,
                "n_adverse": s.n_adverse,
                "n_detected_raw": s.n_detected_raw,
                "centroid": list(s.centroid) if s.centroid else None,
                "degraded": s.degraded,
            }
            for s in result.samples
        ]
    return doc


class ReplayClock:
    """Paces frame emission against wall time.

    speed None means as-fast-as-possible (no waiting); otherwise frame
    timestamps are mapped to wall time scaled by 1/speed from `start()`.
    """

    def __init__(
        self,
        speed: float | None,
        *,
        now: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if speed is not None and speed <= 0:
            raise ValueError(f"speed must be positive, got {speed}")
        self.speed = speed
        self._now = now
        self._sleep = sleep
        self._anchor: float | None = None

    def start(self) -> None:
        self._anchor = self._now()

    def wait_until(self, timestamp_ms: float) -> None:
        """Block until the scaled wall-clock time for this frame timestamp."""
        if self.speed is None:
            return
        if self._anchor is None:
            self.start()
        target = self._anchor + (timestamp_ms / 1000.0) / self.speed
        delay = target - self._now()
        if delay > 0:
            self._sleep(delay)


def replay_clock(speed: float | None = AS_FAST_AS_POSSIBLE) -> ReplayClock:
    return ReplayClock(speed)


# ---------------------------------------------------------------------------
# Synthetic trace generation
# ---------------------------------------------------------------------------


class PhaseKind(str, Enum):
    CALM = "calm"          # herd grazing/standing at the requested vigilant fraction
    ALERT = "alert"        # elevated vigilance, annotated as ground truth
    FLIGHT = "flight"      # whole group running, annotated as ground truth
    BLIND = "blind"        # detections present but below confidence threshold


@dataclass(frozen=True)
class PhaseSpec:
    """One generator phase. Specify length by duration_ms or an exact frame
    count (fixtures use frames to make percentage arithmetic exact)."""

    duration_ms: float | None = None
    frames: int | None = None
    vigilant_fraction: float = 0.0
    noise: float = 0.0
    kind: PhaseKind = PhaseKind.CALM

    def __post_init__(self) -> None:
        if (self.duration_ms is None) == (self.frames is None):
            raise ValueError("specify exactly one of duration_ms or frames")
        if self.frames is not None and self.frames < 0:
            raise ValueError("frames must be >= 0")
        if self.duration_ms is not None and self.duration_ms < 0:
            raise ValueError("duration_ms must be >= 0")
        if not 0.0 <= self.vigilant_fraction <= 1.0:
            raise ValueError(f"vigilant_fraction out of [0,1]: {self.vigilant_fraction}")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")

    def frame_count(self, fps: float) -> int:
        if self.frames is not None:
            return self.frames
        return int(round(self.duration_ms * fps / 1000.0))


@dataclass(frozen=True)
class GeneratorParams:
    phases: tuple[PhaseSpec, ...]
    herd_size: int = 4
    fps: float = 30.0
    seed: int = 0
    mission_id: str = "synthetic"
    species: str = "zebra"
    collection_mode: CollectionMode = CollectionMode.SYNTHETIC
    altitude_m: float | None = 20.0
    sampling_window_ms: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if self.herd_size < 1:
            raise ValueError("herd_size must be >= 1")
        if not self.fps > 0:
            raise ValueError("fps must be positive")
        if not isinstance(self.phases, tuple):
            object.__setattr__(self, "phases", tuple(self.phases))


_CALM_BEHAVIORS = (BehaviorLabel.GRAZING, BehaviorLabel.STANDING, BehaviorLabel.WALKING)


def generate_synthetic_trace(params: GeneratorParams) -> MissionTrace:
    """Build a reproducible mission trace from a phase script.

    With noise 0 the per-frame vigilant head count is exactly
    round(fraction * herd_size), so phase-level scores are deterministic;
    noise jitters the fraction uniformly within +-noise per frame. Ground
    truth events are emitted for alert and flight phases. Identical params
    (seed included) produce byte-identical traces.
    """
    rng = random.Random(params.seed)
    herd = params.herd_size
    fps = params.fps

    # Stable per-individual anchors; boxes drift slowly around them.
    anchors = [
        (0.15 + 0.7 * rng.random(), 0.15 + 0.7 * rng.random()) for _ in range(herd)
    ]
    box_w = [round(0.04 + 0.04 * rng.random(), 4) for _ in range(herd)]
    box_h = [round(0.04 + 0.04 * rng.random(), 4) for _ in range(herd)]

    frames: list[FrameObservation] = []
    events: list[GroundTruthEvent] = []
    frame_index = 0
    for phase in params.phases:
        n_frames = phase.frame_count(fps)
        if n_frames <= 0:
            continue
        phase_start_ts = int(round(frame_index * 1000.0 / fps))
        for _ in range(n_frames):
            ts = int(round(frame_index * 1000.0 / fps))
            frames.append(
                _synthesize_frame(frame_index, ts, phase, herd, anchors, box_w, box_h, rng)
            )
            frame_index += 1
        phase_end_ts = int(round(frame_index * 1000.0 / fps))
        if phase.kind is PhaseKind.ALERT:
            events.append(
                GroundTruthEvent(EventKind.ALERT_VIGILANCE, phase_start_ts, phase_end_ts)
            )
        elif phase.kind is PhaseKind.FLIGHT:
            events.append(
                GroundTruthEvent(EventKind.FLIGHT_RESPONSE, phase_start_ts, phase_end_ts)
            )

    # Event intervals must stay within the recorded timestamps.
    if frames:
        last_ts = frames[-1].timestamp_ms
        events = [
            GroundTruthEvent(e.kind, e.start_ms, min(e.end_ms, last_ts), e.extra)
            for e in events
            if e.start_ms < last_ts
        ]
    else:
        events = []

    sampling = ()
    if params.sampling_window_ms is not None:
        sampling = (tuple(params.sampling_window_ms),)
    metadata = MissionMetadata(
        mission_id=params.mission_id,
        species=params.species,
        herd_size=herd,
        fps=fps,
        altitude_m=params.altitude_m,
        collection_mode=params.collection_mode,
        sampling_phases=sampling,
    )
    return MissionTrace(metadata=metadata, frames=tuple(frames), events=tuple(events))


def _synthesize_frame(
    frame_index: int,
    ts: int,
    phase: PhaseSpec,
    herd: int,
    anchors: list[tuple[float, float]],
    box_w: list[float],
    box_h: list[float],
    rng: random.Random,
) -> FrameObservation:
    fraction = phase.vigilant_fraction
    if phase.noise > 0:
        fraction = min(1.0, max(0.0, fraction + rng.uniform(-phase.noise, phase.noise)))
    n_vigilant = int(round(fraction * herd))
    vigilant = set(rng.sample(range(herd), n_vigilant))

    individuals = []
    for i in range(herd):
        ax, ay = anchors[i]
        x = min(max(ax + rng.uniform(-0.05, 0.05), 0.0), 1.0 - box_w[i])
        y = min(max(ay + rng.uniform(-0.05, 0.05), 0.0), 1.0 - box_h[i])
        if phase.kind is PhaseKind.FLIGHT:
            behavior = BehaviorLabel.RUNNING
        elif i in vigilant:
            behavior = BehaviorLabel.HEAD_UP
        else:
            behavior = _CALM_BEHAVIORS[rng.randrange(len(_CALM_BEHAVIORS))]
        if phase.kind is PhaseKind.BLIND:
            detection_conf = round(0.2 + 0.25 * rng.random(), 4)  # never above 0.5
            behavior_conf = round(0.2 + 0.25 * rng.random(), 4)
        else:
            detection_conf = round(0.85 + 0.1 * rng.random(), 4)
            behavior_conf = round(0.85 + 0.1 * rng.random(), 4)
        individuals.append(
            IndividualObservation(
                individual_id=f"ind-{i}",
                bbox=BoundingBox(round(x, 4), round(y, 4), box_w[i], box_h[i]),
                detection_confidence=detection_conf,
                behavior=behavior,
                behavior_confidence=behavior_conf,
            )
        )
    return FrameObservation(frame_index=frame_index, timestamp_ms=ts, individuals=tuple(individuals))
