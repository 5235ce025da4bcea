"""Domain types and the group vigilance score.

The score for a frame is the weighted fraction of confidently-detected,
confidently-classified herd members exhibiting vigilance behavior. Everything
here is a pure function over immutable inputs; no shared mutable state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

# Operator slider range for the vigilance threshold.
THETA_S_MIN = 0.1
THETA_S_MAX = 0.9


class BehaviorLabel(str, Enum):
    HEAD_UP = "head_up"
    GRAZING = "grazing"
    WALKING = "walking"
    RUNNING = "running"
    STANDING = "standing"
    OTHER = "other"
    UNKNOWN = "unknown"


class AlertLevel(str, Enum):
    GREEN = "green"
    YELLOW = "yellow"
    RED = "red"
    RED_ESCALATED = "red_escalated"
    NO_DETECTIONS = "no_detections"


def default_weights() -> dict[BehaviorLabel, float]:
    """Head-up scanning is the leading indicator; everything else weighs 0."""
    weights = {label: 0.0 for label in BehaviorLabel}
    weights[BehaviorLabel.HEAD_UP] = 1.0
    return weights


@dataclass(frozen=True)
class BoundingBox:
    """Normalized rectangle; x, y is the top-left corner, all values are
    fractions of the frame."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"bbox must have positive extent, got w={self.w} h={self.h}")
        if not (0.0 <= self.x and 0.0 <= self.y and self.x + self.w <= 1.0 and self.y + self.h <= 1.0):
            raise ValueError(f"bbox must lie inside the unit square: {self}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)


@dataclass(frozen=True)
class IndividualObservation:
    individual_id: str
    bbox: BoundingBox
    detection_confidence: float
    behavior: BehaviorLabel
    behavior_confidence: float
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 <= self.detection_confidence <= 1.0:
            raise ValueError(f"detection_confidence out of [0,1]: {self.detection_confidence}")
        if not 0.0 <= self.behavior_confidence <= 1.0:
            raise ValueError(f"behavior_confidence out of [0,1]: {self.behavior_confidence}")


@dataclass(frozen=True)
class FrameObservation:
    """One video frame's worth of per-individual detections and labels."""

    frame_index: int
    timestamp_ms: int
    individuals: tuple[IndividualObservation, ...]
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be non-negative, got {self.frame_index}")
        if not isinstance(self.individuals, tuple):
            object.__setattr__(self, "individuals", tuple(self.individuals))
        ids = [ind.individual_id for ind in self.individuals]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate individual_id in frame {self.frame_index}")


@dataclass
class VigilanceConfig:
    """Tunable scoring and alerting parameters.

    theta_s is the operator-facing vigilance threshold (slider range
    0.1--0.9); theta_c gates detection confidence, and behavior confidence is
    gated by behavior_theta_c when set, else by the same theta_c.
    """

    theta_s: float = 0.3
    theta_c: float = 0.5
    behavior_theta_c: float | None = None
    weights: dict[BehaviorLabel, float] = field(default_factory=default_weights)
    debounce_frames: int = 3
    yellow_factor: float = 0.5
    escalation_persist_ms: float = 10_000.0

    def __post_init__(self) -> None:
        if not THETA_S_MIN <= self.theta_s <= THETA_S_MAX:
            raise ValueError(f"theta_s must be within [{THETA_S_MIN}, {THETA_S_MAX}], got {self.theta_s}")
        if not 0.0 < self.theta_c < 1.0:
            raise ValueError(f"theta_c must be within (0, 1), got {self.theta_c}")
        if self.behavior_theta_c is not None and not 0.0 < self.behavior_theta_c < 1.0:
            raise ValueError(f"behavior_theta_c must be within (0, 1), got {self.behavior_theta_c}")
        if self.debounce_frames < 1:
            raise ValueError(f"debounce_frames must be positive, got {self.debounce_frames}")
        if not 0.0 < self.yellow_factor <= 1.0:
            raise ValueError(f"yellow_factor must be within (0, 1], got {self.yellow_factor}")
        if self.escalation_persist_ms < 0:
            raise ValueError("escalation_persist_ms must be non-negative")
        # Every label resolves to exactly one weight; unknown always weighs 0.
        weights = {label: 0.0 for label in BehaviorLabel}
        weights.update(self.weights)
        weights[BehaviorLabel.UNKNOWN] = 0.0
        for label, weight in weights.items():
            if not 0.0 <= weight <= 1.0:
                raise ValueError(f"weight for {label.value} out of [0,1]: {weight}")
        self.weights = weights

    @property
    def effective_behavior_theta_c(self) -> float:
        return self.theta_c if self.behavior_theta_c is None else self.behavior_theta_c


@dataclass(frozen=True)
class VigilanceSample:
    """Computed group score for one frame.

    score is None exactly when degraded is True: no individual passed both
    confidence filters, so the frame carries no group-state evidence.
    Downstream consumers must treat the score as absent, never as zero.
    """

    frame_index: int
    timestamp_ms: int
    score: float | None
    n_included: int
    n_adverse: int
    n_detected_raw: int
    centroid: tuple[float, float] | None
    degraded: bool


def filter_confident(
    frame: FrameObservation, theta_c: float
) -> list[IndividualObservation]:
    """Individuals whose detection confidence strictly exceeds theta_c,
    original order preserved."""
    if not 0.0 < theta_c < 1.0:
        raise ValueError(f"theta_c must be within (0, 1), got {theta_c}")
    return [ind for ind in frame.individuals if ind.detection_confidence > theta_c]


def compute_vigilance(frame: FrameObservation, config: VigilanceConfig) -> VigilanceSample:
    """Score one frame.

    An individual is included only if both its detection confidence and its
    behavior confidence strictly exceed their thresholds; excluded individuals
    influence neither the score nor the centroid. Degenerate frames produce a
    degraded sample, never an error.
    """
    q_threshold = config.effective_behavior_theta_c
    included = [
        ind
        for ind in frame.individuals
        if ind.detection_confidence > config.theta_c
        and ind.behavior_confidence > q_threshold
    ]
    n_raw = len(frame.individuals)
    if not included:
        return VigilanceSample(
            frame_index=frame.frame_index,
            timestamp_ms=frame.timestamp_ms,
            score=None,
            n_included=0,
            n_adverse=0,
            n_detected_raw=n_raw,
            centroid=None,
            degraded=True,
        )
    n = len(included)
    weights = [config.weights[ind.behavior] for ind in included]
    # fsum keeps the score and centroid exactly permutation-invariant.
    score = math.fsum(weights) / n
    n_adverse = sum(1 for w in weights if w >= 0.5)
    centroid = (
        math.fsum(ind.bbox.center[0] for ind in included) / n,
        math.fsum(ind.bbox.center[1] for ind in included) / n,
    )
    return VigilanceSample(
        frame_index=frame.frame_index,
        timestamp_ms=frame.timestamp_ms,
        score=score,
        n_included=n,
        n_adverse=n_adverse,
        n_detected_raw=n_raw,
        centroid=centroid,
        degraded=False,
    )


def instantaneous_level(score: float, config: VigilanceConfig) -> AlertLevel:
    """Display color band for a defined score: green below half the
    threshold, red at or above it, yellow between."""
    if score is None:
        raise ValueError("instantaneous_level requires a defined score")
    if score >= config.theta_s:
        return AlertLevel.RED
    if score >= config.yellow_factor * config.theta_s:
        return AlertLevel.YELLOW
    return AlertLevel.GREEN
