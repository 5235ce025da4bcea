"""Shared builders for the test suite."""

from __future__ import annotations

import random

from vigil import (
    BehaviorLabel,
    BoundingBox,
    FrameObservation,
    IndividualObservation,
    VigilanceConfig,
    VigilanceSample,
)

FRAME_INTERVAL_MS = 1000.0 / 30.0


def ts_ms(frame_index: int, fps: float = 30.0) -> int:
    return int(round(frame_index * 1000.0 / fps))


def individual(
    i: int = 0,
    *,
    p: float = 0.9,
    q: float = 0.9,
    behavior: BehaviorLabel = BehaviorLabel.GRAZING,
    x: float = 0.4,
    y: float = 0.4,
    w: float = 0.1,
    h: float = 0.1,
) -> IndividualObservation:
    return IndividualObservation(
        individual_id=f"ind-{i}",
        bbox=BoundingBox(x, y, w, h),
        detection_confidence=p,
        behavior=behavior,
        behavior_confidence=q,
    )


def frame(
    index: int = 0,
    individuals: tuple[IndividualObservation, ...] = (),
    ts: int | None = None,
) -> FrameObservation:
    return FrameObservation(
        frame_index=index,
        timestamp_ms=ts if ts is not None else ts_ms(index),
        individuals=tuple(individuals),
    )


def herd_frame(behaviors: list[BehaviorLabel], index: int = 0, p: float = 0.9, q: float = 0.9) -> FrameObservation:
    return frame(
        index,
        tuple(
            individual(i, p=p, q=q, behavior=b, x=0.1 + 0.08 * i, y=0.2 + 0.05 * i)
            for i, b in enumerate(behaviors)
        ),
    )


def score_sample(index: int, score: float | None, ts: int | None = None) -> VigilanceSample:
    """Sample carrying just a score (or degraded when None)."""
    degraded = score is None
    return VigilanceSample(
        frame_index=index,
        timestamp_ms=ts if ts is not None else ts_ms(index),
        score=score,
        n_included=0 if degraded else 4,
        n_adverse=0,
        n_detected_raw=0 if degraded else 4,
        centroid=None if degraded else (0.5, 0.5),
        degraded=degraded,
    )


def score_stream(scores: list[float | None], fps: float = 30.0) -> list[VigilanceSample]:
    return [score_sample(i, s, ts=ts_ms(i, fps)) for i, s in enumerate(scores)]


def random_individual(rng: random.Random, i: int) -> IndividualObservation:
    w = rng.uniform(0.01, 0.2)
    h = rng.uniform(0.01, 0.2)
    return IndividualObservation(
        individual_id=f"ind-{i}",
        bbox=BoundingBox(rng.uniform(0.0, 1.0 - w), rng.uniform(0.0, 1.0 - h), w, h),
        detection_confidence=rng.random(),
        behavior=rng.choice(list(BehaviorLabel)),
        behavior_confidence=rng.random(),
    )


def random_frame(
    rng: random.Random, index: int = 0, max_herd: int = 20, min_herd: int = 0
) -> FrameObservation:
    n = rng.randint(min_herd, max_herd)
    return frame(index, tuple(random_individual(rng, i) for i in range(n)))


def random_weight_config(rng: random.Random) -> VigilanceConfig:
    return VigilanceConfig(
        theta_s=round(rng.uniform(0.1, 0.9), 3),
        theta_c=round(rng.uniform(0.05, 0.95), 3),
        weights={label: rng.random() for label in BehaviorLabel},
    )
