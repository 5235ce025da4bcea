"""Graduated alert state machine.

Red warnings are debounced (default: three consecutive samples strictly above
the threshold) and escalate after sustained persistence; green/yellow
transitions are immediate. Degraded samples freeze an active red warning
rather than cancel it: losing the model must never silently clear an alarm.

The machine is functional: `step_alert` maps (state, sample) to a new state
plus at most one event, so identical sample sequences always produce identical
event sequences. A single writer feeds the stream; readers may hold any state
snapshot, which is immutable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .core import AlertLevel, VigilanceConfig, VigilanceSample


class OrderingError(ValueError):
    """Samples must arrive in non-decreasing timestamp order."""


class AlertEventKind(str, Enum):
    ENTER_GREEN = "enter_green"
    ENTER_YELLOW = "enter_yellow"
    ENTER_RED = "enter_red"
    ESCALATE = "escalate"
    NO_DETECTIONS = "no_detections"
    MODEL_DEGRADED = "model_degraded"


@dataclass(frozen=True)
class AlertEvent:
    kind: AlertEventKind
    timestamp_ms: int
    score: float | None
    audio: bool = False
    flashing: bool = False


@dataclass(frozen=True)
class AlertState:
    level: AlertLevel = AlertLevel.GREEN
    consecutive_red_frames: int = 0
    red_entered_at_ms: int | None = None
    last_sample: VigilanceSample | None = None
    # Kind of the degraded notice already emitted for the current degraded
    # stretch; None outside a stretch.
    degraded_kind: AlertEventKind | None = None


def reset_alert() -> AlertState:
    """Initial machine state: green, zero counters. Idempotent."""
    return AlertState()


def _non_red_level(score: float, config: VigilanceConfig) -> AlertLevel:
    # Machine membership in RED is governed by the strict > rule, so a score
    # exactly at theta_s lands in YELLOW here even though the instantaneous
    # display band reports RED at that one point.
    if score >= config.yellow_factor * config.theta_s:
        return AlertLevel.YELLOW
    return AlertLevel.GREEN


def step_alert(
    state: AlertState, sample: VigilanceSample, config: VigilanceConfig
) -> tuple[AlertState, AlertEvent | None]:
    """Advance the machine by one sample.

    Returns the new state and at most one event. Raises OrderingError if the
    sample's timestamp precedes the previous one.
    """
    if state.last_sample is not None and sample.timestamp_ms < state.last_sample.timestamp_ms:
        raise OrderingError(
            f"sample at {sample.timestamp_ms} ms arrived after {state.last_sample.timestamp_ms} ms"
        )

    if sample.degraded:
        kind = (
            AlertEventKind.NO_DETECTIONS
            if sample.n_detected_raw == 0
            else AlertEventKind.MODEL_DEGRADED
        )
        event = None
        if state.degraded_kind != kind:
            event = AlertEvent(kind=kind, timestamp_ms=sample.timestamp_ms, score=None)
        # Freeze an active red warning; otherwise the display honestly says
        # "no detections". The streak counter and red timer are frozen either
        # way, and escalation is not evaluated without model evidence.
        if state.level in (AlertLevel.RED, AlertLevel.RED_ESCALATED):
            level = state.level
        else:
            level = AlertLevel.NO_DETECTIONS
        new_state = replace(state, level=level, last_sample=sample, degraded_kind=kind)
        return new_state, event

    score = sample.score
    assert score is not None  # non-degraded samples always carry a score
    in_red = state.level in (AlertLevel.RED, AlertLevel.RED_ESCALATED)

    if score > config.theta_s:
        streak = state.consecutive_red_frames + 1
        if in_red:
            level = state.level
            event = None
            if (
                state.level is AlertLevel.RED
                and sample.timestamp_ms - state.red_entered_at_ms > config.escalation_persist_ms
            ):
                level = AlertLevel.RED_ESCALATED
                event = AlertEvent(
                    kind=AlertEventKind.ESCALATE,
                    timestamp_ms=sample.timestamp_ms,
                    score=score,
                    flashing=True,
                )
            new_state = replace(
                state,
                level=level,
                consecutive_red_frames=streak,
                last_sample=sample,
                degraded_kind=None,
            )
            return new_state, event
        if streak >= config.debounce_frames:
            new_state = replace(
                state,
                level=AlertLevel.RED,
                consecutive_red_frames=streak,
                red_entered_at_ms=sample.timestamp_ms,
                last_sample=sample,
                degraded_kind=None,
            )
            event = AlertEvent(
                kind=AlertEventKind.ENTER_RED,
                timestamp_ms=sample.timestamp_ms,
                score=score,
                audio=True,
            )
            return new_state, event
        # Above threshold but not yet debounced: no warning displayed.
        level = _non_red_level(score, config)
        event = _transition_event(state.level, level, sample)
        new_state = replace(
            state,
            level=level,
            consecutive_red_frames=streak,
            last_sample=sample,
            degraded_kind=None,
        )
        return new_state, event

    # At or below threshold: streak broken, red (if any) downgrades now.
    level = _non_red_level(score, config)
    event = _transition_event(state.level, level, sample)
    new_state = replace(
        state,
        level=level,
        consecutive_red_frames=0,
        red_entered_at_ms=None,
        last_sample=sample,
        degraded_kind=None,
    )
    return new_state, event


def _transition_event(
    old: AlertLevel, new: AlertLevel, sample: VigilanceSample
) -> AlertEvent | None:
    if old == new:
        return None
    kind = {
        AlertLevel.GREEN: AlertEventKind.ENTER_GREEN,
        AlertLevel.YELLOW: AlertEventKind.ENTER_YELLOW,
    }[new]
    return AlertEvent(kind=kind, timestamp_ms=sample.timestamp_ms, score=sample.score)


class AlertMachine:
    """Stateful convenience wrapper around `step_alert`.

    The config is held by reference: changing theta_s between samples takes
    effect on the next step and never rewrites already-emitted events.
    """

    def __init__(self, config: VigilanceConfig):
        self.config = config
        self.state = reset_alert()

    def step(self, sample: VigilanceSample) -> AlertEvent | None:
        self.state, event = step_alert(self.state, sample, self.config)
        return event

    def reset(self) -> None:
        self.state = reset_alert()
