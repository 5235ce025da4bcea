"""Alert machine: debounce, escalation, degraded handling."""

from __future__ import annotations

import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vigil import (
    AlertEventKind,
    AlertLevel,
    AlertMachine,
    BehaviorLabel,
    OrderingError,
    VigilanceConfig,
    compute_vigilance,
    instantaneous_level,
    reset_alert,
)
from helpers import herd_frame, score_sample, score_stream, ts_ms
from oracles import scan_enter_red_indices

B = BehaviorLabel


def run_machine(scores, config=None):
    config = config or VigilanceConfig()
    machine = AlertMachine(config)
    events = []
    for sample in score_stream(scores):
        event = machine.step(sample)
        if event is not None:
            events.append(event)
    return machine, events


def kinds(events):
    return [e.kind for e in events]


class TestDebounce:
    def test_two_exceedances_not_enough(self):
        _, events = run_machine([0.4, 0.4])
        assert AlertEventKind.ENTER_RED not in kinds(events)

    def test_third_consecutive_fires_with_audio(self):
        machine, events = run_machine([0.4, 0.4, 0.4])
        red = [e for e in events if e.kind is AlertEventKind.ENTER_RED]
        assert len(red) == 1
        assert red[0].audio is True
        assert red[0].timestamp_ms == ts_ms(2)
        assert machine.state.level is AlertLevel.RED

    def test_streak_reset_then_refire(self):
        _, events = run_machine([0.4, 0.4, 0.1, 0.4, 0.4, 0.4])
        red = [e for e in events if e.kind is AlertEventKind.ENTER_RED]
        assert len(red) == 1
        assert red[0].timestamp_ms == ts_ms(5)

    def test_boundary_score_resets_streak(self):
        # Exactly theta_s is not an exceedance for the machine even though
        # the instantaneous display band is red at that point.
        config = VigilanceConfig(theta_s=0.3)
        _, events = run_machine([0.4, 0.4, 0.3, 0.4, 0.4], config)
        assert AlertEventKind.ENTER_RED not in kinds(events)
        assert instantaneous_level(0.3, config) is AlertLevel.RED

    def test_red_downgrades_to_yellow_at_exact_threshold(self):
        config = VigilanceConfig(theta_s=0.3)
        machine, _ = run_machine([0.4, 0.4, 0.4, 0.3], config)
        assert machine.state.level is AlertLevel.YELLOW
        assert machine.state.consecutive_red_frames == 0

    def test_custom_debounce_length(self):
        config = VigilanceConfig(debounce_frames=5)
        _, events = run_machine([0.4] * 4, config)
        assert AlertEventKind.ENTER_RED not in kinds(events)
        _, events = run_machine([0.4] * 5, config)
        assert AlertEventKind.ENTER_RED in kinds(events)


class TestLevelsAndEvents:
    def test_green_yellow_transitions_immediate(self):
        machine, events = run_machine([0.05, 0.2, 0.05])
        assert kinds(events) == [AlertEventKind.ENTER_YELLOW, AlertEventKind.ENTER_GREEN]
        assert machine.state.level is AlertLevel.GREEN
        assert not any(e.audio or e.flashing for e in events)

    def test_at_most_one_event_per_sample(self):
        config = VigilanceConfig()
        machine = AlertMachine(config)
        for sample in score_stream([0.0, 0.4, 0.4, 0.4, 0.4, 0.0, 0.2, None, 0.9]):
            machine.step(sample)  # returns one event or None by construction

    def test_downgrade_from_red_emits_level_event(self):
        _, events = run_machine([0.4, 0.4, 0.4, 0.05])
        assert kinds(events)[-1] is AlertEventKind.ENTER_GREEN


class TestEscalation:
    def test_persistence_beyond_limit_escalates_once(self):
        config = VigilanceConfig()
        machine = AlertMachine(config)
        events = []
        # one sample every second, red enters on the third
        for i, ts in enumerate(range(0, 16000, 1000)):
            event = machine.step(score_sample(i, 0.5, ts=ts))
            if event:
                events.append(event)
        escalations = [e for e in events if e.kind is AlertEventKind.ESCALATE]
        assert len(escalations) == 1
        assert escalations[0].flashing is True
        # red entered at 2000 ms; persistence strictly exceeds 10 s at 12001+
        assert escalations[0].timestamp_ms == 13000
        assert machine.state.level is AlertLevel.RED_ESCALATED

    def test_exactly_at_persistence_limit_does_not_escalate(self):
        config = VigilanceConfig()
        machine = AlertMachine(config)
        machine.step(score_sample(0, 0.5, ts=0))
        machine.step(score_sample(1, 0.5, ts=1))
        machine.step(score_sample(2, 0.5, ts=2))  # red at ts=2
        event = machine.step(score_sample(3, 0.5, ts=10002))  # delta == 10000
        assert event is None
        assert machine.state.level is AlertLevel.RED

    def test_escalated_downgrades_on_calm(self):
        config = VigilanceConfig()
        machine = AlertMachine(config)
        for i, ts in enumerate(range(0, 14000, 1000)):
            machine.step(score_sample(i, 0.5, ts=ts))
        assert machine.state.level is AlertLevel.RED_ESCALATED
        event = machine.step(score_sample(99, 0.05, ts=15000))
        assert event.kind is AlertEventKind.ENTER_GREEN
        assert machine.state.level is AlertLevel.GREEN
        assert machine.state.red_entered_at_ms is None


class TestDegraded:
    def test_no_detections_vs_model_degraded(self):
        machine = AlertMachine(VigilanceConfig())
        event = machine.step(score_sample(0, None, ts=0))  # raw == 0
        assert event.kind is AlertEventKind.NO_DETECTIONS
        machine2 = AlertMachine(VigilanceConfig())
        sample = dataclasses.replace(score_sample(0, None, ts=0), n_detected_raw=3)
        event2 = machine2.step(sample)
        assert event2.kind is AlertEventKind.MODEL_DEGRADED

    def test_degraded_stretch_emits_single_event(self):
        machine = AlertMachine(VigilanceConfig())
        events = [machine.step(score_sample(i, None, ts=i * 33)) for i in range(5)]
        assert sum(e is not None for e in events) == 1

    def test_degraded_freezes_red(self):
        machine, _ = run_machine([0.4, 0.4, 0.4])
        assert machine.state.level is AlertLevel.RED
        event = machine.step(score_sample(10, None, ts=ts_ms(10)))
        assert machine.state.level is AlertLevel.RED  # warning not cancelled
        assert event.kind is AlertEventKind.NO_DETECTIONS

    def test_degraded_freezes_streak_counter(self):
        config = VigilanceConfig()
        machine = AlertMachine(config)
        machine.step(score_sample(0, 0.4))
        machine.step(score_sample(1, 0.4))
        machine.step(score_sample(2, None))  # freeze, not reset
        assert machine.state.consecutive_red_frames == 2
        event = machine.step(score_sample(3, 0.4))
        assert event is not None and event.kind is AlertEventKind.ENTER_RED

    def test_degraded_from_calm_shows_no_detections_level(self):
        machine, _ = run_machine([0.05])
        machine.step(score_sample(5, None, ts=ts_ms(5)))
        assert machine.state.level is AlertLevel.NO_DETECTIONS

    def test_recovery_after_degraded(self):
        machine = AlertMachine(VigilanceConfig())
        machine.step(score_sample(0, None))
        event = machine.step(score_sample(1, 0.05))
        assert event.kind is AlertEventKind.ENTER_GREEN
        assert machine.state.level is AlertLevel.GREEN


class TestResetAndOrdering:
    def test_reset_initial_state(self):
        state = reset_alert()
        assert state.level is AlertLevel.GREEN
        assert state.consecutive_red_frames == 0
        assert state.red_entered_at_ms is None

    def test_reset_after_red(self):
        machine, _ = run_machine([0.4, 0.4, 0.4])
        machine.reset()
        assert machine.state.level is AlertLevel.GREEN

    def test_reset_idempotent(self):
        assert reset_alert() == reset_alert()

    def test_out_of_order_rejected(self):
        machine = AlertMachine(VigilanceConfig())
        machine.step(score_sample(0, 0.2, ts=1000))
        with pytest.raises(OrderingError):
            machine.step(score_sample(1, 0.2, ts=999))

    def test_equal_timestamps_allowed(self):
        machine = AlertMachine(VigilanceConfig())
        machine.step(score_sample(0, 0.2, ts=1000))
        machine.step(score_sample(1, 0.2, ts=1000))


class TestProperties:
    @settings(max_examples=300, deadline=None)
    @given(st.lists(st.booleans(), min_size=0, max_size=24))
    def test_debounce_matches_direct_scan(self, flags):
        config = VigilanceConfig()
        machine = AlertMachine(config)
        fired = []
        for i, above in enumerate(flags):
            event = machine.step(score_sample(i, 0.5 if above else 0.1))
            if event is not None and event.kind is AlertEventKind.ENTER_RED:
                fired.append(i)
        assert fired == scan_enter_red_indices(flags, config.debounce_frames)
        for k in fired:
            assert flags[k - 2 : k + 1] == [True, True, True]

    @settings(max_examples=100, deadline=None)
    @given(st.integers(3, 40))
    def test_constant_exceedance_fires_once(self, n):
        _, events = run_machine([0.5] * n)
        assert kinds(events).count(AlertEventKind.ENTER_RED) == 1
        assert kinds(events).count(AlertEventKind.ESCALATE) <= 1

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.sampled_from([0.0, 0.2, 0.31, 0.5, None]), max_size=30))
    def test_determinism(self, scores):
        _, a = run_machine(list(scores))
        _, b = run_machine(list(scores))
        assert a == b

    def test_threshold_change_applies_next_sample(self):
        config = VigilanceConfig(theta_s=0.5)
        machine = AlertMachine(config)
        events = []
        for i, s in enumerate([0.4, 0.4, 0.4]):
            e = machine.step(score_sample(i, s))
            events.append(e)
        assert machine.state.level is AlertLevel.YELLOW  # 0.4 < 0.5
        config.theta_s = 0.3  # operator lowers the slider
        for i, s in enumerate([0.4, 0.4, 0.4], start=3):
            e = machine.step(score_sample(i, s))
            events.append(e)
        assert machine.state.level is AlertLevel.RED
        # Already-emitted events are untouched: the early ones are still the
        # yellow transition only.
        assert [e.kind for e in events if e is not None] == [
            AlertEventKind.ENTER_YELLOW,
            AlertEventKind.ENTER_RED,
        ]

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.floats(0.0, 1.0), min_size=1, max_size=20),
        st.sampled_from([0.5, 0.25, 0.125]),
    )
    def test_scaling_weights_and_threshold_preserves_bands(self, scores, factor):
        # Scaling every weight and theta_s by the same power-of-two factor
        # leaves each frame's display classification unchanged.
        base = VigilanceConfig(theta_s=0.8)
        scaled = VigilanceConfig(
            theta_s=0.8 * factor,
            weights={label: w * factor for label, w in base.weights.items()},
        )
        for s in scores:
            assert instantaneous_level(s, base) is instantaneous_level(s * factor, scaled)

    def test_scaled_scoring_end_to_end(self):
        base = VigilanceConfig(theta_s=0.8)
        scaled = VigilanceConfig(
            theta_s=0.4, weights={label: w * 0.5 for label, w in base.weights.items()}
        )
        f = herd_frame([B.HEAD_UP, B.HEAD_UP, B.HEAD_UP, B.GRAZING])
        s_base = compute_vigilance(f, base).score
        s_scaled = compute_vigilance(f, scaled).score
        assert s_scaled == s_base * 0.5
        assert instantaneous_level(s_base, base) is instantaneous_level(s_scaled, scaled)
