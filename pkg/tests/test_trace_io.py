"""Trace file format: round trips, typed errors, diagnostics, totality."""

from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vigil import (
    BehaviorLabel,
    CollectionMode,
    EventKind,
    GroundTruthEvent,
    MissionMetadata,
    MissionTrace,
    TraceError,
    TraceInvariantError,
    TraceOrderingError,
    TraceSchemaError,
    parse_trace,
    validate_trace,
    write_trace,
)
from vigil.replay import GeneratorParams, PhaseKind, PhaseSpec, generate_synthetic_trace
from vigil.trace_io import parse_trace_lines, trace_to_lines
from helpers import frame, individual, ts_ms


def tiny_trace(n_frames=2, with_event=False, fps=30.0):
    frames = tuple(
        frame(i, (individual(0, behavior=BehaviorLabel.GRAZING), individual(1)), ts=ts_ms(i))
        for i in range(n_frames)
    )
    events = ()
    if with_event and n_frames >= 2:
        events = (GroundTruthEvent(EventKind.ALERT_VIGILANCE, 0, frames[-1].timestamp_ms),)
    return MissionTrace(
        metadata=MissionMetadata(mission_id="tiny", herd_size=2, fps=fps),
        frames=frames,
        events=events,
    )


def roundtrip(trace, tmp_path):
    path = tmp_path / "t.vtrace.jsonl"
    write_trace(trace, path)
    return parse_trace(path)


class TestRoundTrip:
    def test_two_frame_file(self, tmp_path):
        trace = tiny_trace(2, with_event=True)
        parsed = roundtrip(trace, tmp_path)
        assert parsed == trace
        assert len(parsed.frames) == 2

    def test_empty_frames_valid(self, tmp_path):
        trace = MissionTrace(metadata=MissionMetadata(mission_id="empty"), frames=())
        parsed = roundtrip(trace, tmp_path)
        assert parsed == trace
        assert parsed.frames == ()

    def test_unknown_fields_preserved(self, tmp_path):
        path = tmp_path / "x.vtrace.jsonl"
        header = {
            "v": 1,
            "metadata": {"mission_id": "m", "herd_size": 1, "custom_rig": "anafi"},
            "events": [
                {"kind": "alert_vigilance", "start_ms": 0, "end_ms": 30, "annotator": "jk"}
            ],
            "pipeline_rev": "abc123",
        }
        frame_obj = {
            "frame_index": 0,
            "timestamp_ms": 0,
            "individuals": [
                {
                    "id": "z1",
                    "bbox": [0.1, 0.1, 0.2, 0.2],
                    "detection_confidence": 0.9,
                    "behavior": "head_up",
                    "behavior_confidence": 0.8,
                    "track_quality": 0.77,
                }
            ],
            "gimbal_pitch": -45,
        }
        frame_obj_2 = {**frame_obj, "frame_index": 1, "timestamp_ms": 33}
        path.write_text(
            "\n".join(json.dumps(o) for o in (header, frame_obj, frame_obj_2)) + "\n",
            encoding="utf-8",
        )
        trace = parse_trace(path)
        assert trace.extra == {"pipeline_rev": "abc123"}
        assert trace.metadata.extra == {"custom_rig": "anafi"}
        assert trace.events[0].extra == {"annotator": "jk"}
        assert trace.frames[0].extra == {"gimbal_pitch": -45}
        assert trace.frames[0].individuals[0].extra == {"track_quality": 0.77}
        out = tmp_path / "y.vtrace.jsonl"
        write_trace(trace, out)
        assert parse_trace(out) == trace

    def test_write_then_parse_equals_parse_then_write(self, tmp_path):
        trace = tiny_trace(5, with_event=True)
        lines_a = list(trace_to_lines(trace))
        reparsed = parse_trace_lines(lines_a)
        assert list(trace_to_lines(reparsed)) == lines_a

    def test_ten_thousand_frame_roundtrip(self, tmp_path):
        params = GeneratorParams(
            phases=(PhaseSpec(frames=10_000, vigilant_fraction=0.3, noise=0.1),),
            herd_size=2,
            seed=77,
            mission_id="long",
        )
        trace = generate_synthetic_trace(params)
        assert roundtrip(trace, tmp_path) == trace

    @settings(max_examples=50, deadline=None)
    @given(
        st.integers(0, 40),
        st.integers(1, 64),
        st.integers(0, 2**31),
        st.sampled_from([15.0, 29.97, 30.0, 60.0]),
    )
    def test_generated_traces_roundtrip(self, n_frames, herd, seed, fps):
        params = GeneratorParams(
            phases=(PhaseSpec(frames=n_frames, vigilant_fraction=0.5, kind=PhaseKind.ALERT),),
            herd_size=herd,
            fps=fps,
            seed=seed,
            mission_id=f"rt-{seed}",
        )
        trace = generate_synthetic_trace(params)
        assert parse_trace_lines(list(trace_to_lines(trace))) == trace


class TestParseErrors:
    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            parse_trace(tmp_path / "nope.vtrace.jsonl")

    def test_decreasing_frame_index(self, tmp_path):
        trace = tiny_trace(3)
        lines = list(trace_to_lines(trace))
        lines[2], lines[3] = lines[3], lines[2]
        path = tmp_path / "bad.vtrace.jsonl"
        path.write_text("\n".join(lines), encoding="utf-8")
        with pytest.raises(TraceOrderingError) as err:
            parse_trace(path)
        assert err.value.line == 4  # the frame that fails to increase

    def test_event_end_before_start(self, tmp_path):
        path = tmp_path / "bad.vtrace.jsonl"
        header = {
            "v": 1,
            "metadata": {"mission_id": "m"},
            "events": [{"kind": "flight_response", "start_ms": 100, "end_ms": 50}],
        }
        frame_obj = {"frame_index": 0, "timestamp_ms": 0, "individuals": []}
        path.write_text(json.dumps(header) + "\n" + json.dumps(frame_obj), encoding="utf-8")
        with pytest.raises(TraceInvariantError):
            parse_trace(path)

    def test_overlapping_flight_events(self, tmp_path):
        path = tmp_path / "bad.vtrace.jsonl"
        header = {
            "v": 1,
            "metadata": {"mission_id": "m"},
            "events": [
                {"kind": "flight_response", "start_ms": 0, "end_ms": 100},
                {"kind": "flight_response", "start_ms": 50, "end_ms": 150},
            ],
        }
        frame_obj = {"frame_index": 0, "timestamp_ms": 200, "individuals": []}
        path.write_text(json.dumps(header) + "\n" + json.dumps(frame_obj), encoding="utf-8")
        with pytest.raises(TraceInvariantError):
            parse_trace(path)

    def test_bad_json_names_line(self, tmp_path):
        path = tmp_path / "bad.vtrace.jsonl"
        trace = tiny_trace(2)
        lines = list(trace_to_lines(trace))
        lines.append("{not json")
        path.write_text("\n".join(lines), encoding="utf-8")
        with pytest.raises(TraceSchemaError) as err:
            parse_trace(path)
        assert err.value.line == 4

    def test_unknown_behavior_label(self, tmp_path):
        path = tmp_path / "bad.vtrace.jsonl"
        header = {"v": 1, "metadata": {"mission_id": "m"}}
        frame_obj = {
            "frame_index": 0,
            "timestamp_ms": 0,
            "individuals": [
                {
                    "id": "a",
                    "bbox": [0.1, 0.1, 0.1, 0.1],
                    "detection_confidence": 0.9,
                    "behavior": "yawning",
                    "behavior_confidence": 0.9,
                }
            ],
        }
        path.write_text(json.dumps(header) + "\n" + json.dumps(frame_obj), encoding="utf-8")
        with pytest.raises(TraceSchemaError) as err:
            parse_trace(path)
        assert err.value.field == "behavior"

    def test_wrong_schema_version(self, tmp_path):
        path = tmp_path / "bad.vtrace.jsonl"
        path.write_text(json.dumps({"v": 99, "metadata": {"mission_id": "m"}}), encoding="utf-8")
        with pytest.raises(TraceSchemaError):
            parse_trace(path)

    def test_confidence_out_of_range_is_invariant_error(self, tmp_path):
        path = tmp_path / "bad.vtrace.jsonl"
        header = {"v": 1, "metadata": {"mission_id": "m"}}
        frame_obj = {
            "frame_index": 0,
            "timestamp_ms": 0,
            "individuals": [
                {
                    "id": "a",
                    "bbox": [0.1, 0.1, 0.1, 0.1],
                    "detection_confidence": 1.5,
                    "behavior": "grazing",
                    "behavior_confidence": 0.9,
                }
            ],
        }
        path.write_text(json.dumps(header) + "\n" + json.dumps(frame_obj), encoding="utf-8")
        with pytest.raises(TraceInvariantError):
            parse_trace(path)


class TestTotality:
    def test_non_utf8_bytes_raise_schema_error(self, tmp_path):
        path = tmp_path / "f.vtrace.jsonl"
        path.write_bytes(b"\xff\xfe{\x00garbage")
        with pytest.raises(TraceSchemaError):
            parse_trace(path)

    @settings(max_examples=300, deadline=None)
    @given(st.text(max_size=400))
    def test_arbitrary_text_raises_only_trace_errors(self, text):
        try:
            parse_trace_lines(text.splitlines())
        except TraceError:
            pass

    @settings(max_examples=150, deadline=None)
    @given(st.recursive(
        st.none() | st.booleans() | st.floats(allow_nan=False) | st.text(max_size=8),
        lambda children: st.lists(children, max_size=4)
        | st.dictionaries(st.text(max_size=8), children, max_size=4),
        max_leaves=12,
    ))
    def test_arbitrary_json_raises_only_trace_errors(self, doc):
        lines = [json.dumps({"v": 1, "metadata": {"mission_id": "m"}}), json.dumps(doc)]
        try:
            parse_trace_lines(lines)
        except TraceError:
            pass


class TestValidate:
    def test_valid_trace_no_diagnostics(self):
        assert validate_trace(tiny_trace(3, with_event=True)) == []

    def test_ordering_diagnostic(self):
        t = tiny_trace(1)
        bad = MissionTrace(
            metadata=t.metadata,
            frames=(frame(5, ts=100), frame(3, ts=50)),
        )
        diags = validate_trace(bad)
        assert any(d.severity == "error" and "frame_index" in d.message for d in diags)

    def test_event_outside_span_diagnostic(self):
        t = tiny_trace(2)
        bad = MissionTrace(
            metadata=t.metadata,
            frames=t.frames,
            events=(GroundTruthEvent(EventKind.FLIGHT_RESPONSE, 0, 10_000),),
        )
        diags = validate_trace(bad)
        assert any(d.severity == "error" for d in diags)

    def test_events_without_frames_diagnostic(self):
        bad = MissionTrace(
            metadata=MissionMetadata(mission_id="m"),
            frames=(),
            events=(GroundTruthEvent(EventKind.FLIGHT_RESPONSE, 0, 10),),
        )
        assert any(d.severity == "error" for d in validate_trace(bad))

    def test_timestamp_drift_warning(self):
        t = MissionTrace(
            metadata=MissionMetadata(mission_id="m", fps=30.0),
            frames=(frame(0, ts=0), frame(1, ts=500)),  # 15 frames late
        )
        diags = validate_trace(t)
        assert diags and all(d.severity == "warning" for d in diags)

    def test_write_refuses_invalid(self, tmp_path):
        bad = MissionTrace(
            metadata=MissionMetadata(mission_id="m"),
            frames=(),
            events=(GroundTruthEvent(EventKind.FLIGHT_RESPONSE, 0, 10),),
        )
        with pytest.raises(TraceInvariantError):
            write_trace(bad, tmp_path / "x.vtrace.jsonl")


class TestMetadata:
    def test_mode_values(self, tmp_path):
        trace = MissionTrace(
            metadata=MissionMetadata(
                mission_id="m",
                collection_mode=CollectionMode.HITL,
                altitude_m=18.0,
                battery_pct=76.0,
                sampling_phases=((0, 1000),),
            ),
            frames=(frame(0, ts=0),),
        )
        parsed = roundtrip(trace, tmp_path)
        assert parsed.metadata.collection_mode is CollectionMode.HITL
        assert parsed.metadata.sampling_phases == ((0, 1000),)

    def test_bad_herd_size(self):
        with pytest.raises(ValueError):
            MissionMetadata(mission_id="m", herd_size=0)

    def test_bad_fps(self):
        with pytest.raises(ValueError):
            MissionMetadata(mission_id="m", fps=0.0)
