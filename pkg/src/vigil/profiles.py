"""Reference trace profiles.

Two families of built-in synthetic missions:

* benchmark missions 1-4: calm -> elevated-vigilance -> flight shapes whose
  measured warning windows are 53 / 22 / 38 / 91 s (mean 51 s), with first
  exceedances at 03:45 / 03:29 / 10:20 / 01:30 from recording start.

* method profiles (hitl / hotl / baf / baf_hotl): data-quality comparison
  missions engineered frame-by-frame to hit the reference figures for usable
  frames (total / sampling), adverse duration, and mission time. The two
  baf profiles are evaluated through the intervention simulator with the
  documented defaults (zero response latency, 1 s de-escalation delay).

All frame arithmetic below is exact at 30 fps; timestamps are
round(index * 100 / 3) ms, so a phase of N frames starting at an index
divisible by 3 spans exactly N * 100 / 3 ms.
"""

from __future__ import annotations

from dataclasses import dataclass

from .replay import GeneratorParams, InterventionModel, PhaseKind, PhaseSpec
from .trace_io import CollectionMode

FPS = 30.0


def _calm(frames: int) -> PhaseSpec:
    return PhaseSpec(frames=frames, vigilant_fraction=0.0, kind=PhaseKind.CALM)


def _alert(frames: int, fraction: float = 0.5) -> PhaseSpec:
    return PhaseSpec(frames=frames, vigilant_fraction=fraction, kind=PhaseKind.ALERT)


def _flight(frames: int) -> PhaseSpec:
    return PhaseSpec(frames=frames, vigilant_fraction=1.0, kind=PhaseKind.FLIGHT)


def _blind(frames: int) -> PhaseSpec:
    return PhaseSpec(frames=frames, vigilant_fraction=0.0, kind=PhaseKind.BLIND)


# --- Warning-window benchmark missions -------------------------------------
#
# Shape: calm offset (sets the first-detection time), one elevated-vigilance
# phase (its length IS the warning window, since the score crosses the
# threshold on the phase's first frame and the flight event starts at the
# phase's last frame + 1), one flight phase (ground-truth flight_response).
# Offsets/durations in whole seconds, so frame counts are exact at 30 fps.

@dataclass(frozen=True)
class BenchmarkMission:
    mission_id: str
    species: str
    herd_size: int
    calm_s: int      # first detection offset
    alert_s: int     # expected warning window
    flight_s: int    # ground-truth flight duration


BENCHMARK_MISSIONS: tuple[BenchmarkMission, ...] = (
    BenchmarkMission("benchmark-1", "zebra", 4, calm_s=225, alert_s=53, flight_s=19),
    BenchmarkMission("benchmark-2", "giraffe", 8, calm_s=209, alert_s=22, flight_s=18),
    BenchmarkMission("benchmark-3", "zebra", 5, calm_s=620, alert_s=38, flight_s=51),
    BenchmarkMission("benchmark-4", "zebra", 5, calm_s=90, alert_s=91, flight_s=9),
)


def benchmark_mission_params(mission: BenchmarkMission, seed: int = 11) -> GeneratorParams:
    fps = int(FPS)
    return GeneratorParams(
        phases=(
            _calm(mission.calm_s * fps),
            _alert(mission.alert_s * fps),
            _flight(mission.flight_s * fps),
        ),
        herd_size=mission.herd_size,
        fps=FPS,
        seed=seed,
        mission_id=mission.mission_id,
        species=mission.species,
        collection_mode=CollectionMode.SYNTHETIC,
    )


# --- Method comparison profiles ---------------------------------------------
#
# Targets per method (usable % total / sampling, adverse mm:ss, mission time
# total / sampling):
#
#   hitl      71.9 / 94.8   00:14   11:58 / 9:06
#   hotl      81.4 / 98.2   00:02   04:18 / 2:03
#   baf       86.8 / 95.2   00:01   04:42 / 4:09
#   baf_hotl  82.8 / 97.0   00:01   07:35 / 5:04
#
# A usable frame has at least one confidently-scored individual and a score
# at or below theta_s (0.3 here); blind stretches (low-confidence detections)
# are never usable; adverse stretches are unusable while they remain adverse
# under the chosen accounting. For baf rows the intervention simulator
# (response latency 0, de-escalation delay 1 s) clamps each adverse run about
# 1.07 s after it starts (two frame intervals of red-entry debounce + 1 s),
# i.e. 32 frames stay adverse; the remainder of the recorded run counts as
# counterfactually calm and detected, hence usable.
#
# hitl derivation (the published means are not exactly co-satisfiable for a
# single mission at 718/546 s: 94.8% of 546/718 of the frames already exceeds
# 71.9% of all frames, so durations are nudged within their mm:ss rounding;
# 718.4 s and 545.5 s still render as 11:58 and 9:06):
#   F   = 21552 frames (718.4 s), sampling window = frames [5187, 21552)
#   F_s = 16365 frames (545.5 s -> 09:06), outside = 5187 frames, all blind
#   inside: calm 10000 + adverse 420 (14.0 s -> 00:14) + blind 439 + calm 5506
#   usable = 10000 + 5506 = 15506
#   total %   : 15506 / 21552 = 71.947  (renders 71.9)
#   sampling %: 15506 / 16365 = 94.751  (renders 94.8)
#
# hotl derivation:
#   F = 7740 (258 s -> 04:18), sampling = frames [4050, 7740), F_s = 3690
#   outside: blind 1374 + calm 2676; inside: calm 1800 + adverse 60 (2.0 s)
#   + blind 6 + calm 1824
#   usable inside = 3624 -> 3624 / 3690 = 98.211 (98.2)
#   usable total  = 2676 + 3624 = 6300 -> 6300 / 7740 = 81.395 (81.4)
#
# baf derivation (intervention applied):
#   F = 8460 (282 s -> 04:42), sampling = frames [990, 8460), F_s = 7470
#   outside: blind 758 + calm 232; inside: calm 3000 + adverse 180 (6 s raw)
#   + blind 327 + calm 3963
#   counterfactual adverse = 32 frames (~1.07 s -> 00:01)
#   usable inside = 7470 - 32 - 327 = 7111 -> 7111 / 7470 = 95.194 (95.2)
#   usable total  = 7111 + 232 = 7343 -> 7343 / 8460 = 86.797 (86.8)
#
# baf_hotl derivation (intervention applied):
#   F = 13650 (455 s -> 07:35), sampling = frames [4530, 13650), F_s = 9120
#   outside: blind 2074 + calm 2456; inside: calm 3500 + adverse 240 (8 s raw)
#   + blind 242 + calm 5138
#   counterfactual adverse = 32 frames (~1.07 s -> 00:01)
#   usable inside = 9120 - 32 - 242 = 8846 -> 8846 / 9120 = 96.996 (97.0)
#   usable total  = 8846 + 2456 = 11302 -> 11302 / 13650 = 82.798 (82.8)


@dataclass(frozen=True)
class MethodProfile:
    name: str
    label: str
    params: GeneratorParams
    use_intervention: bool
    expected_usable_total_pct: float
    expected_usable_sampling_pct: float
    expected_adverse_s: int


def _ts_ms(frame_index: int) -> int:
    return int(round(frame_index * 1000.0 / FPS))


def _method_params(
    mission_id: str,
    species: str,
    herd_size: int,
    mode: CollectionMode,
    outside: tuple[PhaseSpec, ...],
    inside: tuple[PhaseSpec, ...],
    seed: int,
) -> GeneratorParams:
    outside_frames = sum(p.frames for p in outside)
    total_frames = outside_frames + sum(p.frames for p in inside)
    return GeneratorParams(
        phases=outside + inside,
        herd_size=herd_size,
        fps=FPS,
        seed=seed,
        mission_id=mission_id,
        species=species,
        collection_mode=mode,
        sampling_window_ms=(_ts_ms(outside_frames), _ts_ms(total_frames)),
    )


METHOD_PROFILES: dict[str, MethodProfile] = {
    "hitl": MethodProfile(
        name="hitl",
        label="HITL",
        params=_method_params(
            "method-hitl", "zebra", 4, CollectionMode.HITL,
            outside=(_blind(5187),),
            inside=(_calm(10000), _alert(420), _blind(439), _calm(5506)),
            seed=101,
        ),
        use_intervention=False,
        expected_usable_total_pct=71.9,
        expected_usable_sampling_pct=94.8,
        expected_adverse_s=14,
    ),
    "hotl": MethodProfile(
        name="hotl",
        label="HOTL",
        params=_method_params(
            "method-hotl", "zebra", 5, CollectionMode.HOTL,
            outside=(_blind(1374), _calm(2676)),
            inside=(_calm(1800), _alert(60), _blind(6), _calm(1824)),
            seed=102,
        ),
        use_intervention=False,
        expected_usable_total_pct=81.4,
        expected_usable_sampling_pct=98.2,
        expected_adverse_s=2,
    ),
    "baf": MethodProfile(
        name="baf",
        label="BAF",
        params=_method_params(
            "method-baf", "zebra", 9, CollectionMode.HOTL,
            outside=(_blind(758), _calm(232)),
            inside=(_calm(3000), _alert(180), _blind(327), _calm(3963)),
            seed=103,
        ),
        use_intervention=True,
        expected_usable_total_pct=86.8,
        expected_usable_sampling_pct=95.2,
        expected_adverse_s=1,
    ),
    "baf_hotl": MethodProfile(
        name="baf_hotl",
        label="BAF + HOTL",
        params=_method_params(
            "method-baf-hotl", "zebra", 9, CollectionMode.HOTL,
            outside=(_blind(2074), _calm(2456)),
            inside=(_calm(3500), _alert(240), _blind(242), _calm(5138)),
            seed=104,
        ),
        use_intervention=True,
        expected_usable_total_pct=82.8,
        expected_usable_sampling_pct=97.0,
        expected_adverse_s=1,
    ),
}

# The engine defaults the comparison rows are derived under.
DEFAULT_INTERVENTION = InterventionModel(
    response_latency_ms=0.0,
    intervention_duration_ms=5000.0,
    deescalation_delay_ms=1000.0,
    resume_calm_frames=5,
)

PROFILE_NAMES = tuple(f"benchmark-{i}" for i in range(1, 5)) + tuple(METHOD_PROFILES)


def profile_params(name: str, seed: int | None = None) -> GeneratorParams:
    """Generator parameters for a named built-in profile."""
    for i, mission in enumerate(BENCHMARK_MISSIONS, start=1):
        if name == f"benchmark-{i}" or name == mission.mission_id:
            return benchmark_mission_params(mission, seed=seed if seed is not None else 11)
    if name in METHOD_PROFILES:
        params = METHOD_PROFILES[name].params
        if seed is not None:
            params = GeneratorParams(
                phases=params.phases,
                herd_size=params.herd_size,
                fps=params.fps,
                seed=seed,
                mission_id=params.mission_id,
                species=params.species,
                collection_mode=params.collection_mode,
                altitude_m=params.altitude_m,
                sampling_window_ms=params.sampling_window_ms,
            )
        return params
    raise KeyError(f"unknown profile {name!r}; available: {', '.join(PROFILE_NAMES)}")
