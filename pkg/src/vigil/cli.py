"""Command-line interface.

Subcommands: analyze (batch metrics), replay (single mission, optionally
served live), simulate (what-if intervention table), gen (synthetic traces),
validate (trace linting), serve (ground-control service).

Exit codes: 0 success, 1 validation failure or threshold regression, 2 usage
error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .core import VigilanceConfig
from .metrics import (
    build_metrics_report,
    comparison_report,
    format_mmss,
    format_pct,
    mean_warning_window_s,
)
from .replay import (
    GeneratorParams,
    InterventionModel,
    PhaseKind,
    PhaseSpec,
    generate_synthetic_trace,
    replay_mission,
    replay_result_to_dict,
)
from .trace_io import TraceError, parse_trace, validate_trace, write_trace


def _config(theta: float | None) -> VigilanceConfig:
    if theta is None:
        return VigilanceConfig()
    try:
        return VigilanceConfig(theta_s=theta)
    except ValueError as exc:
        raise click.UsageError(str(exc))


def _parse_speed(raw: str) -> float | None:
    if raw.lower() in ("afap", "max"):
        return None
    try:
        value = float(raw)
    except ValueError:
        raise click.UsageError(f"--speed must be a number or 'afap', got {raw!r}")
    if value <= 0:
        raise click.UsageError("--speed must be positive")
    return value


def _load_trace(path: str):
    try:
        return parse_trace(path)
    except TraceError as exc:
        click.echo(f"error: {path}: {exc}", err=True)
        raise SystemExit(1)


@click.group()
def main() -> None:
    """Group-vigilance monitoring, alerting, and mission replay."""


@main.command()
@click.argument("traces", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--theta", type=float, default=None, help="vigilance threshold (default 0.3)")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), help="write comparison CSV")
@click.option("--markdown", "md_path", type=click.Path(dir_okay=False), help="write comparison table")
@click.option("--min-usable", type=float, default=None, help="fail (exit 1) below this usable %")
@click.option("--max-adverse", type=float, default=None, help="fail (exit 1) above this many adverse seconds")
def analyze(traces, theta, csv_path, md_path, min_usable, max_adverse) -> None:
    """Batch metrics over one or more mission traces."""
    config = _config(theta)
    labeled = []
    reports = []
    for path in traces:
        trace = _load_trace(path)
        result = replay_mission(trace, config)
        report = build_metrics_report(result)
        labeled.append((report.mission_id, result))
        reports.append(report)
        window = "-" if report.warning_window_s is None else f"{report.warning_window_s:.1f}s"
        first = format_mmss(report.first_detection_ms)
        click.echo(
            f"{report.mission_id}: warning window {window}, first exceedance {first}, "
            f"usable {format_pct(report.usable.total_pct)}%"
            f" (sampling {format_pct(report.usable.sampling_pct)}%), "
            f"adverse {format_mmss(report.adverse_behavior_ms)}, "
            f"duration {format_mmss(report.mission_duration.total_ms)}"
        )
    mean_window = mean_warning_window_s(reports)
    if mean_window is not None:
        click.echo(f"mean warning window: {mean_window:.1f}s over "
                   f"{sum(1 for r in reports if r.warning_window_s is not None)} mission(s)")
    table = comparison_report(labeled)
    if csv_path:
        Path(csv_path).write_text(table.to_csv(), encoding="utf-8")
        click.echo(f"wrote {csv_path}")
    if md_path:
        Path(md_path).write_text(table.to_markdown(), encoding="utf-8")
        click.echo(f"wrote {md_path}")

    failed = False
    for report in reports:
        if min_usable is not None and report.usable.total_pct < min_usable:
            click.echo(
                f"regression: {report.mission_id} usable {report.usable.total_pct:.1f}% < {min_usable}%",
                err=True,
            )
            failed = True
        if max_adverse is not None and report.adverse_behavior_ms > max_adverse * 1000.0:
            click.echo(
                f"regression: {report.mission_id} adverse {format_mmss(report.adverse_behavior_ms)} "
                f"> {max_adverse:.0f}s",
                err=True,
            )
            failed = True
    if failed:
        raise SystemExit(1)


@main.command()
@click.argument("trace_path", metavar="TRACE", type=click.Path(exists=True, dir_okay=False))
@click.option("--serve", "serve_flag", is_flag=True, help="host the replay as a live session")
@click.option("--speed", default="afap", help="real-time multiplier or 'afap'")
@click.option("--theta", type=float, default=None)
@click.option("--bind", default=None, help="host:port for --serve (default VIGIL_BIND)")
@click.option("--out", type=click.Path(dir_okay=False), help="write full replay result JSON")
def replay(trace_path, serve_flag, speed, theta, bind, out) -> None:
    """Replay one mission; print a result summary or serve it live."""
    config = _config(theta)
    speed_value = _parse_speed(speed)
    if serve_flag:
        import uvicorn

        from .service import create_app, resolve_bind

        trace = _load_trace(trace_path)
        app = create_app(base_config=config)
        session = app.state.manager.create(
            trace, config, speed=speed_value if speed != "afap" else 1.0, auto_start=False
        )
        host, port = resolve_bind(bind)
        click.echo(f"session {session.id} for {trace.metadata.mission_id}")
        click.echo(f"telemetry: ws://{host}:{port}/session/{session.id}/telemetry")
        click.echo(f"commands:  ws://{host}:{port}/session/{session.id}/command")
        app.state.startup_hooks.append(session.start)
        uvicorn.run(app, host=host, port=port, log_level="warning")
        return
    trace = _load_trace(trace_path)
    result = replay_mission(trace, config, speed=speed_value)
    click.echo(json.dumps(replay_result_to_dict(result), indent=2))
    if out:
        Path(out).write_text(
            json.dumps(replay_result_to_dict(result, include_samples=True)), encoding="utf-8"
        )
        click.echo(f"wrote {out}", err=True)


def _parse_intervention(spec: str | None) -> InterventionModel:
    """Compact spec: comma-separated key=value pairs. Keys: latency_ms,
    duration_ms, deescalation_ms, resume_frames, action."""
    kwargs: dict[str, object] = {}
    if spec:
        for part in spec.split(","):
            part = part.strip()
            if not part:
                continue
            if "=" not in part:
                raise click.UsageError(f"--intervention entries must be key=value, got {part!r}")
            key, value = part.split("=", 1)
            key = key.strip()
            value = value.strip()
            try:
                if key == "latency_ms":
                    kwargs["response_latency_ms"] = float(value)
                elif key == "duration_ms":
                    kwargs["intervention_duration_ms"] = float(value)
                elif key == "deescalation_ms":
                    kwargs["deescalation_delay_ms"] = float(value)
                elif key == "resume_frames":
                    kwargs["resume_calm_frames"] = int(value)
                elif key == "action":
                    kwargs["action"] = value
                else:
                    raise click.UsageError(f"unknown --intervention key {key!r}")
            except ValueError:
                raise click.UsageError(f"bad value for --intervention {key}: {value!r}")
    try:
        return InterventionModel(**kwargs)
    except ValueError as exc:
        raise click.UsageError(str(exc))


@main.command()
@click.argument("trace_path", metavar="TRACE", type=click.Path(exists=True, dir_okay=False))
@click.option("--intervention", "intervention_spec", default=None,
              help="key=value[,key=value...]: latency_ms, duration_ms, deescalation_ms, resume_frames, action")
@click.option("--theta", type=float, default=None)
@click.option("--json", "as_json", is_flag=True, help="machine-readable output")
def simulate(trace_path, intervention_spec, theta, as_json) -> None:
    """What-if intervention table for one mission."""
    config = _config(theta)
    model = _parse_intervention(intervention_spec)
    trace = _load_trace(trace_path)
    baseline = replay_mission(trace, config)
    simulated = replay_mission(trace, config, intervention=model)
    raw_ms = baseline.raw_adverse_ms
    cf_ms = simulated.counterfactual_adverse_ms
    reduction = 100.0 * (1.0 - cf_ms / raw_ms) if raw_ms > 0 else 0.0
    if as_json:
        click.echo(
            json.dumps(
                {
                    "mission_id": trace.metadata.mission_id,
                    "raw_adverse_ms": raw_ms,
                    "counterfactual_adverse_ms": cf_ms,
                    "reduction_pct": reduction,
                    "interventions": [
                        {"engage_ms": i.engage_ms, "release_ms": i.release_ms}
                        for i in simulated.interventions
                    ],
                    "deescalation_delay_ms": model.deescalation_delay_ms,
                }
            )
        )
        return
    click.echo(f"mission: {trace.metadata.mission_id}")
    click.echo(
        f"intervention: latency {model.response_latency_ms:.0f} ms, "
        f"{model.action} {model.intervention_duration_ms:.0f} ms, "
        f"de-escalation {model.deescalation_delay_ms:.0f} ms (assumed, not measured), "
        f"resume after {model.resume_calm_frames} calm frames"
    )
    click.echo(f"adverse recorded:        {format_mmss(raw_ms)} ({raw_ms:.0f} ms)")
    click.echo(f"adverse with response:   {format_mmss(cf_ms)} ({cf_ms:.0f} ms)")
    click.echo(f"reduction:               {reduction:.1f}%")
    click.echo(f"engagements:             {len(simulated.interventions)}")


def _parse_duration_ms(raw: str) -> float:
    raw = raw.strip().lower()
    try:
        if raw.endswith("ms"):
            return float(raw[:-2])
        if raw.endswith("s"):
            return float(raw[:-1]) * 1000.0
        return float(raw)
    except ValueError:
        raise click.UsageError(f"bad duration {raw!r} (use e.g. 10s, 400ms, or plain ms)")


def _parse_phase(spec: str) -> PhaseSpec:
    """Phase spec: kind:duration[:fraction[:noise]], e.g. alert:53s:0.5."""
    parts = spec.split(":")
    if len(parts) < 2:
        raise click.UsageError(f"phase must be kind:duration[:fraction[:noise]], got {spec!r}")
    try:
        kind = PhaseKind(parts[0].strip().lower())
    except ValueError:
        valid = ", ".join(k.value for k in PhaseKind)
        raise click.UsageError(f"unknown phase kind {parts[0]!r} (one of: {valid})")
    duration = _parse_duration_ms(parts[1])
    fraction = 1.0 if kind is PhaseKind.FLIGHT else 0.0
    noise = 0.0
    try:
        if len(parts) >= 3 and parts[2]:
            fraction = float(parts[2])
        if len(parts) >= 4 and parts[3]:
            noise = float(parts[3])
    except ValueError:
        raise click.UsageError(f"bad phase numbers in {spec!r}")
    try:
        return PhaseSpec(duration_ms=duration, vigilant_fraction=fraction, noise=noise, kind=kind)
    except ValueError as exc:
        raise click.UsageError(str(exc))


@main.command()
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--profile", default=None, help="built-in profile name (see --list-profiles)")
@click.option("--list-profiles", is_flag=True, help="list built-in profiles and exit")
@click.option("--phase", "phases", multiple=True, help="kind:duration[:fraction[:noise]]")
@click.option("--herd-size", type=int, default=4)
@click.option("--fps", type=float, default=30.0)
@click.option("--seed", type=int, default=0)
@click.option("--mission-id", default="synthetic")
@click.option("--species", default="zebra")
def gen(out, profile, list_profiles, phases, herd_size, fps, seed, mission_id, species) -> None:
    """Generate a synthetic mission trace (deterministic per seed)."""
    from .profiles import PROFILE_NAMES, profile_params

    if list_profiles:
        for name in PROFILE_NAMES:
            click.echo(name)
        return
    if profile is not None:
        try:
            params = profile_params(profile, seed=seed)
        except KeyError as exc:
            raise click.UsageError(str(exc.args[0]))
    else:
        if not phases:
            raise click.UsageError("provide --profile or at least one --phase")
        try:
            params = GeneratorParams(
                phases=tuple(_parse_phase(p) for p in phases),
                herd_size=herd_size,
                fps=fps,
                seed=seed,
                mission_id=mission_id,
                species=species,
            )
        except ValueError as exc:
            raise click.UsageError(str(exc))
    trace = generate_synthetic_trace(params)
    write_trace(trace, out)
    click.echo(f"wrote {out}: {len(trace.frames)} frames, {len(trace.events)} events")


@main.command()
@click.argument("trace_path", metavar="TRACE", type=click.Path(exists=True, dir_okay=False))
def validate(trace_path) -> None:
    """Parse and lint a trace file; exit 1 on any error."""
    try:
        trace = parse_trace(trace_path)
    except TraceError as exc:
        click.echo(f"error: {exc}", err=True)
        raise SystemExit(1)
    diagnostics = validate_trace(trace)
    for diag in diagnostics:
        click.echo(f"{diag.severity}: {diag.location}: {diag.message}",
                   err=diag.severity == "error")
    if any(d.severity == "error" for d in diagnostics):
        raise SystemExit(1)
    click.echo(
        f"ok: {trace.metadata.mission_id}: {len(trace.frames)} frames, "
        f"{len(trace.events)} events, {len(diagnostics)} warning(s)"
    )


@main.command()
@click.option("--bind", default=None, help="host:port (default VIGIL_BIND or 127.0.0.1:8008)")
@click.option("--theta", type=float, default=None)
def serve(bind, theta) -> None:
    """Run the ground-control service."""
    from .service import serve as run_service

    try:
        run_service(bind, base_config=_config(theta))
    except ValueError as exc:
        raise click.UsageError(str(exc))


if __name__ == "__main__":
    sys.exit(main())
