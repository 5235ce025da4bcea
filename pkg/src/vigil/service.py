"""Ground-control service.

Hosts replay sessions and streams telemetry to any number of dashboard
clients over WebSockets, while accepting operator commands (threshold
changes, pause/retreat/resume, speed, stop). One session is one mission
stream with a single-writer scoring loop; commands are applied between
frames through a serialized queue. Sessions are in-memory only: a replay is
always re-startable from its trace file, so a service restart loses no data.

Wire protocol (JSON, schemas in the README):
  WS /session/{id}/telemetry   server -> client TelemetryMessage stream
  WS /session/{id}/command     client -> server OperatorCommand, server ACK/REJECTED
  HTTP POST/GET/DELETE /sessions[/...], POST /sessions/{id}/stop

A slow or disconnected dashboard never stalls scoring: each client has a
bounded queue; on overflow the oldest queued message is dropped and the
client receives a GAP notice naming the dropped seq range (gap notices are
the documented exemption to per-session seq gaplessness).
"""

from __future__ import annotations

import asyncio
import contextlib
import json
import os
import statistics
import uuid
from dataclasses import dataclass
from typing import Any

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from pydantic import BaseModel

from .alerting import AlertMachine
from .core import THETA_S_MAX, THETA_S_MIN, VigilanceConfig, compute_vigilance
from .trace_io import MissionTrace, TraceError, parse_trace

DEFAULT_BIND = "127.0.0.1:8008"
BIND_ENV_VAR = "VIGIL_BIND"
DEFAULT_CLIENT_BUFFER = 256
STATE_EVERY_N_FRAMES = 30


def resolve_bind(bind: str | None = None) -> tuple[str, int]:
    """host:port from the explicit argument, VIGIL_BIND, or the default."""
    raw = bind or os.environ.get(BIND_ENV_VAR) or DEFAULT_BIND
    host, _, port_s = raw.rpartition(":")
    if not host or not port_s.isdigit():
        raise ValueError(f"bind address must be host:port, got {raw!r}")
    return host, int(port_s)


@dataclass
class _Client:
    queue: asyncio.Queue
    buffer_size: int
    gap_from: int | None = None
    gap_to: int | None = None

    def offer(self, message: dict[str, Any]) -> None:
        while self.queue.qsize() >= self.buffer_size:
            dropped = self.queue.get_nowait()
            seq = dropped["seq"]
            if self.gap_from is None:
                self.gap_from = seq
            self.gap_to = seq
        self.queue.put_nowait(message)


@dataclass
class _PendingAck:
    future: asyncio.Future
    payload: dict[str, Any]


class Session:
    """One mission stream: scoring loop, alert machine, telemetry fan-out."""

    def __init__(
        self,
        session_id: str,
        trace: MissionTrace,
        config: VigilanceConfig,
        speed: float | None = 1.0,
        client_buffer: int = DEFAULT_CLIENT_BUFFER,
    ):
        self.id = session_id
        self.trace = trace
        self.config = config
        self.speed = speed
        self.client_buffer = client_buffer
        self.machine = AlertMachine(config)
        self.status = "created"  # created | running | finished | stopped
        self.drone_state = "tracking"  # tracking | pause | retreat
        self.seq = 0
        self.frame_index: int | None = None
        self.last_score: float | None = None
        self.last_degraded = False
        self.model_confidence: float | None = None
        self.clients: list[_Client] = []
        self.commands: asyncio.Queue = asyncio.Queue()
        self.pending_sample_acks: list[_PendingAck] = []
        self.task: asyncio.Task | None = None
        self._stop = False

    # -- telemetry ----------------------------------------------------------

    def _broadcast(self, kind: str, payload: dict[str, Any]) -> None:
        self.seq += 1
        message = {"kind": kind, "seq": self.seq, "payload": payload}
        for client in self.clients:
            client.offer(message)

    def state_payload(self, snapshot: bool = False) -> dict[str, Any]:
        meta = self.trace.metadata
        return {
            "mission_id": meta.mission_id,
            "status": self.status,
            "theta_s": self.config.theta_s,
            "speed": self.speed,
            "drone_state": self.drone_state,
            "navigation_mode": meta.collection_mode.value,
            "battery_pct": meta.battery_pct if meta.battery_pct is not None else 100.0,
            "model_confidence": self.model_confidence,
            "frame_index": self.frame_index,
            "score": self.last_score,
            "level": self.machine.state.level.value,
            "degraded": self.last_degraded,
            "herd_size": meta.herd_size,
            "species": meta.species,
            "snapshot": snapshot,
        }

    def snapshot_message(self) -> dict[str, Any]:
        # Snapshot reuses the current seq so the joining client continues
        # gaplessly from seq + 1.
        return {"kind": "STATE", "seq": self.seq, "payload": self.state_payload(snapshot=True)}

    # -- commands -----------------------------------------------------------

    async def submit_command(self, command: dict[str, Any]) -> dict[str, Any]:
        """Validate and apply one operator command; returns the reply message."""
        kind = command.get("kind")
        if kind == "SET_THRESHOLD":
            value = command.get("theta_s")
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                return {"kind": "REJECTED", "command": kind, "reason": "theta_s must be a number"}
            if not THETA_S_MIN <= value <= THETA_S_MAX:
                return {
                    "kind": "REJECTED",
                    "command": kind,
                    "reason": f"theta_s must be within [{THETA_S_MIN}, {THETA_S_MAX}]",
                }
            loop = asyncio.get_running_loop()
            pending = _PendingAck(
                future=loop.create_future(),
                payload={"kind": "ACK", "command": kind, "theta_s": float(value)},
            )
            await self.commands.put(("set_threshold", float(value), pending))
            if self.status != "running":
                self._drain_commands()
                self._resolve_acks(applied_seq=None)
            return await pending.future
        if kind in ("PAUSE", "RETREAT", "RESUME"):
            state = {"PAUSE": "pause", "RETREAT": "retreat", "RESUME": "tracking"}[kind]
            await self.commands.put(("drone_state", state, None))
            if self.status != "running":
                self._drain_commands()
            return {"kind": "ACK", "command": kind, "drone_state": state}
        if kind == "SET_SPEED":
            value = command.get("speed")
            if value in ("afap", None):
                speed: float | None = None
            elif isinstance(value, (int, float)) and not isinstance(value, bool) and value > 0:
                speed = float(value)
            else:
                return {"kind": "REJECTED", "command": kind, "reason": "speed must be positive or 'afap'"}
            await self.commands.put(("speed", speed, None))
            if self.status != "running":
                self._drain_commands()
            return {"kind": "ACK", "command": kind, "speed": speed}
        if kind == "START_REPLAY":
            if self.status == "created":
                self.start()
                return {"kind": "ACK", "command": kind}
            return {"kind": "REJECTED", "command": kind, "reason": f"session is {self.status}"}
        if kind == "STOP":
            self._stop = True
            if self.status == "created":
                self.status = "stopped"
            return {"kind": "ACK", "command": kind}
        return {"kind": "REJECTED", "command": kind, "reason": "unknown command kind"}

    def _drain_commands(self) -> None:
        while True:
            try:
                op, value, pending = self.commands.get_nowait()
            except asyncio.QueueEmpty:
                return
            if op == "set_threshold":
                self.config.theta_s = value
                if pending is not None:
                    self.pending_sample_acks.append(pending)
                self._broadcast("STATE", self.state_payload())
            elif op == "drone_state":
                self.drone_state = value
                self._broadcast("STATE", self.state_payload())
            elif op == "speed":
                self.speed = value
                self._broadcast("STATE", self.state_payload())

    def _resolve_acks(self, applied_seq: int | None) -> None:
        for pending in self.pending_sample_acks:
            if not pending.future.done():
                pending.future.set_result({**pending.payload, "applied_seq": applied_seq})
        self.pending_sample_acks.clear()

    # -- replay loop --------------------------------------------------------

    def start(self) -> None:
        if self.task is None:
            self.status = "running"
            self.task = asyncio.create_task(self._run())

    async def _run(self) -> None:
        loop = asyncio.get_running_loop()
        last_wall = loop.time()
        last_ts: float | None = None
        frames_since_state = 0
        try:
            for frame in self.trace.frames:
                if self._stop:
                    break
                self._drain_commands()  # commands apply between frames
                # Incremental pacing: robust to mid-stream speed changes.
                if self.speed is not None and last_ts is not None:
                    target = last_wall + ((frame.timestamp_ms - last_ts) / 1000.0) / self.speed
                    delay = target - loop.time()
                    if delay > 0:
                        await asyncio.sleep(delay)
                elif self.speed is None and frame.frame_index % 100 == 0:
                    await asyncio.sleep(0)  # let clients drain under AFAP
                last_wall = loop.time()
                last_ts = float(frame.timestamp_ms)

                infer_start = loop.time()
                sample = compute_vigilance(frame, self.config)
                score_ms = (loop.time() - infer_start) * 1000.0
                alert_start = loop.time()
                event = self.machine.step(sample)
                alert_ms = (loop.time() - alert_start) * 1000.0

                self.frame_index = frame.frame_index
                self.last_score = sample.score
                self.last_degraded = sample.degraded
                confidences = [ind.detection_confidence for ind in frame.individuals]
                self.model_confidence = (
                    round(statistics.fmean(confidences), 4) if confidences else None
                )

                self._broadcast(
                    "SAMPLE",
                    {
                        "frame_index": sample.frame_index,
                        "timestamp_ms": sample.timestamp_ms,
                        "score": sample.score,
                        "level": self.machine.state.level.value,
                        "n_included": sample.n_included,
                        "n_adverse": sample.n_adverse,
                        "n_detected_raw": sample.n_detected_raw,
                        "centroid": list(sample.centroid) if sample.centroid else None,
                        "degraded": sample.degraded,
                        "theta_s": self.config.theta_s,
                        "individuals": [
                            {
                                "id": ind.individual_id,
                                "bbox": [ind.bbox.x, ind.bbox.y, ind.bbox.w, ind.bbox.h],
                                "behavior": ind.behavior.value,
                                "detection_confidence": ind.detection_confidence,
                                "behavior_confidence": ind.behavior_confidence,
                            }
                            for ind in frame.individuals
                        ],
                    },
                )
                self._resolve_acks(applied_seq=self.seq)
                if event is not None:
                    self._broadcast(
                        "ALERT",
                        {
                            "kind": event.kind.value,
                            "timestamp_ms": event.timestamp_ms,
                            "score": event.score,
                            "audio": event.audio,
                            "flashing": event.flashing,
                        },
                    )
                self._broadcast(
                    "LATENCY",
                    {
                        "frame_index": frame.frame_index,
                        "score_ms": round(score_ms, 4),
                        "alert_ms": round(alert_ms, 4),
                        "total_ms": round(score_ms + alert_ms, 4),
                    },
                )
                frames_since_state += 1
                if frames_since_state >= STATE_EVERY_N_FRAMES:
                    frames_since_state = 0
                    self._broadcast("STATE", self.state_payload())
        finally:
            self.status = "stopped" if self._stop else "finished"
            self._drain_commands()
            self._resolve_acks(applied_seq=None)
            self._broadcast(
                "MISSION_END",
                {"status": self.status, "frames_processed": self.frame_index},
            )

    async def stop(self) -> None:
        self._stop = True
        if self.task is not None:
            with contextlib.suppress(asyncio.CancelledError):
                await self.task
        elif self.status == "created":
            self.status = "stopped"


class SessionManager:
    def __init__(self, client_buffer: int = DEFAULT_CLIENT_BUFFER):
        self.sessions: dict[str, Session] = {}
        self.client_buffer = client_buffer

    def create(
        self,
        trace: MissionTrace,
        config: VigilanceConfig,
        speed: float | None,
        auto_start: bool,
    ) -> Session:
        session_id = uuid.uuid4().hex[:12]
        session = Session(
            session_id, trace, config, speed=speed, client_buffer=self.client_buffer
        )
        self.sessions[session_id] = session
        if auto_start:
            session.start()
        return session

    def get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id!r}")
        return session


class CreateSessionRequest(BaseModel):
    trace_path: str | None = None
    profile: str | None = None
    theta_s: float | None = None
    speed: float | str | None = 1.0
    auto_start: bool = True
    seed: int | None = None


def _parse_speed(value: float | str | None) -> float | None:
    if value in (None, "afap"):
        return None
    if isinstance(value, str):
        raise HTTPException(status_code=422, detail="speed must be a number or 'afap'")
    if value <= 0:
        raise HTTPException(status_code=422, detail="speed must be positive")
    return float(value)


def create_app(
    client_buffer: int = DEFAULT_CLIENT_BUFFER,
    base_config: VigilanceConfig | None = None,
) -> FastAPI:
    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        # hooks appended to app.state.startup_hooks run once the loop exists
        # (used by `vigil replay --serve` to start its preloaded session)
        for hook in app.state.startup_hooks:
            hook()
        yield

    app = FastAPI(title="vigil ground-control service", lifespan=lifespan)
    manager = SessionManager(client_buffer=client_buffer)
    app.state.manager = manager
    app.state.base_config = base_config or VigilanceConfig()
    app.state.startup_hooks = []

    def _session_summary(session: Session) -> dict[str, Any]:
        return {
            "session_id": session.id,
            "mission_id": session.trace.metadata.mission_id,
            "status": session.status,
            "theta_s": session.config.theta_s,
            "frames": len(session.trace.frames),
        }

    @app.post("/sessions", status_code=201)
    async def create_session(request: CreateSessionRequest) -> dict[str, Any]:
        if (request.trace_path is None) == (request.profile is None):
            raise HTTPException(
                status_code=422, detail="provide exactly one of trace_path or profile"
            )
        if request.trace_path is not None:
            try:
                trace = parse_trace(request.trace_path)
            except FileNotFoundError:
                raise HTTPException(status_code=404, detail=f"no trace at {request.trace_path!r}")
            except TraceError as exc:
                raise HTTPException(status_code=422, detail=f"invalid trace: {exc}")
        else:
            from .profiles import profile_params
            from .replay import generate_synthetic_trace

            try:
                params = profile_params(request.profile, seed=request.seed)
            except KeyError as exc:
                raise HTTPException(status_code=404, detail=str(exc.args[0]))
            trace = generate_synthetic_trace(params)
        base = app.state.base_config
        theta = request.theta_s if request.theta_s is not None else base.theta_s
        try:
            config = VigilanceConfig(
                theta_s=theta,
                theta_c=base.theta_c,
                behavior_theta_c=base.behavior_theta_c,
                weights=dict(base.weights),
                debounce_frames=base.debounce_frames,
                yellow_factor=base.yellow_factor,
                escalation_persist_ms=base.escalation_persist_ms,
            )
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        session = manager.create(
            trace, config, speed=_parse_speed(request.speed), auto_start=request.auto_start
        )
        return _session_summary(session)

    @app.get("/sessions")
    async def list_sessions() -> list[dict[str, Any]]:
        return [_session_summary(s) for s in manager.sessions.values()]

    @app.get("/sessions/{session_id}")
    async def session_state(session_id: str) -> dict[str, Any]:
        session = manager.get(session_id)
        return {**_session_summary(session), **session.state_payload()}

    @app.post("/sessions/{session_id}/stop")
    async def stop_session(session_id: str) -> dict[str, Any]:
        session = manager.get(session_id)
        await session.stop()
        return _session_summary(session)

    @app.delete("/sessions/{session_id}")
    async def delete_session(session_id: str) -> dict[str, Any]:
        session = manager.get(session_id)
        await session.stop()
        del manager.sessions[session_id]
        return {"deleted": session_id}

    @app.websocket("/session/{session_id}/telemetry")
    async def telemetry_socket(websocket: WebSocket, session_id: str) -> None:
        session = manager.sessions.get(session_id)
        if session is None:
            await websocket.close(code=4404)
            return
        await websocket.accept()
        buffer_raw = websocket.query_params.get("buffer")
        buffer_size = session.client_buffer
        if buffer_raw is not None and buffer_raw.isdigit() and int(buffer_raw) > 0:
            buffer_size = int(buffer_raw)
        client = _Client(queue=asyncio.Queue(), buffer_size=buffer_size)
        session.clients.append(client)
        try:
            # Late-join contract: a STATE snapshot precedes the live stream.
            await websocket.send_json(session.snapshot_message())
            if session.status in ("finished", "stopped") and client.queue.empty():
                await websocket.send_json(
                    {
                        "kind": "MISSION_END",
                        "seq": session.seq,
                        "payload": {"status": session.status, "frames_processed": session.frame_index},
                    }
                )
                return
            while True:
                message = await client.queue.get()
                if client.gap_from is not None:
                    await websocket.send_json(
                        {
                            "kind": "GAP",
                            "seq": client.gap_to,
                            "payload": {
                                "dropped_from": client.gap_from,
                                "dropped_to": client.gap_to,
                            },
                        }
                    )
                    client.gap_from = None
                    client.gap_to = None
                await websocket.send_json(message)
                if message["kind"] == "MISSION_END":
                    return
        except WebSocketDisconnect:
            pass
        finally:
            if client in session.clients:
                session.clients.remove(client)

    @app.websocket("/session/{session_id}/command")
    async def command_socket(websocket: WebSocket, session_id: str) -> None:
        session = manager.sessions.get(session_id)
        if session is None:
            await websocket.close(code=4404)
            return
        await websocket.accept()
        try:
            while True:
                raw = await websocket.receive_text()
                try:
                    command = json.loads(raw)
                    if not isinstance(command, dict):
                        raise ValueError("command must be a JSON object")
                except ValueError as exc:
                    await websocket.send_json(
                        {"kind": "REJECTED", "command": None, "reason": f"malformed command: {exc}"}
                    )
                    continue
                reply = await session.submit_command(command)
                await websocket.send_json(reply)
        except WebSocketDisconnect:
            pass

    return app


def serve(
    bind: str | None = None,
    *,
    client_buffer: int = DEFAULT_CLIENT_BUFFER,
    base_config: VigilanceConfig | None = None,
) -> None:
    """Run the service until interrupted (blocking)."""
    import uvicorn

    host, port = resolve_bind(bind)
    app = create_app(client_buffer=client_buffer, base_config=base_config)
    uvicorn.run(app, host=host, port=port, log_level="info")
