"""Live teleoperation: the closed loop in a thread behind a WebSocket.

Wire protocol (see docs/protocol.md for the field-by-field version):

    envelope        {"kind": ..., "seq": ..., "ts_ms": ..., "payload": {...}}
    client -> server   hello, command
    server -> client   hello, state, frame, ack, fault

``seq`` increases strictly per direction per connection.  The server's clock
(``ts_ms``) is simulated milliseconds.  The first client that says hello with
the operator role holds command authority; when it disconnects the earliest
connected operator inherits.  Emergency stop is accepted from any client;
everything else requires authority.

Telemetry is pull-at-rate: each connection has its own sender task that ships
the latest state snapshot at the state rate and the latest encoded frame at
the frame rate.  A slow consumer therefore sees stale-but-fresh data instead
of an ever-growing backlog, and the control loop never waits on a socket.

Commands are queued and applied at the next camera tick, sorted by the
client timestamp (receipt order breaks ties).  Every command gets exactly one
ack (accepted, with the value actually applied after clamping) or one fault
(refused: malformed, unauthorized, rate-limited or bad sequence).

A client disconnect never stops the loop: the plant holds its last setpoint.
Stopping motion is what estop is for, and losing a socket must not yank a
deployed balloon around.
"""

from __future__ import annotations

import asyncio
import base64
import json
import queue
import threading
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass
from typing import Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from balloonscope.config import ServiceSettings, SimConfig, default_config
from balloonscope.control import ClosedLoopSim, Command, TraceRecord
from balloonscope.estimation import Calibration
from balloonscope.harness import ensure_calibration
from balloonscope.imaging import to_png_bytes

PROTOCOL_VERSION = 1

COMMAND_ACTIONS = frozenset({"set_angle", "estop", "reset", "tool_insert", "tool_remove"})


@dataclass(frozen=True)
class Snapshot:
    """Atomically published view of the loop for the sender tasks."""

    record: TraceRecord
    tick_index: int
    estop: bool


class LiveLoop(threading.Thread):
    """Runs the closed-loop sim paced against wall time.

    ``time_scale`` simulated seconds pass per wall second; if the host cannot
    keep up the loop free-runs instead of dropping ticks, so simulated time
    stays deterministic and only the wall pacing suffers.
    """

    def __init__(self, sim: ClosedLoopSim, settings: ServiceSettings):
        super().__init__(name="balloonscope-loop", daemon=True)
        self.sim = sim
        self.settings = settings
        self.stop_event = threading.Event()
        self.inbox: "queue.Queue[tuple[int, int, Command]]" = queue.Queue()
        self._inbox_seq = 0
        self._lock = threading.Lock()
        self._snapshot: Optional[Snapshot] = None
        self._png: tuple[bytes, int, int] | None = None  # bytes, tick, t_ms
        self._png_wall = 0.0
        self._events: list[tuple[int, str, str, int]] = []  # id, code, detail, t_ms
        self._next_event_id = 1
        self._last_fault = ""

    # -- called from the event loop thread --

    def submit(self, client_ts_ms: int, command: Command) -> None:
        with self._lock:
            seq = self._inbox_seq
            self._inbox_seq += 1
        self.inbox.put((client_ts_ms, seq, command))

    def snapshot(self) -> Optional[Snapshot]:
        with self._lock:
            return self._snapshot

    def latest_png(self) -> tuple[bytes, int, int] | None:
        with self._lock:
            return self._png

    def events_since(self, last_id: int) -> list[tuple[int, str, str, int]]:
        with self._lock:
            return [e for e in self._events if e[0] > last_id]

    def sim_time_ms(self) -> int:
        snap = self.snapshot()
        return 0 if snap is None else round(snap.record.time_s * 1000)

    # -- loop thread --

    def _drain_commands(self, t_ms: int) -> None:
        batch = []
        while True:
            try:
                batch.append(self.inbox.get_nowait())
            except queue.Empty:
                break
        batch.sort(key=lambda item: (item[0], item[1]))
        t_s = t_ms / 1000.0
        for _, _, cmd in batch:
            self.sim.submit(Command(t_s, cmd.kind, cmd.value))

    def _publish(self, record: TraceRecord, t_ms: int) -> None:
        now = time.monotonic()
        events = []
        if record.fault and record.fault != self._last_fault:
            events.append((record.fault, f"loop fault at tick {self.sim.tick_index - 1}"))
        self._last_fault = record.fault
        encode = (
            self.sim.last_frame is not None
            and now - self._png_wall >= 1.0 / self.settings.frame_rate_hz
        )
        png = to_png_bytes(self.sim.last_frame, self.settings.png_compress_level) if encode else None
        with self._lock:
            self._snapshot = Snapshot(record, self.sim.tick_index - 1, self.sim.estop)
            if png is not None:
                self._png = (png, self.sim.tick_index - 1, t_ms)
                self._png_wall = now
            for code, detail in events:
                self._events.append((self._next_event_id, code, detail, t_ms))
                self._next_event_id += 1
            del self._events[:-256]

    def run(self) -> None:
        start = time.monotonic()
        scale = self.settings.time_scale
        while not self.stop_event.is_set():
            t_ms = self.sim.next_tick_ms()
            due = start + (t_ms / 1000.0) / scale
            delay = due - time.monotonic()
            if delay > 0 and self.stop_event.wait(delay):
                break
            self._drain_commands(t_ms)
            self.sim.advance_to_ms(t_ms)
            record = self.sim.tick()
            self._publish(record, t_ms)


@dataclass
class ClientInfo:
    ws: WebSocket
    role: str
    connected_at: float
    send_lock: asyncio.Lock
    out_seq: int = 0
    in_seq: int = 0
    authority: bool = False
    last_command_wall: float = 0.0


class Gateway:
    """Connection registry and protocol logic; lives on the event loop."""

    def __init__(self, loop: LiveLoop, settings: ServiceSettings, sim_info: dict):
        self.loop = loop
        self.settings = settings
        self.sim_info = sim_info
        self.clients: dict[int, ClientInfo] = {}
        self._next_id = 1

    def register(self, ws: WebSocket, role: str) -> int:
        cid = self._next_id
        self._next_id += 1
        info = ClientInfo(ws, role, time.monotonic(), asyncio.Lock())
        if role == "operator" and not any(c.authority for c in self.clients.values()):
            info.authority = True
        self.clients[cid] = info
        return cid

    def unregister(self, cid: int) -> None:
        info = self.clients.pop(cid, None)
        if info is None or not info.authority:
            return
        candidates = [c for c in self.clients.values() if c.role == "operator"]
        if candidates:
            min(candidates, key=lambda c: c.connected_at).authority = True

    async def send(self, cid: int, kind: str, payload: dict) -> None:
        info = self.clients.get(cid)
        if info is None:
            return
        async with info.send_lock:
            info.out_seq += 1
            message = {
                "kind": kind,
                "seq": info.out_seq,
                "ts_ms": self.loop.sim_time_ms(),
                "payload": payload,
            }
            await info.ws.send_text(json.dumps(message, separators=(",", ":")))

    def state_payload(self, snap: Snapshot, info: ClientInfo) -> dict:
        r = snap.record
        return {
            "tick": snap.tick_index,
            "time_s": r.time_s,
            "alpha_cmd_deg": r.alpha_cmd_deg,
            "alpha_est_deg": None if r.alpha_est_deg != r.alpha_est_deg else r.alpha_est_deg,
            "alpha_true_deg": r.alpha_true_deg,
            "ratio_target": r.ratio_target,
            "ratio_measured": None if r.ratio_measured != r.ratio_measured else r.ratio_measured,
            "motor_rpm": r.motor_rpm,
            "volume_ml": r.volume_ml,
            "face_diameter_mm": r.face_diameter_mm,
            "tool_inserted": r.tool_inserted,
            "fault": r.fault,
            "estop": snap.estop,
            "authority": info.authority,
        }

    def handle_command(self, cid: int, seq: int, ts_ms: int, payload: dict):
        """Validate one command; returns ('ack'|'fault', payload)."""
        info = self.clients[cid]
        action = payload.get("action")
        if action not in COMMAND_ACTIONS:
            return "fault", {"command_seq": seq, "code": "bad_action",
                             "detail": f"unknown action {action!r}"}
        if action != "estop" and not info.authority:
            return "fault", {"command_seq": seq, "code": "unauthorized",
                             "detail": "command authority is held by another client"}
        now = time.monotonic()
        min_gap = 1.0 / self.settings.command_rate_hz
        if now - info.last_command_wall < min_gap:
            return "fault", {"command_seq": seq, "code": "rate_limited",
                             "detail": f"commands limited to {self.settings.command_rate_hz:g} Hz"}
        value = None
        clamped = False
        if action == "set_angle":
            raw = payload.get("value")
            if not isinstance(raw, (int, float)) or isinstance(raw, bool):
                return "fault", {"command_seq": seq, "code": "bad_value",
                                 "detail": "set_angle needs a numeric value"}
            lo, hi = self.sim_info["bracket_deg"]
            value = min(max(float(raw), lo), hi)
            clamped = value != float(raw)
        info.last_command_wall = now
        self.loop.submit(ts_ms, Command(0.0, action, value))
        return "ack", {"command_seq": seq, "action": action,
                       "applied_value": value, "clamped": clamped}


async def _sender(gateway: Gateway, cid: int) -> None:
    """Per-connection telemetry pump: latest state and frame at fixed rates."""
    state_interval = 1.0 / gateway.settings.state_rate_hz
    frame_interval = 1.0 / gateway.settings.frame_rate_hz
    next_state = time.monotonic()
    next_frame = time.monotonic()
    last_frame_tick = -1
    last_event = 0
    while cid in gateway.clients:
        now = time.monotonic()
        due = min(next_state, next_frame)
        if due > now:
            await asyncio.sleep(due - now)
            continue
        info = gateway.clients.get(cid)
        if info is None:
            return
        if next_state <= now:
            next_state += state_interval
            if next_state <= now:  # fell behind; resync instead of bursting
                next_state = now + state_interval
            snap = gateway.loop.snapshot()
            if snap is not None:
                await gateway.send(cid, "state", gateway.state_payload(snap, info))
            for event_id, code, detail, t_ms in gateway.loop.events_since(last_event):
                last_event = event_id
                await gateway.send(cid, "fault", {"command_seq": None, "code": code,
                                                  "detail": detail, "at_ms": t_ms})
        if next_frame <= now:
            next_frame += frame_interval
            if next_frame <= now:
                next_frame = now + frame_interval
            latest = gateway.loop.latest_png()
            if latest is not None and latest[1] != last_frame_tick:
                png, tick, t_ms = latest
                last_frame_tick = tick
                await gateway.send(cid, "frame", {
                    "tick": tick,
                    "time_ms": t_ms,
                    "encoding": "png",
                    "data": base64.b64encode(png).decode("ascii"),
                })


def create_app(
    config: SimConfig | None = None,
    seed: int = 0,
    time_scale: float | None = None,
    static_dir=None,
    calibration: Calibration | None = None,
    calibration_source=None,
) -> FastAPI:
    """Build the service app; the loop thread starts with the app lifespan."""
    config = config or default_config()
    settings = config.service
    if time_scale is not None:
        settings = ServiceSettings(
            state_rate_hz=settings.state_rate_hz,
            frame_rate_hz=settings.frame_rate_hz,
            command_rate_hz=settings.command_rate_hz,
            time_scale=time_scale,
            png_compress_level=settings.png_compress_level,
        )
    if calibration is None:
        calibration = ensure_calibration(config, seed, calibration_source)
    sim = ClosedLoopSim(
        config.plant, config.scene, config.roi, calibration, config.loop, seed
    )
    loop = LiveLoop(sim, settings)
    sim_info = {
        "protocol": PROTOCOL_VERSION,
        "bracket_deg": list(calibration.bracket_deg),
        "deploy_volume_ml": config.plant.curve.deploy_volume_ml,
        "max_volume_ml": config.plant.curve.max_volume_ml,
        "camera_rate_hz": config.loop.camera_rate_hz,
        "state_rate_hz": settings.state_rate_hz,
        "frame_rate_hz": settings.frame_rate_hz,
        "command_rate_hz": settings.command_rate_hz,
        "time_scale": settings.time_scale,
        "seed": seed,
    }
    gateway = Gateway(loop, settings, sim_info)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        loop.start()
        yield
        loop.stop_event.set()
        loop.join(timeout=5.0)

    app = FastAPI(title="balloonscope teleop", lifespan=lifespan)
    app.state.gateway = gateway
    app.state.loop = loop

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok", "sim_time_ms": loop.sim_time_ms(),
                "clients": len(gateway.clients)}

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        cid = None
        sender_task = None
        try:
            raw = await websocket.receive_text()
            try:
                hello = json.loads(raw)
            except json.JSONDecodeError:
                hello = None
            if (
                not isinstance(hello, dict)
                or hello.get("kind") != "hello"
                or not isinstance(hello.get("seq"), int)
            ):
                await websocket.send_text(json.dumps({
                    "kind": "fault", "seq": 1, "ts_ms": loop.sim_time_ms(),
                    "payload": {"command_seq": None, "code": "bad_hello",
                                "detail": "first message must be a hello envelope"},
                }))
                await websocket.close()
                return
            role = (hello.get("payload") or {}).get("role", "observer")
            if role not in ("operator", "observer"):
                role = "observer"
            cid = gateway.register(websocket, role)
            info = gateway.clients[cid]
            info.in_seq = hello["seq"]
            await gateway.send(cid, "hello", {
                **gateway.sim_info,
                "role": role,
                "authority": info.authority,
            })
            sender_task = asyncio.create_task(_sender(gateway, cid))
            while True:
                raw = await websocket.receive_text()
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    await gateway.send(cid, "fault", {
                        "command_seq": None, "code": "malformed",
                        "detail": "message is not valid JSON"})
                    continue
                seq = msg.get("seq")
                if not isinstance(seq, int) or seq <= info.in_seq:
                    await gateway.send(cid, "fault", {
                        "command_seq": seq if isinstance(seq, int) else None,
                        "code": "bad_seq",
                        "detail": f"client seq must increase (last was {info.in_seq})"})
                    continue
                info.in_seq = seq
                if msg.get("kind") != "command":
                    await gateway.send(cid, "fault", {
                        "command_seq": seq, "code": "bad_kind",
                        "detail": f"unexpected kind {msg.get('kind')!r}"})
                    continue
                ts_ms = msg.get("ts_ms") if isinstance(msg.get("ts_ms"), int) else 0
                kind, payload = gateway.handle_command(
                    cid, seq, ts_ms, msg.get("payload") or {})
                await gateway.send(cid, kind, payload)
        except WebSocketDisconnect:
            pass
        finally:
            if sender_task is not None:
                sender_task.cancel()
            if cid is not None:
                gateway.unregister(cid)

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")
    return app


def serve(
    config: SimConfig | None = None,
    host: str = "127.0.0.1",
    port: int = 8765,
    seed: int = 0,
    time_scale: float | None = None,
    static_dir=None,
    calibration_source=None,
) -> None:
    import uvicorn

    app = create_app(
        config, seed=seed, time_scale=time_scale,
        static_dir=static_dir, calibration_source=calibration_source,
    )
    uvicorn.run(app, host=host, port=port, log_level="warning")
