"""Live engine sessions over HTTP for interactive clients.

Endpoints (JSON request/response bodies; errors carry ``{code, message}``):

* ``GET  /plans`` and ``GET /plans/{plan_id}`` -- the plan catalog.
* ``POST /sessions`` -- body ``{"plan_id": ...}`` or ``{"plan": {...}}``;
  creates a session at stage 0.
* ``GET  /sessions/{id}`` -- state snapshot.
* ``POST /sessions/{id}/events`` -- one operator action; body
  ``{"timestamp_ms": int?, "action": {...}}`` with the scenario-file action
  shape. Returns the engine's messages plus a fresh snapshot.
* ``GET  /sessions/{id}/stream?after=N`` -- server-push channel
  (``text/event-stream``): replays buffered events with seq > N, then live.
* ``GET  /sessions/{id}/timeline`` -- timeline CSV once completed.

Client events are the operator surrogate: each one is translated into a
synthetic synchronized frame pair (zero lag, zero noise) and stepped through
the engine. Event timestamps are milliseconds since session start; the
service bumps non-increasing ones so recorded stage boundaries stay strictly
ordered. Per session, events are processed under a lock in arrival order;
distinct sessions are independent.
"""

from __future__ import annotations

import io
import json
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Iterator, Mapping, Sequence

from fastapi import Body, FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse

from .engine import (
    AUXILIARY,
    LEADING,
    ConnectionHypothesis,
    Detection,
    EngineState,
    FrameObservation,
    init_state,
    predicted_timeline,
    step,
)
from .errors import FormatError, GeometryError, InputError
from .model import AssemblyPlan, EngineConfig, Rect, plan_from_dict, plan_to_dict, validate_plan
from .simulate import part_bbox_in_zone

STREAM_KEEPALIVE_S = 0.5


@dataclass
class _Session:
    session_id: str
    plan: AssemblyPlan
    state: EngineState
    created_at: str
    lock: threading.Lock = field(default_factory=threading.Lock)
    cond: threading.Condition = field(init=False)
    pushed: list[dict[str, Any]] = field(default_factory=list)
    last_ts: int = 0
    # Standing world the client has built up: (part, zone) -> detections.
    placements: dict[tuple[str, str], list[Detection]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.cond = threading.Condition(self.lock)

    def push(self, kind: str, payload: dict[str, Any]) -> None:
        self.pushed.append({"seq": len(self.pushed), "kind": kind, **payload})
        self.cond.notify_all()


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse({"code": code, "message": message}, status_code=status)


def _snapshot(session: _Session) -> dict[str, Any]:
    state = session.state
    stage = state.current_stage()
    occupancy = [{"zone": zone, "part": part, "count": count}
                 for (zone, part), count in sorted(state.zone_occupancy.items())]
    current: dict[str, Any] | None = None
    if stage is not None:
        requirements: Any = stage.connection
        if stage.kind == "placement":
            requirements = [{"part": r.part, "zone": r.zone, "count": r.count}
                            for r in stage.placements]
        current = {"index": stage.index, "kind": stage.kind,
                   "instruction": stage.instruction, "requirements": requirements}
    return {
        "session_id": session.session_id,
        "plan_id": session.plan.plan_id,
        "created_at": session.created_at,
        "stage_count": session.plan.stage_count,
        "current_stage_index": state.current_stage_index,
        "completed": state.completed,
        "instruction": stage.instruction if stage is not None else None,
        "current_stage": current,
        "zone_occupancy": occupancy,
    }


def _event_frames(session: _Session, body: Mapping[str, Any]) -> tuple[FrameObservation, FrameObservation]:
    """Translate one client action into a synchronized synthetic frame pair."""
    action = body.get("action")
    if not isinstance(action, Mapping) or "kind" not in action:
        raise InputError("event must carry an action object with a kind")
    kind = action["kind"]
    plan = session.plan

    ts = body.get("timestamp_ms", session.last_ts + 1)
    if not isinstance(ts, int) or isinstance(ts, bool):
        raise InputError("timestamp_ms must be an integer")
    ts = max(ts, session.last_ts + 1)
    session.last_ts = ts

    hypotheses: tuple[ConnectionHypothesis, ...] = ()
    aux_hypotheses: tuple[ConnectionHypothesis, ...] = ()
    if kind == "place_part":
        part, zone_id = _part_zone(action, plan)
        bbox = action.get("bbox")
        rect = (Rect(bbox["x"], bbox["y"], bbox["w"], bbox["h"])
                if isinstance(bbox, Mapping) else part_bbox_in_zone(plan.zone(zone_id)))
        session.placements.setdefault((part, zone_id), []).append(Detection(part, rect))
    elif kind == "remove_part":
        part, zone_id = _part_zone(action, plan)
        stack = session.placements.get((part, zone_id))
        if not stack:
            raise InputError(f"no {part!r} currently placed in {zone_id!r}")
        stack.pop()
    elif kind == "show_connection":
        connection = action.get("connection")
        if connection not in plan.connection_ids:
            raise InputError(f"unknown connection id {connection!r}")
        leading_prob = float(action.get("leading_prob", 1.0))
        aux_prob = float(action.get("aux_prob", 1.0))
        zone_id = plan.assembly_zone.id
        hypotheses = (ConnectionHypothesis(connection, leading_prob, zone_id),)
        aux_hypotheses = (ConnectionHypothesis(connection, aux_prob, zone_id),)
    else:
        raise InputError(f"unknown action kind {kind!r}")

    detections = tuple(det for stack in session.placements.values() for det in stack)
    return (FrameObservation(LEADING, ts, detections, hypotheses),
            FrameObservation(AUXILIARY, ts, detections, aux_hypotheses))


def _part_zone(action: Mapping[str, Any], plan: AssemblyPlan) -> tuple[str, str]:
    part = action.get("part")
    zone = action.get("zone")
    if part not in plan.part_ids:
        raise InputError(f"unknown part id {part!r}")
    if zone not in {z.id for z in plan.zones}:
        raise InputError(f"unknown zone id {zone!r}")
    return part, zone


def create_app(plans: Sequence[AssemblyPlan] = (), ui_dir: str | None = None) -> FastAPI:
    """Build the service with a catalog of offered plans."""
    app = FastAPI(title="stagewatch session service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    catalog: dict[str, AssemblyPlan] = {p.plan_id: p for p in plans}
    sessions: dict[str, _Session] = {}
    registry_lock = threading.Lock()

    @app.get("/plans")
    def list_plans() -> Any:
        return [{"plan_id": p.plan_id, "stage_count": p.stage_count}
                for p in catalog.values()]

    @app.get("/plans/{plan_id}")
    def get_plan(plan_id: str) -> Any:
        plan = catalog.get(plan_id)
        if plan is None:
            return _error(404, "unknown_plan", f"no plan {plan_id!r}")
        return plan_to_dict(plan)

    @app.post("/sessions")
    def create_session(body: dict = Body(...)) -> Any:
        if "plan" in body:
            try:
                plan = plan_from_dict(body["plan"])
            except (FormatError, GeometryError) as exc:
                return _error(400, "invalid_plan", str(exc))
        elif "plan_id" in body:
            plan = catalog.get(body["plan_id"])
            if plan is None:
                return _error(404, "unknown_plan", f"no plan {body['plan_id']!r}")
        else:
            return _error(400, "invalid_request", "body must carry plan or plan_id")
        violations = validate_plan(plan)
        if violations:
            return _error(400, "invalid_plan", "; ".join(violations))

        session = _Session(
            session_id=uuid.uuid4().hex[:12],
            plan=plan,
            state=init_state(plan, EngineConfig()),
            created_at=datetime.now(timezone.utc).isoformat(),
        )
        with session.lock:
            for message in session.state.messages:
                session.push("message", {"message": message.to_dict()})
            session.push("state", {"state": _snapshot(session)})
        with registry_lock:
            sessions[session.session_id] = session
        return {**_snapshot(session), "plan": plan_to_dict(plan)}

    def _get(session_id: str) -> _Session | None:
        with registry_lock:
            return sessions.get(session_id)

    @app.get("/sessions/{session_id}")
    def get_state(session_id: str) -> Any:
        session = _get(session_id)
        if session is None:
            return _error(404, "unknown_session", f"no session {session_id!r}")
        with session.lock:
            return _snapshot(session)

    @app.post("/sessions/{session_id}/events")
    def post_event(session_id: str, body: dict = Body(...)) -> Any:
        session = _get(session_id)
        if session is None:
            return _error(404, "unknown_session", f"no session {session_id!r}")
        with session.lock:
            if session.state.completed:
                return _error(409, "session_completed",
                              "session already completed; export its timeline instead")
            try:
                leading, auxiliary = _event_frames(session, body)
                result = step(session.state, leading, auxiliary)
            except (InputError, GeometryError) as exc:
                return _error(400, "invalid_input", str(exc))
            for message in result.messages:
                session.push("message", {"message": message.to_dict()})
            if result.transition is not None:
                session.push("transition", {"transition": result.transition.to_dict()})
            snapshot = _snapshot(session)
            session.push("state", {"state": snapshot})
            return {"messages": [m.to_dict() for m in result.messages],
                    "transition": (result.transition.to_dict()
                                   if result.transition else None),
                    "snapshot": snapshot}

    @app.get("/sessions/{session_id}/stream")
    def stream(session_id: str, after: int = -1) -> Any:
        session = _get(session_id)
        if session is None:
            return _error(404, "unknown_session", f"no session {session_id!r}")

        def events() -> Iterator[str]:
            cursor = after + 1
            while True:
                with session.lock:
                    while cursor >= len(session.pushed) and not session.state.completed:
                        if not session.cond.wait(timeout=STREAM_KEEPALIVE_S):
                            break
                    batch = session.pushed[cursor:]
                    cursor += len(batch)
                    # A completed session can never push again: close after draining.
                    done = session.state.completed and cursor >= len(session.pushed)
                for event in batch:
                    yield f"id: {event['seq']}\ndata: {json.dumps(event)}\n\n"
                if done:
                    return
                if not batch:
                    # Keepalive comment; also where a disconnect surfaces.
                    yield ": keepalive\n\n"

        return StreamingResponse(events(), media_type="text/event-stream")

    @app.get("/sessions/{session_id}/timeline")
    def export_timeline(session_id: str) -> Any:
        session = _get(session_id)
        if session is None:
            return _error(404, "unknown_session", f"no session {session_id!r}")
        with session.lock:
            if not session.state.completed:
                return _error(409, "incomplete_session",
                              "timeline export requires a completed session")
            timeline = predicted_timeline(session.state, run_id=session.session_id,
                                          cohort="live")
        buffer = io.StringIO()
        _write_csv_to_buffer(timeline, buffer)
        return PlainTextResponse(buffer.getvalue(), media_type="text/csv")

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def _write_csv_to_buffer(timeline, buffer: io.StringIO) -> None:
    import csv as _csv

    from .evaluate import TIMELINE_CSV_HEADER, timeline_csv_rows

    writer = _csv.writer(buffer, lineterminator="\n")
    writer.writerow(TIMELINE_CSV_HEADER)
    writer.writerows(timeline_csv_rows(timeline))
