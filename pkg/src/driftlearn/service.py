"""HTTP face of the engine: state inspection, a server-sent event stream with
resume-from-sequence, sample submission, and the operator steering endpoints
(decisions, rollback, hyperparameters, target addition).

All mutating requests funnel through one lock, matching the engine's
single-command-queue model; event readers never block ingest because they
tail the append-only event list with their own cursors.
"""

import asyncio
import json
import threading
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .engine import Decision, Engine
from .errors import (
    ArgumentError,
    ConflictError,
    DriftlearnError,
    NotFoundError,
    ShapeError,
    ValidationError,
)
from .nets import HeadSpec
from .novelty import Sample
from .strategies import StrategySpec

SSE_POLL_SECONDS = 0.05
SSE_KEEPALIVE_SECONDS = 15.0


class IngestRequest(BaseModel):
    x: list[float] = Field(min_length=1)
    y: dict[str, float] | None = None
    timestamp: datetime | None = None


class DecisionRequest(BaseModel):
    update_id: int
    verdict: str
    note: str | None = None
    hyperparameter_edits: dict | None = None


class RollbackRequest(BaseModel):
    version: int
    note: str | None = None


class HyperparameterRequest(BaseModel):
    blocks: dict[str, dict] | None = None
    auto_policy: dict | None = None


class TargetRequest(BaseModel):
    target_id: str
    head_hidden: list[int] | None = None
    strategy: dict | None = None
    warmup_samples: list[IngestRequest] = Field(default_factory=list)


def _status_for(err: DriftlearnError) -> int:
    if isinstance(err, NotFoundError):
        return 404
    if isinstance(err, ConflictError):
        return 409
    return 400


def _sample_from(req: IngestRequest) -> Sample:
    ts = req.timestamp or datetime.now(timezone.utc)
    return Sample(ts, list(req.x), req.y)


def create_app(engine: Engine, dashboard_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="driftlearn service", version="0.1.0")
    lock = threading.Lock()
    app.state.engine = engine
    app.state.lock = lock

    @app.exception_handler(DriftlearnError)
    async def domain_error(request: Request, err: DriftlearnError):
        return JSONResponse(status_code=_status_for(err),
                            content={"error": type(err).__name__, "detail": str(err)})

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, err: RequestValidationError):
        fields = [{"field": ".".join(str(p) for p in e["loc"] if p != "body"),
                   "message": e["msg"]} for e in err.errors()]
        return JSONResponse(status_code=400,
                            content={"error": "ValidationError", "fields": fields})

    @app.get("/state")
    def get_state() -> dict:
        with lock:
            return engine.state()

    @app.get("/metrics")
    def get_metrics() -> dict:
        with lock:
            return engine.eval_report().to_dict()

    @app.post("/ingest")
    def post_ingest(req: IngestRequest) -> dict:
        with lock:
            events = engine.ingest(_sample_from(req))
        return {"accepted": True, "events": [e.seq for e in events]}

    @app.post("/decisions")
    def post_decision(req: DecisionRequest) -> dict:
        if req.verdict not in ("accept", "reject"):
            raise ValidationError(
                f"verdict must be accept or reject (rollbacks go to /rollback), "
                f"got {req.verdict!r}")
        with lock:
            events = engine.apply_decision(Decision(
                req.verdict, update_id=req.update_id, issued_by="operator",
                note=req.note, hyperparameter_edits=req.hyperparameter_edits))
            state = engine.state()
        return {"decided": req.verdict, "events": [e.seq for e in events],
                "mode": state["mode"]}

    @app.post("/rollback")
    def post_rollback(req: RollbackRequest) -> dict:
        with lock:
            events = engine.apply_decision(Decision(
                "rollback", version=req.version, issued_by="operator", note=req.note))
            version = engine.version_store[-1].number
        return {"rolled_back_to": req.version, "new_version": version,
                "events": [e.seq for e in events]}

    @app.patch("/hyperparameters")
    def patch_hyperparameters(req: HyperparameterRequest) -> dict:
        edits = {k: v for k, v in (("blocks", req.blocks),
                                   ("auto_policy", req.auto_policy)) if v}
        with lock:
            events = engine.set_hyperparameters(edits)
            changes = next(e.payload["changes"] for e in reversed(events)
                           if e.type == "hyperparameters_changed")
        return {"applied": changes}

    @app.post("/targets")
    def post_target(req: TargetRequest) -> dict:
        head_spec = HeadSpec(hidden=tuple(req.head_hidden)) if req.head_hidden else None
        strategy = StrategySpec.from_dict(req.strategy) if req.strategy else None
        warmup = [_sample_from(s) for s in req.warmup_samples]
        with lock:
            block = engine.add_target(req.target_id, head_spec=head_spec,
                                      strategy=strategy, warmup_samples=warmup)
            state = engine.state()
        return {"target": req.target_id, "block": block.id,
                "targets": state["targets"]}

    @app.get("/events")
    async def get_events(request: Request, since: int = 0, follow: bool = True):
        """Server-sent events from a client-supplied sequence number.

        `since` (or a Last-Event-ID header on reconnect) resumes after that
        sequence number; with `follow=false` the stream closes once it has
        caught up with the log instead of tailing it.
        """
        last_id = request.headers.get("last-event-id")
        cursor = max(since, int(last_id)) if last_id and last_id.isdigit() else since

        async def stream():
            nonlocal cursor
            idle = 0.0
            while True:
                if await request.is_disconnected():
                    return
                events = engine.events_since(cursor)
                if events:
                    idle = 0.0
                    for event in events:
                        cursor = event.seq
                        data = json.dumps(event.to_dict())
                        yield f"id: {event.seq}\nevent: {event.type}\ndata: {data}\n\n"
                elif not follow:
                    return
                else:
                    await asyncio.sleep(SSE_POLL_SECONDS)
                    idle += SSE_POLL_SECONDS
                    if idle >= SSE_KEEPALIVE_SECONDS:
                        idle = 0.0
                        yield ": keepalive\n\n"

        return StreamingResponse(stream(), media_type="text/event-stream",
                                 headers={"Cache-Control": "no-cache",
                                          "X-Accel-Buffering": "no"})

    if dashboard_dir and Path(dashboard_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=dashboard_dir, html=True), name="ui")

    return app


class ScenarioFeeder(threading.Thread):
    """Background replay of a scenario against a served engine."""

    def __init__(self, app: FastAPI, script, stream, pace: float = 0.0):
        super().__init__(daemon=True)
        self.app = app
        self.script = script
        self.stream = stream
        self.pace = pace
        self.error: Exception | None = None

    def run(self) -> None:
        import time

        from .streams import replay

        engine: Engine = self.app.state.engine
        lock: threading.Lock = self.app.state.lock

        class PacedEngine:
            """Engine proxy that takes the service lock per command and
            optionally paces ingestion."""

            def __init__(self, pace):
                self.pace = pace

            def __getattr__(self, name):
                attr = getattr(engine, name)
                if not callable(attr):
                    return attr

                def locked(*args, **kwargs):
                    with lock:
                        result = attr(*args, **kwargs)
                    if name == "ingest" and self.pace > 0:
                        time.sleep(1.0 / self.pace)
                    return result

                return locked

        try:
            replay(self.script, PacedEngine(self.pace), self.stream)
            with lock:
                engine.annotate("complete", {"events": len(engine.events)})
        except Exception as err:  # surfaced via /state annotations and logs
            self.error = err
            with lock:
                engine.annotate("error", {"message": str(err)})
