"""FastAPI application: scenario sessions, live steering, metric streams."""

from __future__ import annotations

import json
import os
import time
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import PlainTextResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from ..advisor import (
    CaseBase,
    EmptyCaseBaseError,
    DimensionMismatchError,
    load_case_base,
    recommend,
    retain,
)
from ..bam import InvalidConfigError, SwitchPolicy
from ..domain import SimError, bc_vector, link_id
from ..engine import trace_to_jsonl
from .schemas import (
    BcRetuneIn,
    ModelSwitchIn,
    RecommendIn,
    RecommendOut,
    RetainIn,
    ScenarioIn,
)
from .sessions import SessionError, SessionManager


def create_app(manager: SessionManager | None = None,
               case_base: CaseBase | None = None,
               ui_dir: str | os.PathLike | None = None) -> FastAPI:
    app = FastAPI(title="dstesim control plane", version="1")
    app.state.sessions = manager or SessionManager()
    app.state.case_base = case_base or CaseBase(dimension=7)

    @app.exception_handler(SessionError)
    async def _session_error(request: Request, exc: SessionError):
        raise HTTPException(exc.status_code, str(exc))

    def _get(session_id: str):
        return app.state.sessions.get(session_id)

    @app.post("/sessions", status_code=201)
    def create_session(scenario: ScenarioIn):
        try:
            session = app.state.sessions.create(scenario.to_scenario())
        except (SimError, ValueError) as exc:
            raise HTTPException(400, str(exc))
        return session.state()

    @app.get("/sessions")
    def list_sessions():
        return app.state.sessions.all_states()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return _get(session_id).state()

    @app.post("/sessions/{session_id}/start")
    def start_session(session_id: str, paused: bool = Query(default=False)):
        return _get(session_id).start(paused)

    @app.post("/sessions/{session_id}/pause")
    def pause_session(session_id: str):
        return _get(session_id).pause()

    @app.post("/sessions/{session_id}/resume")
    def resume_session(session_id: str):
        return _get(session_id).resume()

    @app.post("/sessions/{session_id}/step")
    def step_session(session_id: str, events: int = Query(default=1, ge=1)):
        return _get(session_id).step(events)

    @app.post("/sessions/{session_id}/model")
    def switch_model(session_id: str, body: ModelSwitchIn):
        session = _get(session_id)
        scenario = session.scenario
        try:
            cfg = body.bam.resolve(scenario.class_count)
            bc = None if body.bc is None else bc_vector(body.bc)
            return session.model_switch(cfg, bc, SwitchPolicy(body.policy), body.at_time)
        except (InvalidConfigError, SimError) as exc:
            if isinstance(exc, SessionError):
                raise
            raise HTTPException(400, str(exc))

    @app.post("/sessions/{session_id}/bc")
    def retune_bc(session_id: str, body: BcRetuneIn):
        session = _get(session_id)
        links = None
        if body.link is not None:
            links = (link_id(body.link.src, body.link.dst),
                     link_id(body.link.dst, body.link.src))
        try:
            bc = bc_vector(body.bc)
            return session.model_switch(session.sim.cfg, bc, SwitchPolicy.GRANDFATHER,
                                        body.at_time, links)
        except (InvalidConfigError, SimError) as exc:
            if isinstance(exc, SessionError):
                raise
            raise HTTPException(400, str(exc))

    @app.get("/sessions/{session_id}/metrics")
    def metrics(session_id: str, since: int = Query(default=0, ge=0)):
        session = _get(session_id)
        samples = session.samples_since(since)
        return {"cursor": since + len(samples), "samples": samples}

    @app.get("/sessions/{session_id}/stream")
    def stream(session_id: str, since: int = Query(default=0, ge=0)):
        session = _get(session_id)

        def gen():
            cursor = since
            idle_rounds = 0
            while True:
                batch = session.wait_for_samples(cursor, timeout=0.25)
                if batch:
                    idle_rounds = 0
                    for sample in batch:
                        yield f"data: {json.dumps(sample, sort_keys=True)}\n\n"
                    cursor = batch[-1]["cursor"] + 1
                else:
                    idle_rounds += 1
                    state = session.state()
                    if state["status"] == "DONE":
                        yield "event: end\ndata: {}\n\n"
                        return
                    if idle_rounds % 20 == 0:
                        yield ": keepalive\n\n"

        return StreamingResponse(gen(), media_type="text/event-stream")

    @app.get("/sessions/{session_id}/report")
    def report(session_id: str):
        session = _get(session_id)
        return {"runs": session.report_dicts(), "state": session.state()}

    @app.get("/sessions/{session_id}/trace", response_class=PlainTextResponse)
    def trace(session_id: str, run: int | None = Query(default=None)):
        session = _get(session_id)
        try:
            return trace_to_jsonl(session.trace(run))
        except IndexError:
            raise HTTPException(404, f"no run {run}")

    @app.get("/sessions/{session_id}/export.csv", response_class=PlainTextResponse)
    def export_csv(session_id: str):
        return _get(session_id).sim.stats.export_csv()

    @app.post("/advisor/recommend", response_model=RecommendOut)
    def advisor_recommend(body: RecommendIn):
        try:
            rec = recommend(app.state.case_base, tuple(body.features))
        except (EmptyCaseBaseError, DimensionMismatchError) as exc:
            raise HTTPException(400, str(exc))
        return RecommendOut.from_recommendation(rec)

    @app.post("/advisor/retain", status_code=201)
    def advisor_retain(body: RetainIn):
        try:
            retain(app.state.case_base, body.resolve())
        except DimensionMismatchError as exc:
            raise HTTPException(400, str(exc))
        return {"cases": len(app.state.case_base.cases)}

    @app.get("/healthz")
    def healthz():
        return {"ok": True}

    ui = Path(ui_dir) if ui_dir else None
    if ui and ui.is_dir():
        app.mount("/", StaticFiles(directory=ui, html=True), name="ui")
    return app


def load_default_case_base() -> CaseBase:
    path = os.environ.get("DSTESIM_CASE_BASE")
    if path and Path(path).exists():
        return load_case_base(path)
    return CaseBase(dimension=7)
