"""HTTP API over sessions, routing, and automaton inspection."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .automaton import Automaton
from .corpus import Corpus
from .persistence import encode_automaton, export_dot
from .routing import Generator, Session, chat_step
from .tagging import Tagger

DEFAULT_SESSION_TTL_SECONDS = 30 * 60


@dataclass
class SessionRecord:
    session: Session
    created_at: float
    deadline: float
    lock: threading.Lock = field(default_factory=threading.Lock)


class UtteranceBody(BaseModel):
    text: str


def create_app(
    automaton: Automaton | None,
    corpus: Corpus | None,
    tagger: Tagger | None,
    generator: Generator | None,
    seed: int = 0,
    exemplar_k: int = 5,
    deterministic: bool = False,
    session_ttl: float = DEFAULT_SESSION_TTL_SECONDS,
    cors_origins: list[str] | None = None,
    ui_dir: str | None = None,
) -> FastAPI:
    app = FastAPI(title="dfarag")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=cors_origins or ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    sessions: dict[str, SessionRecord] = {}
    registry_lock = threading.Lock()

    def require_loaded() -> None:
        if automaton is None or corpus is None:
            raise HTTPException(status_code=503, detail="no automaton loaded")

    def get_record(session_id: str) -> SessionRecord:
        with registry_lock:
            record = sessions.get(session_id)
            if record is not None and time.monotonic() > record.deadline:
                del sessions[session_id]
                record = None
        if record is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return record

    @app.get("/v1/healthz")
    def healthz() -> Response:
        return Response(content="ok", media_type="text/plain")

    @app.post("/v1/sessions", status_code=201)
    def create_session() -> dict:
        require_loaded()
        session = Session(
            automaton=automaton,
            corpus=corpus,
            seed=seed,
            exemplar_k=exemplar_k,
            deterministic=deterministic,
        )
        now = time.monotonic()
        with registry_lock:
            sessions[session.id] = SessionRecord(
                session=session, created_at=now, deadline=now + session_ttl
            )
        return {"session_id": session.id}

    @app.delete("/v1/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str) -> Response:
        get_record(session_id)
        with registry_lock:
            sessions.pop(session_id, None)
        return Response(status_code=204)

    @app.get("/v1/sessions/{session_id}")
    def session_state(session_id: str) -> dict:
        record = get_record(session_id)
        session = record.session
        return {
            "session_id": session.id,
            "current": session.current,
            "last_valid": session.last_valid,
            "turns": len(session.history),
        }

    @app.post("/v1/sessions/{session_id}/utterances")
    def post_utterance(session_id: str, body: UtteranceBody) -> dict:
        require_loaded()
        record = get_record(session_id)
        if not record.lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="a step is already in flight")
        try:
            try:
                response, nav, exemplars = chat_step(
                    record.session, body.text, tagger, generator
                )
            except HTTPException:
                raise
            except Exception as exc:
                raise HTTPException(status_code=502, detail=f"routing failed: {exc}") from exc
            record.deadline = time.monotonic() + session_ttl
            last_user = record.session.history[-2]
            return {
                "tags": list(last_user[2]),
                "path": list(nav.path),
                "state": nav.state,
                "matched": nav.matched,
                "exemplar_ids": list(exemplars.dialogue_ids),
                "response": response,
            }
        finally:
            record.lock.release()

    @app.get("/v1/automaton")
    def automaton_document() -> Response:
        require_loaded()
        return Response(content=encode_automaton(automaton), media_type="application/json")

    @app.get("/v1/automaton/dot")
    def automaton_dot() -> Response:
        require_loaded()
        return Response(content=export_dot(automaton), media_type="text/vnd.graphviz")

    @app.get("/v1/states/{state_id}")
    def state_view(state_id: int) -> dict:
        require_loaded()
        state = automaton.states.get(state_id)
        if state is None:
            raise HTTPException(status_code=404, detail="unknown state")
        return {
            "id": state.id,
            "round": state.round,
            "role": state.role,
            "accept": state.accept,
            "dialogue_ids": sorted(state.dialogue_ids),
            "transitions": [[tag, target] for tag, target in state.transitions.items()],
        }

    @app.get("/v1/dialogues/{dialogue_id}")
    def dialogue_view(dialogue_id: int) -> dict:
        require_loaded()
        try:
            dialogue = corpus.get(dialogue_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown dialogue") from None
        return {
            "id": dialogue.id,
            "turns": [
                {"role": u.role.value, "text": u.text, "round": u.round}
                for u in dialogue.utterances
            ],
        }

    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
