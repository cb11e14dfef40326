"""HTTP session service over a trained forest.

Sessions live in memory, keyed by an opaque id, and expire after an idle
timeout. Every mutation happens under a per-session lock, so concurrent
clients of the same session see a consistent turn order.

Endpoints:
    POST /sessions {seed?}                -> {"session_id": ...}
    GET  /sessions/{id}/next              -> question or recommendation payload
    POST /sessions/{id}/answer {value}    -> {"ok": true, "turn": ...}
    POST /sessions/{id}/feedback {value, item_id?} -> {"ok": true, "status", "turn"}
    GET  /sessions/{id}/state             -> full session view
    GET  /model/info                      -> model card

Errors: 404 unknown session, 409 out-of-order operation or finished session,
410 expired session.
"""

from __future__ import annotations

import json
import logging
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import session as policy
from .forest import InteractionForest

log = logging.getLogger(__name__)


class CreateSessionBody(BaseModel):
    seed: int | None = None


class AnswerBody(BaseModel):
    value: str


class FeedbackBody(BaseModel):
    value: str
    item_id: int | None = None


@dataclass
class _Entry:
    state: policy.SessionState
    deadline: float
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionRegistry:
    """In-memory session store with idle expiry."""

    def __init__(self, forest: InteractionForest, idle_timeout: float,
                 clock=time.monotonic, log_path: str = ""):
        self.forest = forest
        self.idle_timeout = idle_timeout
        self.clock = clock
        self.log_path = Path(log_path) if log_path else None
        self._entries: dict[str, _Entry] = {}
        self._lock = threading.Lock()
        self._counter = 0

    def create(self, seed: int | None) -> tuple[str, policy.SessionState]:
        with self._lock:
            self._counter += 1
            if seed is None:
                seed = int.from_bytes(uuid.uuid4().bytes[:4], "big")
            session_id = uuid.uuid4().hex
            state = policy.start_session(self.forest, seed)
            self._entries[session_id] = _Entry(state, self.clock() + self.idle_timeout)
        self._log(session_id, {"event": "created", "seed": seed})
        return session_id, state

    def get(self, session_id: str) -> _Entry:
        with self._lock:
            entry = self._entries.get(session_id)
            if entry is None:
                raise HTTPException(status_code=404, detail="unknown session")
            if self.clock() > entry.deadline:
                del self._entries[session_id]
                raise HTTPException(status_code=410, detail="session expired")
            entry.deadline = self.clock() + self.idle_timeout
            return entry

    def _log(self, session_id: str, payload: dict):
        if self.log_path is None:
            return
        with self._lock:
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({"session": session_id, **payload}) + "\n")


def _action_payload(state: policy.SessionState, forest: InteractionForest) -> dict:
    action = policy.current_action(state)
    if action is None:
        raise HTTPException(status_code=409,
                            detail=f"session is {state.status}: no items remain")
    if isinstance(action, policy.Ask):
        return {
            "type": "question",
            "attribute_id": action.attribute,
            "label": forest.vocabulary.label(action.attribute),
        }
    s_t = policy.fused_embedding(state)
    return {
        "type": "recommendation",
        "items": [
            {"item_id": item, "rank": rank + 1,
             "score": policy.score_item(s_t, forest.items, item)}
            for rank, item in enumerate(action.items)
        ],
        "turn": state.turn,
    }


def create_app(forest: InteractionForest, *, idle_timeout: float | None = None,
               clock=time.monotonic, session_log: str = "") -> FastAPI:
    config = forest.config
    timeout = idle_timeout if idle_timeout is not None else config.session_idle_timeout
    registry = SessionRegistry(forest, timeout, clock=clock,
                               log_path=session_log or config.session_log_path)
    app = FastAPI(title="factcrs session service")
    # browser clients live on another origin (or file://); no credentials
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    app.state.registry = registry

    @app.post("/sessions")
    def create_session(body: CreateSessionBody | None = None):
        seed = body.seed if body is not None else None
        session_id, _ = registry.create(seed)
        return {"session_id": session_id}

    @app.get("/sessions/{session_id}/next")
    def next_action(session_id: str):
        entry = registry.get(session_id)
        with entry.lock:
            if policy.is_terminal(entry.state):
                raise HTTPException(status_code=409,
                                    detail=f"session is {entry.state.status}")
            return _action_payload(entry.state, forest)

    @app.post("/sessions/{session_id}/answer")
    def answer(session_id: str, body: AnswerBody):
        if body.value not in ("yes", "no"):
            raise HTTPException(status_code=422, detail="value must be 'yes' or 'no'")
        entry = registry.get(session_id)
        with entry.lock:
            state = entry.state
            if policy.is_terminal(state):
                raise HTTPException(status_code=409,
                                    detail=f"session is {state.status}")
            if not isinstance(state.pending, policy.Ask):
                raise HTTPException(status_code=409, detail="no question is pending")
            policy.apply_answer(state, body.value == "yes")
        registry._log(session_id, {"event": "answer", "value": body.value,
                                   "turn": state.turn})
        return {"ok": True, "turn": state.turn}

    @app.post("/sessions/{session_id}/feedback")
    def feedback(session_id: str, body: FeedbackBody):
        if body.value not in ("accept", "reject"):
            raise HTTPException(status_code=422,
                                detail="value must be 'accept' or 'reject'")
        entry = registry.get(session_id)
        with entry.lock:
            state = entry.state
            if policy.is_terminal(state):
                raise HTTPException(status_code=409,
                                    detail=f"session is {state.status}")
            if not isinstance(state.pending, policy.Recommend):
                raise HTTPException(status_code=409,
                                    detail="no recommendation is pending")
            if body.value == "accept":
                if body.item_id is not None and body.item_id not in state.pending.items:
                    raise HTTPException(
                        status_code=409,
                        detail="accepted item is not on the recommended list")
                policy.apply_acceptance(state)
            else:
                policy.apply_rejection(state)
        registry._log(session_id, {"event": "feedback", "value": body.value,
                                   "status": state.status, "turn": state.turn})
        return {"ok": True, "status": state.status, "turn": state.turn}

    @app.get("/sessions/{session_id}/state")
    def state_view(session_id: str):
        entry = registry.get(session_id)
        with entry.lock:
            state = entry.state
            pending = None
            if isinstance(state.pending, policy.Ask):
                pending = "question"
            elif isinstance(state.pending, policy.Recommend):
                pending = "recommendation"
            return {
                "session_id": session_id,
                "turn": state.turn,
                "status": state.status,
                "turns_used": state.turns_used,
                "answers": {str(a): v for a, v in sorted(state.answers.items())},
                "excluded_count": len(state.excluded),
                "visited_trees": sorted(state.visited),
                "tree_index": state.tree_index,
                "pending": pending,
            }

    @app.get("/model/info")
    def model_info():
        return {
            "n_items": forest.n_items,
            "n_attributes": forest.n_attributes,
            "n_trees": forest.n_trees,
            "d": forest.dim,
            "K": config.top_k,
            "T": config.max_turns,
        }

    return app
