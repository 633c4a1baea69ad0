"""The orchestration state machine.

``run_turn`` assembles context (system prompt + history + images), calls
the pluggable VLM backend, detects trigger tokens, dispatches experts,
injects feedback turns, and loops until a final grounded answer — at most
``max_expert_rounds`` expert cycles per user turn, then one forced answer.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import httpx

from .errors import (
    BackendError,
    FixtureExhaustedError,
    InvalidArgumentError,
    RegistryVersionMismatchError,
    UnknownKeywordError,
)
from .experts import ExpertDispatcher, ExpertRequest, ExpertResult, expert_result_from_dict, expert_result_to_dict
from .feedback import (
    EXPERT_FEEDBACK_ROLE,
    FeedbackTurn,
    compose_classification_feedback,
    compose_corrective_feedback,
    compose_segmentation_feedback,
)
from .registry import Registry, render_system_prompt, resolve_trigger
from .triggers import TriggerEvent, scan_triggers, strip_all_triggers

logger = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant", EXPERT_FEEDBACK_ROLE)


@dataclass(frozen=True)
class ContentItem:
    type: str  # "text" | "image"
    value: str


@dataclass
class Turn:
    role: str
    content: list[ContentItem]
    timestamp: float = 0.0

    def text(self) -> str:
        return "\n".join(item.value for item in self.content if item.type == "text")

    def images(self) -> list[str]:
        return [item.value for item in self.content if item.type == "image"]


def make_turn(role: str, text: str | None = None, images: tuple[str, ...] = (), timestamp: float = 0.0) -> Turn:
    if role not in ROLES:
        raise ValueError(f"unknown role {role!r}")
    content: list[ContentItem] = []
    if text is not None:
        content.append(ContentItem("text", text))
    content.extend(ContentItem("image", uri) for uri in images)
    return Turn(role=role, content=content, timestamp=timestamp)


@dataclass
class TriggerLogEntry:
    event: TriggerEvent
    status: str  # "ok" | "error"
    result: ExpertResult | None = None
    error_code: str | None = None
    error_message: str | None = None


@dataclass
class ConversationSession:
    session_id: str
    registry_version: int
    turns: list[Turn] = field(default_factory=list)
    trigger_log: list[TriggerLogEntry] = field(default_factory=list)
    expert_rounds_used: int = 0

    def last_image_refs(self) -> tuple[str, ...]:
        for turn in reversed(self.turns):
            images = turn.images()
            if images:
                return tuple(images)
        return ()


def new_session(session_id: str, registry: Registry) -> ConversationSession:
    return ConversationSession(session_id=session_id, registry_version=registry.version)


class VLMBackend(Protocol):
    def generate(self, turns: list[Turn]) -> str: ...


class ScriptedVLM:
    """Replays a fixed list of replies, one per generate() call."""

    def __init__(self, replies: list[str]):
        self._replies = list(replies)
        self._cursor = 0
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedVLM":
        with open(path, encoding="utf-8") as fp:
            replies = json.load(fp)
        if not isinstance(replies, list) or not all(isinstance(r, str) for r in replies):
            raise ValueError(f"{path}: scripted fixture must be a JSON list of strings")
        return cls(replies)

    def generate(self, turns: list[Turn]) -> str:
        del turns
        with self._lock:
            if self._cursor >= len(self._replies):
                raise FixtureExhaustedError(
                    f"scripted fixture exhausted after {len(self._replies)} replies"
                )
            reply = self._replies[self._cursor]
            self._cursor += 1
            return reply


class RemoteVLM:
    """HTTP client for a remote VLM speaking POST /generate.

    Expert-feedback turns go over the wire as user turns.
    """

    def __init__(self, base_url: str, timeout_ms: int = 60000, client: httpx.Client | None = None):
        self.base_url = base_url.rstrip("/")
        self._client = client or httpx.Client(timeout=timeout_ms / 1000.0)

    def generate(self, turns: list[Turn]) -> str:
        wire = [
            {
                "role": "user" if t.role == EXPERT_FEEDBACK_ROLE else t.role,
                "content": [{"type": c.type, "value": c.value} for c in t.content],
            }
            for t in turns
        ]
        try:
            resp = self._client.post(f"{self.base_url}/generate", json={"turns": wire})
        except httpx.TransportError as exc:
            raise BackendError(f"VLM backend unreachable: {exc}", retryable=True) from exc
        if resp.status_code != 200:
            raise BackendError(f"VLM backend returned {resp.status_code}")
        try:
            return str(resp.json()["text"])
        except (ValueError, KeyError) as exc:
            raise BackendError(f"VLM backend returned a malformed body: {exc}") from exc


def run_turn(
    session: ConversationSession,
    user_turn: Turn,
    vlm: VLMBackend,
    registry: Registry,
    experts: ExpertDispatcher,
    *,
    max_expert_rounds: int = 2,
    classification_threshold: float = 0.5,
    templates: dict[str, str] | None = None,
    clock: Callable[[], float] = time.time,
) -> str:
    """Execute one user turn; mutates the session, returns the final
    assistant text with any trigger tokens stripped."""
    if user_turn.role != "user":
        raise ValueError(f"run_turn expects a user turn, got role {user_turn.role!r}")
    if session.registry_version != registry.version:
        raise RegistryVersionMismatchError(
            f"session {session.session_id} pinned to registry v{session.registry_version}, "
            f"current is v{registry.version}"
        )
    if not session.turns:
        session.turns.append(make_turn("system", render_system_prompt(registry), timestamp=clock()))
    elif session.turns[0].role != "system":
        raise ValueError("session history must start with the system turn")

    session.turns.append(user_turn)

    rounds = 0
    while True:
        reply = vlm.generate(session.turns)
        events = scan_triggers(reply)
        if not events or rounds >= max_expert_rounds:
            if events:
                logger.warning(
                    "session %s: expert rounds exhausted with %d unprocessed trigger(s); forcing final answer",
                    session.session_id,
                    len(events),
                )
            final = strip_all_triggers(reply)
            session.turns.append(make_turn("assistant", final, timestamp=clock()))
            return final

        event = events[0]
        if len(events) > 1:
            logger.info(
                "session %s: %d extra trigger(s) in one turn ignored (first wins)",
                session.session_id,
                len(events) - 1,
            )
        session.turns.append(make_turn("assistant", reply, timestamp=clock()))

        feedback: FeedbackTurn
        try:
            card, arg = resolve_trigger(registry, event)
            request = ExpertRequest(
                card_name=card.name,
                argument=arg,
                image_refs=session.last_image_refs(),
                session_id=session.session_id,
            )
            result = experts.dispatch(card, request)
            if result.task == "segmentation":
                feedback = compose_segmentation_feedback(result.result, arg, templates=templates)
            else:
                feedback = compose_classification_feedback(
                    result.result, threshold=classification_threshold, templates=templates
                )
            session.trigger_log.append(TriggerLogEntry(event=event, status="ok", result=result))
        except InvalidArgumentError as exc:
            feedback = compose_corrective_feedback(
                exc, keyword=exc.keyword, valid_args=exc.valid_args, templates=templates
            )
            session.trigger_log.append(
                TriggerLogEntry(event=event, status="error", error_code=exc.code, error_message=str(exc))
            )
        except (UnknownKeywordError, BackendError, ValueError) as exc:
            code = getattr(exc, "code", "invalid_request")
            feedback = compose_corrective_feedback(exc, templates=templates)
            session.trigger_log.append(
                TriggerLogEntry(event=event, status="error", error_code=code, error_message=str(exc))
            )

        overlay = (feedback.attached_overlay,) if feedback.attached_overlay else ()
        session.turns.append(
            make_turn(EXPERT_FEEDBACK_ROLE, feedback.text, images=overlay, timestamp=clock())
        )
        rounds += 1
        session.expert_rounds_used += 1


def turn_to_dict(turn: Turn) -> dict:
    return {
        "role": turn.role,
        "content": [{"type": c.type, "value": c.value} for c in turn.content],
    }


def turn_from_dict(doc: dict, timestamp: float = 0.0) -> Turn:
    content = [ContentItem(str(item["type"]), str(item["value"])) for item in doc["content"]]
    return Turn(role=str(doc["role"]), content=content, timestamp=timestamp)


def transcript_jsonl(session: ConversationSession) -> str:
    """Canonical transcript: one compact JSON object per turn.

    Timestamps are deliberately excluded so identical conversations
    serialize byte-identically.
    """
    lines = [
        json.dumps(turn_to_dict(turn), sort_keys=True, separators=(",", ":"))
        for turn in session.turns
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def trigger_log_entry_to_dict(entry: TriggerLogEntry) -> dict:
    doc: dict = {
        "event": {
            "keyword": entry.event.keyword,
            "argument": entry.event.argument,
            "span": [entry.event.start, entry.event.end],
        },
        "status": entry.status,
    }
    if entry.result is not None:
        doc["result"] = expert_result_to_dict(entry.result)
    if entry.error_code is not None:
        doc["error_code"] = entry.error_code
        doc["error_message"] = entry.error_message
    return doc


def trigger_log_entry_from_dict(doc: dict) -> TriggerLogEntry:
    ev = doc["event"]
    event = TriggerEvent(
        keyword=str(ev["keyword"]),
        argument=str(ev["argument"]),
        start=int(ev["span"][0]),
        end=int(ev["span"][1]),
    )
    result = expert_result_from_dict(doc["result"]) if "result" in doc else None
    return TriggerLogEntry(
        event=event,
        status=str(doc["status"]),
        result=result,
        error_code=doc.get("error_code"),
        error_message=doc.get("error_message"),
    )
