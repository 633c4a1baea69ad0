"""HTTP service wrapping the conversation engine.

Sessions persist to a JSONL journal store; per-session locks serialize
concurrent turn requests on the same session while different sessions
proceed independently. The process is stateless apart from that store.
"""

from __future__ import annotations

import threading
import time
import uuid
from pathlib import Path

from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .. import engine
from ..errors import BackendError, M3Error, SessionNotFoundError
from ..experts import (
    ExpertDispatcher,
    MockClassificationBackend,
    MockSegmentationBackend,
    RemoteExpertBackend,
    load_conditions,
)
from ..feedback import load_templates
from ..registry import default_registry, load_registry, registry_to_dict, render_system_prompt
from ..volumes import file_uri
from .config import GatewayConfig
from .store import SessionStore, StoredSession

IMAGE_FORMATS = {"png": "png", "jpeg": "jpg", "nii": "nii", "raw-fixture": "rawvol"}


class GatewayError(Exception):
    def __init__(self, status: int, code: str, message: str, detail: str = ""):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.detail = detail


class TurnRequest(BaseModel):
    text: str
    images: list[str] = Field(default_factory=list)


class GatewayState:
    def __init__(self, config: GatewayConfig):
        self.config = config
        if config.registry_path:
            self.registry = load_registry(config.registry_path)
        else:
            self.registry = default_registry()
        self.templates = load_templates(config.feedback_templates)
        self.store = SessionStore(config.session_store)
        self.dispatcher = self._build_dispatcher(config)
        self._session_locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self._scripted_vlms: dict[str, engine.ScriptedVLM] = {}
        self._shared_vlm: engine.VLMBackend | None = None
        if config.vlm_url:
            self._shared_vlm = engine.RemoteVLM(config.vlm_url)

    def _build_dispatcher(self, config: GatewayConfig) -> ExpertDispatcher:
        backends = {}
        max_retries = 2
        overlay_root = Path(config.session_store) / "artifacts"
        for ref, endpoint in config.experts.items():
            if endpoint.mock == "segmentation":
                out = endpoint.output_dir or str(overlay_root)
                backends[ref] = MockSegmentationBackend(out, backend_id=f"mock-{ref}")
            elif endpoint.mock == "classification":
                conditions = (
                    load_conditions(endpoint.conditions_path) if endpoint.conditions_path else None
                )
                backends[ref] = MockClassificationBackend(conditions, backend_id=f"mock-{ref}")
            else:
                backends[ref] = RemoteExpertBackend(
                    endpoint.url, timeout_ms=endpoint.timeout_ms, backend_id=f"remote-{ref}"
                )
                max_retries = max(max_retries, endpoint.max_retries)
        return ExpertDispatcher(backends, max_retries=max_retries)

    def session_lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            if session_id not in self._session_locks:
                self._session_locks[session_id] = threading.Lock()
            return self._session_locks[session_id]

    def vlm_for_session(self, session_id: str) -> engine.VLMBackend:
        if self._shared_vlm is not None:
            return self._shared_vlm
        if not self.config.vlm_scripted_fixture:
            raise GatewayError(503, "vlm_unconfigured", "no VLM backend configured")
        with self._locks_guard:
            if session_id not in self._scripted_vlms:
                self._scripted_vlms[session_id] = engine.ScriptedVLM.from_file(
                    self.config.vlm_scripted_fixture
                )
            return self._scripted_vlms[session_id]


def _error_response(status: int, code: str, message: str, detail: str = "") -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"code": code, "message": message, "detail": detail}
    )


def create_app(config: GatewayConfig) -> FastAPI:
    state = GatewayState(config)
    app = FastAPI(title="m3 gateway", version="0.1.0")
    app.state.gateway = state

    @app.exception_handler(GatewayError)
    def handle_gateway_error(request: Request, exc: GatewayError):
        return _error_response(exc.status, exc.code, exc.message, exc.detail)

    @app.exception_handler(M3Error)
    def handle_m3_error(request: Request, exc: M3Error):
        return _error_response(500, exc.code, str(exc))

    def load_stored(session_id: str) -> StoredSession:
        try:
            return state.store.load(session_id)
        except SessionNotFoundError as exc:
            raise GatewayError(404, "session_not_found", str(exc)) from exc

    @app.post("/v1/sessions", status_code=201)
    def create_session():
        session_id = uuid.uuid4().hex
        now = time.time()
        stored = StoredSession(
            session=engine.new_session(session_id, state.registry), created=now, updated=now
        )
        try:
            state.store.save(stored)
        except OSError as exc:
            raise GatewayError(503, "store_unavailable", f"cannot persist session: {exc}") from exc
        return {"session_id": session_id, "registry_version": state.registry.version}

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str):
        stored = load_stored(session_id)
        return {
            "session_id": session_id,
            "registry_version": stored.session.registry_version,
            "created": stored.created,
            "updated": stored.updated,
            "expert_rounds_used": stored.session.expert_rounds_used,
            "turns": [engine.turn_to_dict(t) for t in stored.session.turns],
            "trigger_log": [engine.trigger_log_entry_to_dict(e) for e in stored.session.trigger_log],
            "images": stored.images,
        }

    @app.post("/v1/sessions/{session_id}/images", status_code=201)
    async def upload_image(session_id: str, request: Request, format: str = Query(...)):
        if format not in IMAGE_FORMATS:
            raise GatewayError(
                415,
                "unknown_format",
                f"unsupported image format {format!r}",
                detail=f"supported: {sorted(IMAGE_FORMATS)}",
            )
        data = await request.body()
        if len(data) > state.config.max_image_bytes:
            raise GatewayError(
                413, "image_too_large", f"image exceeds {state.config.max_image_bytes} bytes"
            )
        lock = state.session_lock(session_id)
        with lock:
            stored = load_stored(session_id)
            name = f"img-{len(stored.images)}.{IMAGE_FORMATS[format]}"
            path = state.store.save_image(session_id, name, data)
            stored.images[name] = str(path.relative_to(state.store.root))
            stored.updated = time.time()
            state.store.save(stored)
        return {"image_uri": file_uri(path), "name": name}

    @app.get("/v1/sessions/{session_id}/images/{name}")
    def download_image(session_id: str, name: str):
        stored = load_stored(session_id)
        if name not in stored.images:
            raise GatewayError(404, "image_not_found", f"no image {name!r} in session")
        path = state.store.root / stored.images[name]
        return Response(content=path.read_bytes(), media_type="application/octet-stream")

    @app.post("/v1/sessions/{session_id}/turns")
    def post_turn(session_id: str, body: TurnRequest):
        lock = state.session_lock(session_id)
        with lock:
            stored = load_stored(session_id)
            session = stored.session
            turns_before = len(session.turns)
            log_before = len(session.trigger_log)
            user_turn = engine.make_turn(
                "user", body.text, images=tuple(body.images), timestamp=time.time()
            )
            vlm = state.vlm_for_session(session_id)
            try:
                final_text = engine.run_turn(
                    session,
                    user_turn,
                    vlm,
                    state.registry,
                    state.dispatcher,
                    max_expert_rounds=state.config.max_expert_rounds,
                    classification_threshold=state.config.classification_threshold,
                    templates=state.templates,
                )
            except BackendError as exc:
                raise GatewayError(502, exc.code, f"VLM backend failure: {exc}") from exc
            except M3Error as exc:
                raise GatewayError(409, exc.code, str(exc)) from exc
            stored.updated = time.time()
            state.store.save(stored)

            delta_turns = session.turns[turns_before:]
            delta_log = session.trigger_log[log_before:]
            overlays = [
                uri
                for entry in delta_log
                if entry.result is not None and entry.result.task == "segmentation"
                for uri in [entry.result.result.overlay_ref]
            ]
            return {
                "assistant_text": final_text,
                "turns_delta": [engine.turn_to_dict(t) for t in delta_turns],
                "triggers": [engine.trigger_log_entry_to_dict(e) for e in delta_log],
                "overlays": overlays,
                "expert_rounds_used": session.expert_rounds_used,
            }

    @app.get("/v1/models")
    def get_models():
        return {
            "system_prompt": render_system_prompt(state.registry),
            "registry": registry_to_dict(state.registry),
            "version": state.registry.version,
        }

    if config.ui_dir:
        app.mount("/", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    return app
