"""Loopback-server integration tests for the remote HTTP clients."""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import httpx
import pytest

from m3.engine import RemoteVLM, make_turn
from m3.errors import BackendError, MalformedPayloadError
from m3.experts import ExpertRequest, RemoteExpertBackend
from m3.registry import default_registry


class _FixtureHandler(BaseHTTPRequestHandler):
    responses: dict[str, dict] = {}
    requests: list[dict] = []

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length) or b"{}")
        type(self).requests.append({"path": self.path, "body": body})
        payload = self.responses.get(self.path)
        if payload is None:
            self.send_response(404)
            self.end_headers()
            return
        data = json.dumps(payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture()
def fixture_server():
    handler = type("Handler", (_FixtureHandler,), {"responses": {}, "requests": []})
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_port}", handler
    finally:
        server.shutdown()
        thread.join(timeout=2)


def test_remote_vlm_echoes_server_text(fixture_server):
    base_url, handler = fixture_server
    handler.responses["/generate"] = {"text": "verbatim server reply"}
    vlm = RemoteVLM(base_url, timeout_ms=5000)
    turns = [make_turn("system", "sys"), make_turn("user", "hello")]
    assert vlm.generate(turns) == "verbatim server reply"
    sent = handler.requests[0]["body"]["turns"]
    assert sent[0]["role"] == "system"
    assert sent[1]["content"][0]["value"] == "hello"


def test_remote_expert_round_trip(fixture_server):
    base_url, handler = fixture_server
    handler.responses["/infer"] = {
        "task": "classification",
        "probabilities": [["Atelectasis", 0.8], ["Cardiomegaly", 0.3]],
        "backend_id": "server",
    }
    backend = RemoteExpertBackend(base_url, timeout_ms=5000)
    card = default_registry().by_keyword("CXR")
    request = ExpertRequest(card_name="CXR", argument="", image_refs=("file:///x.png",), session_id="s1")
    result = backend.infer(card, request)
    assert result.task == "classification"
    assert dict(result.result.probabilities) == {"Atelectasis": 0.8, "Cardiomegaly": 0.3}
    # The wire body carries model, arg, images, session_id.
    body = handler.requests[0]["body"]
    assert body == {"model": "CXR", "arg": "", "images": ["file:///x.png"], "session_id": "s1"}


def test_remote_expert_malformed_payload(fixture_server):
    base_url, handler = fixture_server
    handler.responses["/infer"] = {"task": "classification"}  # missing probabilities
    backend = RemoteExpertBackend(base_url, timeout_ms=5000)
    card = default_registry().by_keyword("CXR")
    request = ExpertRequest(card_name="CXR", argument="", image_refs=("file:///x.png",), session_id="s")
    with pytest.raises(MalformedPayloadError):
        backend.infer(card, request)


def test_remote_expert_unreachable_is_retryable_error():
    backend = RemoteExpertBackend("http://127.0.0.1:1", timeout_ms=300)
    card = default_registry().by_keyword("CXR")
    request = ExpertRequest(card_name="CXR", argument="", image_refs=("file:///x.png",), session_id="s")
    with pytest.raises(BackendError) as exc_info:
        backend.infer(card, request)
    assert exc_info.value.retryable


def test_remote_expert_5xx_retryable_4xx_not():
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(503)

    client = httpx.Client(transport=httpx.MockTransport(handler))
    backend = RemoteExpertBackend("http://x", client=client)
    card = default_registry().by_keyword("CXR")
    request = ExpertRequest(card_name="CXR", argument="", image_refs=("file:///x.png",), session_id="s")
    with pytest.raises(BackendError) as exc_info:
        backend.infer(card, request)
    assert exc_info.value.retryable

    client_400 = httpx.Client(transport=httpx.MockTransport(lambda r: httpx.Response(400)))
    backend_400 = RemoteExpertBackend("http://x", client=client_400)
    with pytest.raises(BackendError) as exc_info:
        backend_400.infer(card, request)
    assert not exc_info.value.retryable
