"""Gateway configuration: JSON file plus M3_CONFIG / M3_LISTEN env vars."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import SchemaError

DEFAULT_LISTEN = "127.0.0.1:8585"
DEFAULT_MAX_IMAGE_BYTES = 32 * 1024 * 1024

ENV_CONFIG = "M3_CONFIG"
ENV_LISTEN = "M3_LISTEN"


@dataclass
class ExpertEndpoint:
    """One entry of the expert endpoint map.

    Either a mock kind ("segmentation" | "classification") or a remote
    base URL.
    """

    mock: str | None = None
    url: str | None = None
    timeout_ms: int = 30000
    max_retries: int = 2
    conditions_path: str | None = None
    output_dir: str | None = None

    def __post_init__(self):
        if (self.mock is None) == (self.url is None):
            raise SchemaError("expert endpoint needs exactly one of 'mock' or 'url'")
        if self.mock is not None and self.mock not in ("segmentation", "classification"):
            raise SchemaError(f"unknown mock expert kind {self.mock!r}")


@dataclass
class GatewayConfig:
    listen: str = DEFAULT_LISTEN
    registry_path: str | None = None  # None -> packaged default registry
    vlm_url: str | None = None
    vlm_scripted_fixture: str | None = None
    experts: dict[str, ExpertEndpoint] = field(default_factory=dict)
    max_expert_rounds: int = 2
    classification_threshold: float = 0.5
    session_store: str = "./m3-sessions"
    feedback_templates: str | None = None
    max_image_bytes: int = DEFAULT_MAX_IMAGE_BYTES
    ui_dir: str | None = None

    def __post_init__(self):
        if not 0.0 < self.classification_threshold < 1.0:
            raise SchemaError(
                f"classification_threshold must be in (0, 1), got {self.classification_threshold}"
            )
        if self.max_expert_rounds < 1:
            raise SchemaError(f"max_expert_rounds must be >= 1, got {self.max_expert_rounds}")
        if self.vlm_url is not None and self.vlm_scripted_fixture is not None:
            raise SchemaError("configure either a VLM url or a scripted fixture, not both")


def load_config(path: str | Path | None = None) -> GatewayConfig:
    """Load a config file; falls back to $M3_CONFIG, then pure defaults.

    $M3_LISTEN overrides the listen address either way.
    """
    if path is None:
        path = os.environ.get(ENV_CONFIG)
    doc: dict = {}
    if path is not None:
        with open(path, encoding="utf-8") as fp:
            doc = json.load(fp)
        if not isinstance(doc, dict):
            raise SchemaError(f"{path}: gateway config must be a JSON object")

    vlm = doc.get("vlm", {})
    experts = {}
    for ref, entry in doc.get("experts", {}).items():
        experts[ref] = ExpertEndpoint(
            mock=entry.get("mock"),
            url=entry.get("url"),
            timeout_ms=int(entry.get("timeout_ms", 30000)),
            max_retries=int(entry.get("max_retries", 2)),
            conditions_path=entry.get("conditions"),
            output_dir=entry.get("output_dir"),
        )

    config = GatewayConfig(
        listen=os.environ.get(ENV_LISTEN) or doc.get("listen", DEFAULT_LISTEN),
        registry_path=doc.get("registry"),
        vlm_url=vlm.get("url"),
        vlm_scripted_fixture=vlm.get("scripted_fixture"),
        experts=experts,
        max_expert_rounds=int(doc.get("max_expert_rounds", 2)),
        classification_threshold=float(doc.get("classification_threshold", 0.5)),
        session_store=doc.get("session_store", "./m3-sessions"),
        feedback_templates=doc.get("feedback_templates"),
        max_image_bytes=int(doc.get("max_image_bytes", DEFAULT_MAX_IMAGE_BYTES)),
        ui_dir=doc.get("ui_dir"),
    )
    return config
