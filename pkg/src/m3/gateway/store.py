"""Per-session JSONL journals with rename-on-commit durability.

One file per session under the store directory: a meta line, then one
line per turn, then one line per trigger-log entry. Commits rewrite to a
temp file and atomically replace, so a crash never leaves a torn journal.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from ..engine import (
    ConversationSession,
    trigger_log_entry_from_dict,
    trigger_log_entry_to_dict,
    turn_from_dict,
    turn_to_dict,
)
from ..errors import SchemaError, SessionNotFoundError


@dataclass
class StoredSession:
    session: ConversationSession
    created: float
    updated: float
    images: dict[str, str] = field(default_factory=dict)  # name -> relative path


class SessionStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _journal_path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.jsonl"

    def image_dir(self, session_id: str) -> Path:
        return self.root / session_id / "images"

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.jsonl"))

    def exists(self, session_id: str) -> bool:
        return self._journal_path(session_id).exists()

    def save(self, stored: StoredSession) -> None:
        session = stored.session
        lines = [
            json.dumps(
                {
                    "type": "meta",
                    "session_id": session.session_id,
                    "registry_version": session.registry_version,
                    "expert_rounds_used": session.expert_rounds_used,
                    "created": stored.created,
                    "updated": stored.updated,
                    "images": stored.images,
                }
            )
        ]
        for turn in session.turns:
            doc = turn_to_dict(turn)
            doc["type"] = "turn"
            doc["ts"] = turn.timestamp
            lines.append(json.dumps(doc))
        for entry in session.trigger_log:
            doc = trigger_log_entry_to_dict(entry)
            doc["type"] = "trigger"
            lines.append(json.dumps(doc))

        path = self._journal_path(session.session_id)
        tmp = path.with_suffix(".jsonl.tmp")
        tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
        os.replace(tmp, path)

    def load(self, session_id: str) -> StoredSession:
        path = self._journal_path(session_id)
        if not path.exists():
            raise SessionNotFoundError(f"no stored session {session_id!r}")
        meta = None
        turns = []
        trigger_log = []
        with open(path, encoding="utf-8") as fp:
            for line in fp:
                line = line.strip()
                if not line:
                    continue
                doc = json.loads(line)
                kind = doc.get("type")
                if kind == "meta":
                    meta = doc
                elif kind == "turn":
                    turns.append(turn_from_dict(doc, timestamp=float(doc.get("ts", 0.0))))
                elif kind == "trigger":
                    trigger_log.append(trigger_log_entry_from_dict(doc))
                else:
                    raise SchemaError(f"{path}: unknown journal line type {kind!r}")
        if meta is None:
            raise SchemaError(f"{path}: journal has no meta line")
        session = ConversationSession(
            session_id=str(meta["session_id"]),
            registry_version=int(meta["registry_version"]),
            turns=turns,
            trigger_log=trigger_log,
            expert_rounds_used=int(meta["expert_rounds_used"]),
        )
        return StoredSession(
            session=session,
            created=float(meta["created"]),
            updated=float(meta["updated"]),
            images=dict(meta.get("images", {})),
        )

    def save_image(self, session_id: str, name: str, data: bytes) -> Path:
        directory = self.image_dir(session_id)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / name
        tmp = path.with_name(name + ".tmp")
        tmp.write_bytes(data)
        os.replace(tmp, path)
        return path
