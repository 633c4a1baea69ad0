"""Expert model backends: a uniform client protocol, deterministic mocks,
and a remote HTTP client.

Mock backends are sidecar-driven: an image fixture at ``file://.../x.rawvol``
has a companion ``x.rawvol.truth.json`` carrying either the label map of a
segmentation fixture or the member probability vectors of a classification
fixture. This keeps the full trigger/dispatch/feedback protocol exercisable
without any model weights.
"""

from __future__ import annotations

import json
import math
import re
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Protocol, Union

import httpx
import numpy as np

from .errors import BackendError, MalformedPayloadError, SchemaError, StructureNotFoundError
from .registry import ModelCard
from .volumes import file_uri, load_volume, render_overlay, select_slice, uri_to_path, write_rawvol

SIDECAR_SUFFIX = ".truth.json"


def default_conditions() -> list[str]:
    """The 18-condition ensemble schema shipped with the package."""
    text = resources.files("m3.defaults").joinpath("conditions.json").read_text("utf-8")
    return list(json.loads(text)["conditions"])


def load_conditions(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as fp:
        doc = json.load(fp)
    conditions = doc["conditions"] if isinstance(doc, dict) else doc
    if not isinstance(conditions, list) or not all(isinstance(c, str) for c in conditions):
        raise SchemaError(f"{path}: condition schema must be a list of strings")
    return list(conditions)


@dataclass(frozen=True)
class ExpertRequest:
    card_name: str
    argument: str
    image_refs: tuple[str, ...]
    session_id: str

    def __post_init__(self):
        if not self.image_refs:
            raise ValueError("expert requests need at least one image reference")


@dataclass(frozen=True)
class SegmentationResult:
    """Classes found in a label volume plus produced mask/overlay URIs."""

    classes_found: tuple[tuple[str, int], ...]
    mask_ref: str
    overlay_ref: str
    selected_slice: int | None = None

    def __post_init__(self):
        labels = [name for name, _ in self.classes_found]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate labels in classes_found: {labels}")
        for name, count in self.classes_found:
            if count <= 0:
                raise ValueError(f"class {name!r} listed with non-positive voxel count {count}")


@dataclass(frozen=True)
class ClassificationResult:
    """Per-condition ensemble probabilities, in schema order."""

    probabilities: tuple[tuple[str, float], ...]
    per_model: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        for name, p in self.probabilities:
            if not 0.0 <= p <= 1.0 or math.isnan(p):
                raise ValueError(f"probability for {name!r} out of [0, 1]: {p}")

    def conditions(self) -> list[str]:
        return [name for name, _ in self.probabilities]


@dataclass(frozen=True)
class ExpertResult:
    result: Union[SegmentationResult, ClassificationResult]
    latency_ms: float
    backend_id: str

    @property
    def task(self) -> str:
        return "segmentation" if isinstance(self.result, SegmentationResult) else "classification"


def expert_result_to_dict(res: ExpertResult) -> dict:
    body: dict = {"task": res.task, "latency_ms": res.latency_ms, "backend_id": res.backend_id}
    if isinstance(res.result, SegmentationResult):
        body["classes_found"] = [[n, c] for n, c in res.result.classes_found]
        body["mask_ref"] = res.result.mask_ref
        body["overlay_ref"] = res.result.overlay_ref
        body["selected_slice"] = res.result.selected_slice
    else:
        body["probabilities"] = [[n, p] for n, p in res.result.probabilities]
        if res.result.per_model is not None:
            body["per_model"] = [list(v) for v in res.result.per_model]
    return body


def expert_result_from_dict(body: dict) -> ExpertResult:
    try:
        task = body["task"]
        if task == "segmentation":
            result: SegmentationResult | ClassificationResult = SegmentationResult(
                classes_found=tuple((str(n), int(c)) for n, c in body["classes_found"]),
                mask_ref=str(body["mask_ref"]),
                overlay_ref=str(body["overlay_ref"]),
                selected_slice=None if body.get("selected_slice") is None else int(body["selected_slice"]),
            )
        elif task == "classification":
            per_model = body.get("per_model")
            result = ClassificationResult(
                probabilities=tuple((str(n), float(p)) for n, p in body["probabilities"]),
                per_model=None if per_model is None else tuple(tuple(float(x) for x in v) for v in per_model),
            )
        else:
            raise MalformedPayloadError(f"unknown expert task {task!r}")
        return ExpertResult(
            result=result,
            latency_ms=float(body.get("latency_ms", 0.0)),
            backend_id=str(body.get("backend_id", "remote")),
        )
    except MalformedPayloadError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedPayloadError(f"bad expert result payload: {exc}") from exc


def ensemble_combine(member_probs: list[list[float]] | list[tuple[float, ...]]) -> list[float]:
    """Elementwise arithmetic mean of equally long probability vectors.

    math.fsum keeps the mean exactly permutation-invariant.
    """
    if not member_probs:
        raise ValueError("ensemble_combine needs at least one member vector")
    width = len(member_probs[0])
    for i, vec in enumerate(member_probs):
        if len(vec) != width:
            raise ValueError(f"ragged member vectors: member {i} has {len(vec)} entries, expected {width}")
        for p in vec:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"member {i} probability out of [0, 1]: {p}")
    n = len(member_probs)
    return [math.fsum(vec[j] for vec in member_probs) / n for j in range(width)]


class ExpertBackend(Protocol):
    backend_id: str

    def infer(self, card: ModelCard, request: ExpertRequest) -> ExpertResult: ...


def _read_sidecar(image_ref: str) -> dict:
    path = uri_to_path(image_ref)
    sidecar = path.with_name(path.name + SIDECAR_SUFFIX)
    if not sidecar.exists():
        raise BackendError(f"no sidecar fixture at {sidecar}", retryable=False)
    with open(sidecar, encoding="utf-8") as fp:
        return json.load(fp)


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_-]+", "-", text).strip("-") or "arg"


class MockSegmentationBackend:
    """Deterministic segmentation expert that reads the fixture's own label
    volume as its "prediction"."""

    def __init__(self, output_dir: str | Path, backend_id: str = "mock-seg"):
        self.output_dir = Path(output_dir)
        self.backend_id = backend_id

    def infer(self, card: ModelCard, request: ExpertRequest) -> ExpertResult:
        sidecar = _read_sidecar(request.image_refs[0])
        if sidecar.get("task") != "segmentation":
            raise MalformedPayloadError(
                f"backend {self.backend_id!r} got a {sidecar.get('task')!r} fixture "
                f"for segmentation card {card.name!r}"
            )
        classes = sidecar.get("classes")
        if not isinstance(classes, dict):
            raise MalformedPayloadError("segmentation sidecar needs a 'classes' label map")

        volume = load_volume(request.image_refs[0])
        is_3d = volume.ndim == 3
        found: list[tuple[str, int]] = []
        present_ids: list[int] = []
        for name, label_id in classes.items():
            count = int((volume == int(label_id)).sum())
            if count > 0:
                found.append((name, count))
                present_ids.append(int(label_id))

        if request.argument == "everything" or not request.argument:
            target_ids = {int(v) for v in classes.values()}
        else:
            target_ids = {int(v) for k, v in classes.items() if k == request.argument}

        selected = None
        highlight = target_ids or None
        if is_3d:
            try:
                selected = select_slice(volume, target_ids or set(present_ids))
            except StructureNotFoundError:
                if present_ids:
                    selected = select_slice(volume, set(present_ids))
                else:
                    selected = volume.shape[2] // 2

        self.output_dir.mkdir(parents=True, exist_ok=True)
        stem = uri_to_path(request.image_refs[0]).name.split(".")[0]
        base = f"{stem}__{_slug(request.argument or 'all')}"
        overlay_path = self.output_dir / f"{base}.overlay.png"
        if is_3d:
            mask_path = self.output_dir / f"{base}.mask.rawvol"
            write_rawvol(mask_path, volume)
            render_overlay(volume[:, :, selected], overlay_path, highlight=highlight)
        else:
            mask_path = self.output_dir / f"{base}.mask.png"
            render_overlay(volume, mask_path, highlight=None)
            render_overlay(volume, overlay_path, highlight=highlight)

        result = SegmentationResult(
            classes_found=tuple(found),
            mask_ref=file_uri(mask_path),
            overlay_ref=file_uri(overlay_path),
            selected_slice=selected,
        )
        return ExpertResult(result=result, latency_ms=0.0, backend_id=self.backend_id)


class MockClassificationBackend:
    """Deterministic classification ensemble fed by sidecar member vectors."""

    def __init__(self, conditions: list[str] | None = None, backend_id: str = "mock-cxr"):
        self.conditions = list(conditions) if conditions is not None else default_conditions()
        self.backend_id = backend_id

    def infer(self, card: ModelCard, request: ExpertRequest) -> ExpertResult:
        sidecar = _read_sidecar(request.image_refs[0])
        if sidecar.get("task") != "classification":
            raise MalformedPayloadError(
                f"backend {self.backend_id!r} got a {sidecar.get('task')!r} fixture "
                f"for classification card {card.name!r}"
            )
        members = sidecar.get("members")
        if members is None and "probabilities" in sidecar:
            members = [sidecar["probabilities"]]
        if not isinstance(members, list) or not members:
            raise MalformedPayloadError("classification sidecar needs 'members' vectors")
        for vec in members:
            if len(vec) != len(self.conditions):
                raise MalformedPayloadError(
                    f"member vector length {len(vec)} does not match the "
                    f"{len(self.conditions)}-condition schema"
                )
        combined = ensemble_combine(members)
        result = ClassificationResult(
            probabilities=tuple(zip(self.conditions, combined)),
            per_model=tuple(tuple(float(x) for x in vec) for vec in members),
        )
        return ExpertResult(result=result, latency_ms=0.0, backend_id=self.backend_id)


class RemoteExpertBackend:
    """HTTP client speaking the POST /infer wire protocol."""

    def __init__(
        self,
        base_url: str,
        timeout_ms: int = 30000,
        backend_id: str | None = None,
        conditions: list[str] | None = None,
        client: httpx.Client | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.timeout_ms = timeout_ms
        self.backend_id = backend_id or f"remote:{self.base_url}"
        self.conditions = conditions
        self._client = client or httpx.Client(timeout=timeout_ms / 1000.0)

    def infer(self, card: ModelCard, request: ExpertRequest) -> ExpertResult:
        body = {
            "model": card.name,
            "arg": request.argument,
            "images": list(request.image_refs),
            "session_id": request.session_id,
        }
        started = time.perf_counter()
        try:
            resp = self._client.post(f"{self.base_url}/infer", json=body)
        except httpx.TimeoutException as exc:
            raise BackendError(f"expert backend timed out: {exc}", retryable=True) from exc
        except httpx.TransportError as exc:
            raise BackendError(f"expert backend unreachable: {exc}", retryable=True) from exc
        if resp.status_code >= 500:
            raise BackendError(f"expert backend returned {resp.status_code}", retryable=True)
        if resp.status_code >= 400:
            raise BackendError(f"expert backend rejected the request: {resp.status_code}")
        try:
            payload = resp.json()
        except ValueError as exc:
            raise MalformedPayloadError(f"expert backend returned non-JSON body: {exc}") from exc
        parsed = expert_result_from_dict(payload)
        if self.conditions is not None and isinstance(parsed.result, ClassificationResult):
            if parsed.result.conditions() != self.conditions:
                raise MalformedPayloadError(
                    "remote classification conditions do not match the configured schema"
                )
        latency = (time.perf_counter() - started) * 1000.0
        return ExpertResult(result=parsed.result, latency_ms=latency, backend_id=self.backend_id)


class ExpertDispatcher:
    """Routes resolved cards to configured backends with bounded retries."""

    def __init__(self, backends: dict[str, ExpertBackend], max_retries: int = 2):
        self.backends = dict(backends)
        self.max_retries = max_retries

    def dispatch(self, card: ModelCard, request: ExpertRequest) -> ExpertResult:
        backend = self.backends.get(card.endpoint_ref)
        if backend is None:
            raise BackendError(
                f"no backend configured for endpoint {card.endpoint_ref!r}", retryable=False
            )
        attempts = 0
        while True:
            try:
                result = backend.infer(card, request)
                break
            except MalformedPayloadError:
                raise
            except BackendError as exc:
                attempts += 1
                if not exc.retryable or attempts > self.max_retries:
                    raise
        if result.task != card.task:
            raise MalformedPayloadError(
                f"backend {result.backend_id!r} returned a {result.task} result "
                f"for {card.task} card {card.name!r}"
            )
        return result


def make_segmentation_sidecar(volume_path: str | Path, classes: dict[str, int]) -> Path:
    """Write the sidecar for a segmentation fixture; returns its path."""
    path = Path(volume_path)
    sidecar = path.with_name(path.name + SIDECAR_SUFFIX)
    sidecar.write_text(json.dumps({"task": "segmentation", "classes": classes}, indent=2))
    return sidecar


def make_classification_sidecar(image_path: str | Path, members: list[list[float]]) -> Path:
    """Write the sidecar for a classification fixture; returns its path."""
    path = Path(image_path)
    sidecar = path.with_name(path.name + SIDECAR_SUFFIX)
    sidecar.write_text(json.dumps({"task": "classification", "members": members}, indent=2))
    return sidecar


def synth_volume(
    shape: tuple[int, int, int],
    blobs: dict[int, tuple[tuple[int, int], tuple[int, int], tuple[int, int]]],
) -> np.ndarray:
    """Build a synthetic label volume from per-label box extents.

    ``blobs`` maps a label id to ((r0, r1), (c0, c1), (s0, s1)) half-open
    box bounds; later labels overwrite earlier ones where boxes overlap.
    """
    vol = np.zeros(shape, dtype=np.uint8)
    for label, ((r0, r1), (c0, c1), (s0, s1)) in blobs.items():
        vol[r0:r1, c0:c1, s0:s1] = label
    return vol
