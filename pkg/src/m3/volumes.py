"""Label-volume I/O and slice selection for segmentation experts.

Two on-disk formats are supported for 3D label volumes:

* ``.rawvol`` — the repo fixture format: a 12-byte header of three
  little-endian uint32 dims, followed by ``dim0*dim1*dim2`` uint8 label
  values in C order. The last axis is the slice axis.
* ``.nii`` / ``.nii.gz`` — NIfTI-1, read by a minimal built-in parser
  (common integer and float dtypes, single-file magic).

2D inputs (``.png``, ``.jpg``) are read as grayscale label maps.
"""

from __future__ import annotations

import colorsys
import gzip
import io
import os
import struct
import uuid
from pathlib import Path
from urllib.parse import unquote, urlparse
from urllib.request import pathname2url

import numpy as np
from PIL import Image

from .errors import SchemaError, StructureNotFoundError

RAWVOL_SUFFIX = ".rawvol"

_NIFTI_DTYPES = {
    2: np.uint8,
    4: np.int16,
    8: np.int32,
    16: np.float32,
    64: np.float64,
    256: np.int8,
    512: np.uint16,
    768: np.uint32,
}


def file_uri(path: str | Path) -> str:
    return "file://" + pathname2url(str(Path(path).resolve()))


def uri_to_path(uri: str) -> Path:
    """Resolve a file:// URI (or a plain path) to a local Path."""
    if uri.startswith("file://"):
        parsed = urlparse(uri)
        return Path(unquote(parsed.path))
    return Path(uri)


def _atomic_write_bytes(path: str | Path, data: bytes) -> None:
    # Unique temp name so concurrent writers of the same artifact never
    # clobber each other's partial output; os.replace commits atomically.
    path = Path(path)
    tmp = path.with_name(f".{path.name}.{uuid.uuid4().hex}.tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def write_rawvol(path: str | Path, volume: np.ndarray) -> None:
    vol = np.ascontiguousarray(volume, dtype=np.uint8)
    if vol.ndim != 3:
        raise ValueError(f"rawvol volumes are 3D, got shape {vol.shape}")
    _atomic_write_bytes(path, struct.pack("<III", *vol.shape) + vol.tobytes(order="C"))


def read_rawvol(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fp:
        header = fp.read(12)
        if len(header) != 12:
            raise SchemaError(f"{path}: truncated rawvol header")
        d0, d1, d2 = struct.unpack("<III", header)
        expected = d0 * d1 * d2
        data = fp.read()
    if len(data) != expected:
        raise SchemaError(
            f"{path}: rawvol payload is {len(data)} bytes, expected {expected} for dims {(d0, d1, d2)}"
        )
    return np.frombuffer(data, dtype=np.uint8).reshape(d0, d1, d2)


def read_nifti(path: str | Path) -> np.ndarray:
    """Minimal NIfTI-1 reader (single-file .nii, optionally gzipped)."""
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    if len(raw) < 352:
        raise SchemaError(f"{path}: too short to be a NIfTI-1 file")
    sizeof_hdr = struct.unpack_from("<i", raw, 0)[0]
    endian = "<"
    if sizeof_hdr != 348:
        sizeof_hdr = struct.unpack_from(">i", raw, 0)[0]
        if sizeof_hdr != 348:
            raise SchemaError(f"{path}: bad NIfTI header size")
        endian = ">"
    magic = raw[344:348]
    if magic not in (b"n+1\x00", b"ni1\x00"):
        raise SchemaError(f"{path}: unsupported NIfTI magic {magic!r}")
    dims = struct.unpack_from(endian + "8h", raw, 40)
    ndim = dims[0]
    if not 1 <= ndim <= 7:
        raise SchemaError(f"{path}: invalid NIfTI ndim {ndim}")
    shape = tuple(int(d) for d in dims[1 : ndim + 1])
    datatype = struct.unpack_from(endian + "h", raw, 70)[0]
    if datatype not in _NIFTI_DTYPES:
        raise SchemaError(f"{path}: unsupported NIfTI datatype code {datatype}")
    dtype = np.dtype(_NIFTI_DTYPES[datatype]).newbyteorder(endian)
    vox_offset = int(struct.unpack_from(endian + "f", raw, 108)[0])
    count = int(np.prod(shape))
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=vox_offset)
    # NIfTI data is stored with the first axis varying fastest.
    arr = data.reshape(shape, order="F")
    slope, inter = struct.unpack_from(endian + "2f", raw, 112)
    if slope not in (0.0, 1.0) or inter != 0.0:
        arr = arr * slope + inter
    return np.asarray(arr)


def load_volume(ref: str | Path) -> np.ndarray:
    """Load a 2D or 3D label array from a path or file:// URI."""
    path = uri_to_path(str(ref))
    suffixes = "".join(path.suffixes).lower()
    if suffixes.endswith(RAWVOL_SUFFIX):
        return read_rawvol(path)
    if suffixes.endswith(".nii") or suffixes.endswith(".nii.gz"):
        return read_nifti(path)
    if suffixes.endswith((".png", ".jpg", ".jpeg")):
        with Image.open(path) as img:
            return np.asarray(img.convert("L"))
    raise SchemaError(f"unrecognized volume format: {path.name}")


def select_slice(label_volume: np.ndarray, target_labels: set[int] | frozenset[int]) -> int:
    """Index of the slice (last axis) with the most target-label voxels.

    Ties break to the lowest index. Raises StructureNotFoundError when no
    voxel anywhere carries a target label.
    """
    if label_volume.ndim != 3 or label_volume.size == 0:
        raise ValueError(f"expected a nonempty 3D volume, got shape {label_volume.shape}")
    mask = np.isin(label_volume, list(target_labels))
    counts = mask.sum(axis=(0, 1))
    if counts.sum() == 0:
        raise StructureNotFoundError(
            f"no voxel with labels {sorted(target_labels)} present in the volume"
        )
    return int(np.argmax(counts))


def label_color(label: int) -> tuple[int, int, int]:
    """Deterministic, well-separated color for a label id (0 is black)."""
    if label == 0:
        return (0, 0, 0)
    hue = (label * 0.61803398875) % 1.0
    r, g, b = colorsys.hsv_to_rgb(hue, 0.85, 1.0)
    return (int(r * 255), int(g * 255), int(b * 255))


def render_overlay(labels_2d: np.ndarray, path: str | Path, highlight: set[int] | None = None) -> None:
    """Write an RGB PNG of a 2D label slice.

    Non-highlighted labels render dimmed so the requested structures stand
    out; output bytes are deterministic for identical inputs.
    """
    labels = np.asarray(labels_2d)
    if labels.ndim != 2:
        raise ValueError(f"overlay expects a 2D slice, got shape {labels.shape}")
    rgb = np.zeros((*labels.shape, 3), dtype=np.uint8)
    for label in np.unique(labels):
        if label == 0:
            continue
        color = np.array(label_color(int(label)), dtype=np.float64)
        if highlight is not None and int(label) not in highlight:
            color = color * 0.35
        rgb[labels == label] = color.astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    _atomic_write_bytes(path, buf.getvalue())
