import gzip
import struct

import numpy as np
import pytest
from PIL import Image

from m3.errors import SchemaError
from m3.volumes import (
    file_uri,
    load_volume,
    read_nifti,
    read_rawvol,
    render_overlay,
    uri_to_path,
    write_rawvol,
)


def write_minimal_nifti(path, volume, gzipped=False):
    """Build a NIfTI-1 single-file image around a uint8 array (Fortran order)."""
    header = bytearray(348)
    struct.pack_into("<i", header, 0, 348)
    dims = (volume.ndim, *volume.shape) + (1,) * (7 - volume.ndim)
    struct.pack_into("<8h", header, 40, *dims)
    struct.pack_into("<h", header, 70, 2)  # uint8
    struct.pack_into("<h", header, 72, 8)  # bitpix
    struct.pack_into("<f", header, 108, 352.0)  # vox_offset
    struct.pack_into("<2f", header, 112, 1.0, 0.0)  # scl_slope, scl_inter
    header[344:348] = b"n+1\x00"
    blob = bytes(header) + b"\x00" * 4 + volume.tobytes(order="F")
    if gzipped:
        blob = gzip.compress(blob)
    path.write_bytes(blob)


class TestRawvol:
    def test_round_trip(self, tmp_path):
        volume = np.arange(2 * 3 * 4, dtype=np.uint8).reshape(2, 3, 4)
        path = tmp_path / "v.rawvol"
        write_rawvol(path, volume)
        assert np.array_equal(read_rawvol(path), volume)

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "bad.rawvol"
        path.write_bytes(struct.pack("<III", 4, 4, 4) + b"\x00" * 10)
        with pytest.raises(SchemaError):
            read_rawvol(path)

    def test_2d_array_rejected_on_write(self, tmp_path):
        with pytest.raises(ValueError):
            write_rawvol(tmp_path / "x.rawvol", np.zeros((4, 4), dtype=np.uint8))


class TestNifti:
    def test_reads_plain_and_gzipped(self, tmp_path):
        volume = np.random.default_rng(0).integers(0, 5, size=(6, 5, 4), dtype=np.uint8)
        plain = tmp_path / "v.nii"
        write_minimal_nifti(plain, volume)
        assert np.array_equal(read_nifti(plain), volume)
        zipped = tmp_path / "v2.nii.gz"
        write_minimal_nifti(zipped, volume, gzipped=True)
        assert np.array_equal(load_volume(zipped), volume)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.nii"
        blob = bytearray(352)
        struct.pack_into("<i", blob, 0, 348)
        blob[344:348] = b"xxxx"
        path.write_bytes(bytes(blob))
        with pytest.raises(SchemaError):
            read_nifti(path)


class TestLoadVolume:
    def test_png_loads_as_2d_labels(self, tmp_path):
        labels = np.zeros((8, 8), dtype=np.uint8)
        labels[2:5, 2:5] = 3
        path = tmp_path / "labels.png"
        Image.fromarray(labels).save(path)
        loaded = load_volume(path)
        assert loaded.ndim == 2
        assert np.array_equal(loaded, labels)

    def test_file_uri_round_trip(self, tmp_path):
        path = tmp_path / "with space.rawvol"
        write_rawvol(path, np.zeros((1, 1, 1), dtype=np.uint8))
        uri = file_uri(path)
        assert uri.startswith("file://")
        assert uri_to_path(uri) == path.resolve()
        assert load_volume(uri).shape == (1, 1, 1)

    def test_unknown_extension_rejected(self, tmp_path):
        path = tmp_path / "volume.dat"
        path.write_bytes(b"??")
        with pytest.raises(SchemaError):
            load_volume(path)


class TestOverlay:
    def test_deterministic_bytes(self, tmp_path):
        labels = np.zeros((16, 16), dtype=np.uint8)
        labels[4:12, 4:12] = 2
        labels[6:9, 6:9] = 7
        p1, p2 = tmp_path / "a.png", tmp_path / "b.png"
        render_overlay(labels, p1, highlight={7})
        render_overlay(labels, p2, highlight={7})
        assert p1.read_bytes() == p2.read_bytes()

    def test_highlighted_label_brighter_than_dimmed(self, tmp_path):
        labels = np.zeros((8, 8), dtype=np.uint8)
        labels[:4, :] = 2
        labels[4:, :] = 7
        path = tmp_path / "o.png"
        render_overlay(labels, path, highlight={7})
        rgb = np.asarray(Image.open(path))
        assert rgb[6, 0].max() > rgb[1, 0].max()

    def test_rejects_3d_input(self, tmp_path):
        with pytest.raises(ValueError):
            render_overlay(np.zeros((2, 2, 2), dtype=np.uint8), tmp_path / "x.png")
