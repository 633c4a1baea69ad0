"""Shared fixtures: synthetic volumes, sidecars, and registry setups."""

import numpy as np
import pytest

from m3.experts import (
    make_classification_sidecar,
    make_segmentation_sidecar,
    synth_volume,
)
from m3.registry import default_registry
from m3.volumes import file_uri, write_rawvol

LIVER_LABEL = 1
HEPATIC_TUMOR_LABEL = 26

# (name, category, original count, frequency, published balanced count)
BALANCE_TABLE_ROWS = [
    ("USMLE", "Lang", 10_178, 10, 101_780),
    ("RadVQA", "VQA", 6_281, 16, 100_496),
    ("SLAKE", "VQA", 5_972, 16, 95_552),
    ("PathVQA", "VQA", 26_034, 4, 104_136),
    ("MIMIC-Diff-VQA", "VQA", 129_232, 2, 258_464),
    ("MIMIC", "Report", 270_000, 1, 270_000),
    ("VISTA3D", "Seg", 50_000, 8, 400_000),
    ("BRATS", "Seg", 15_000, 16, 240_000),
]

THREE_CONDITIONS = ["Atelectasis", "Cardiomegaly", "Effusion"]
THREE_CONDITION_MEMBERS = [
    [0.9, 0.2, 0.6],
    [0.7, 0.4, 0.8],
]  # mean = [0.8, 0.3, 0.7]


@pytest.fixture(scope="session")
def registry():
    return default_registry()


def build_liver_volume() -> np.ndarray:
    # Liver box spans slices 2..14; tumor box peaks inside slices 6..9.
    return synth_volume(
        (32, 32, 16),
        {
            LIVER_LABEL: ((4, 24), (4, 24), (2, 14)),
            HEPATIC_TUMOR_LABEL: ((10, 16), (10, 16), (6, 9)),
        },
    )


@pytest.fixture()
def liver_fixture(tmp_path):
    """3D CT fixture with a liver and a hepatic tumor, plus sidecar."""
    volume = build_liver_volume()
    path = tmp_path / "liver_ct.rawvol"
    write_rawvol(path, volume)
    make_segmentation_sidecar(
        path, {"liver": LIVER_LABEL, "hepatic tumor": HEPATIC_TUMOR_LABEL}
    )
    return {"uri": file_uri(path), "volume": volume, "path": path}


@pytest.fixture()
def cxr_fixture(tmp_path):
    """Classification fixture with three member vectors over 3 conditions."""
    from PIL import Image

    path = tmp_path / "cxr.png"
    Image.fromarray(np.zeros((16, 16), dtype=np.uint8)).save(path)
    members = [
        [0.9, 0.2, 0.6],
        [0.7, 0.4, 0.8],
        [0.8, 0.3, 0.7],
    ]  # mean = [0.8, 0.3, 0.7]
    make_classification_sidecar(path, members)
    return {"uri": file_uri(path), "members": members, "conditions": THREE_CONDITIONS}
