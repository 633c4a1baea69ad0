"""Category-wise frequency balancing of instruction-tuning datasets.

Each dataset's records are repeated ``frequency`` times and the combined
manifest is shuffled with a seeded permutation, so the output is exactly
reproducible and per-dataset output counts are ``original_count x
frequency`` by construction.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from ..errors import MissingStoreError, SchemaError

CATEGORIES = ("Lang", "VQA", "Report", "Seg")


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    category: str
    original_count: int
    frequency: int
    store: str | None = None

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise SchemaError(f"dataset {self.name!r}: category must be one of {CATEGORIES}")
        if self.original_count < 0:
            raise SchemaError(f"dataset {self.name!r}: original_count must be >= 0")
        if self.frequency < 1:
            raise SchemaError(f"dataset {self.name!r}: frequency must be >= 1")

    @property
    def balanced_count(self) -> int:
        return self.original_count * self.frequency


def load_specs(path: str | Path) -> list[DatasetSpec]:
    with open(path, encoding="utf-8") as fp:
        doc = json.load(fp)
    if isinstance(doc, dict):
        doc = doc.get("datasets", doc)
    if not isinstance(doc, list):
        raise SchemaError(f"{path}: dataset spec file must hold a JSON list")
    specs = []
    for i, raw in enumerate(doc):
        try:
            specs.append(
                DatasetSpec(
                    name=str(raw["name"]),
                    category=str(raw["category"]),
                    original_count=int(raw["original_count"]),
                    frequency=int(raw["frequency"]),
                    store=raw.get("store"),
                )
            )
        except KeyError as exc:
            raise SchemaError(f"{path}: spec {i} missing field {exc}") from exc
    return specs


@dataclass
class BalanceManifest:
    """Shuffled (dataset, record index) assignment for one balancing run."""

    specs: list[DatasetSpec]
    dataset_idx: np.ndarray  # int32, len == total balanced count
    record_idx: np.ndarray  # int64, record index within the source dataset
    seed: int

    def __len__(self) -> int:
        return int(self.dataset_idx.shape[0])

    def counts(self) -> dict[str, int]:
        """Balanced output count per dataset."""
        tallies = np.bincount(self.dataset_idx, minlength=len(self.specs))
        return {spec.name: int(tallies[i]) for i, spec in enumerate(self.specs)}

    def entries(self) -> Iterator[tuple[str, str]]:
        """Yield (dataset name, record ref) in shuffled order."""
        names = [spec.name for spec in self.specs]
        for d, r in zip(self.dataset_idx, self.record_idx):
            name = names[d]
            yield name, f"{name}/{int(r)}"

    def to_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fp:
            for name, ref in self.entries():
                fp.write(json.dumps({"dataset": name, "ref": ref}) + "\n")


def balance(specs: list[DatasetSpec], seed: int) -> BalanceManifest:
    """Repeat each dataset ``frequency`` times and globally shuffle.

    Specs carrying a ``store`` path must point at an existing file.
    """
    for spec in specs:
        if spec.store is not None and not Path(spec.store).exists():
            raise MissingStoreError(f"dataset {spec.name!r}: record store {spec.store} not found")

    dataset_parts = []
    record_parts = []
    for i, spec in enumerate(specs):
        n = spec.balanced_count
        dataset_parts.append(np.full(n, i, dtype=np.int32))
        record_parts.append(np.tile(np.arange(spec.original_count, dtype=np.int64), spec.frequency))
    if dataset_parts:
        dataset_idx = np.concatenate(dataset_parts)
        record_idx = np.concatenate(record_parts)
    else:
        dataset_idx = np.empty(0, dtype=np.int32)
        record_idx = np.empty(0, dtype=np.int64)

    perm = np.random.default_rng(seed).permutation(dataset_idx.shape[0])
    return BalanceManifest(
        specs=list(specs),
        dataset_idx=dataset_idx[perm],
        record_idx=record_idx[perm],
        seed=seed,
    )


def category_proportions(specs: list[DatasetSpec]) -> dict[str, dict[str, float]]:
    """Per-category share of the total, before and after balancing.

    Shares within each of "before"/"after" sum to 1.
    """
    if not specs:
        raise ValueError("category_proportions needs at least one dataset spec")
    before_totals = {c: 0 for c in CATEGORIES}
    after_totals = {c: 0 for c in CATEGORIES}
    for spec in specs:
        before_totals[spec.category] += spec.original_count
        after_totals[spec.category] += spec.balanced_count
    before_sum = sum(before_totals.values())
    after_sum = sum(after_totals.values())
    present = [c for c in CATEGORIES if before_totals[c] or after_totals[c]]
    return {
        "before": {c: before_totals[c] / before_sum for c in present},
        "after": {c: after_totals[c] / after_sum for c in present},
    }


def write_manifest_csv(specs: list[DatasetSpec], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fp:
        writer = csv.writer(fp)
        writer.writerow(["dataset", "category", "original", "frequency", "balanced"])
        for spec in specs:
            writer.writerow(
                [spec.name, spec.category, spec.original_count, spec.frequency, spec.balanced_count]
            )
        writer.writerow(
            [
                "TOTAL",
                "",
                sum(s.original_count for s in specs),
                "",
                sum(s.balanced_count for s in specs),
            ]
        )
