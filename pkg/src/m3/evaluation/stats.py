"""Paired contingency-table statistics for model comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class McNemarTable:
    """Discordant counts of two classifiers on the same items.

    ``b`` = first model correct, second wrong; ``c`` = first wrong, second
    correct. Concordant counts ``a``/``d`` are bookkeeping only.
    """

    b: int
    c: int
    a: int = 0
    d: int = 0

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            if getattr(self, name) < 0:
                raise ValueError(f"McNemar count {name} must be nonnegative")


def chi2_sf_1dof(x: float) -> float:
    """Upper-tail probability of the chi-square distribution with one
    degree of freedom."""
    if x < 0:
        raise ValueError("chi-square statistic must be nonnegative")
    return math.erfc(math.sqrt(x / 2.0))


def mcnemar(table: McNemarTable) -> tuple[float, float]:
    """Continuity-corrected McNemar chi-square statistic and p-value.

    Undefined (ValueError) when there are no discordant pairs.
    """
    n = table.b + table.c
    if n == 0:
        raise ValueError("McNemar test not applicable: no discordant pairs (b + c = 0)")
    chi_square = (abs(table.b - table.c) - 1) ** 2 / n
    return chi_square, chi2_sf_1dof(chi_square)


def paired_table(correct_a: list[bool], correct_b: list[bool]) -> McNemarTable:
    """Build the contingency table from per-item correctness of two models."""
    if len(correct_a) != len(correct_b):
        raise ValueError("paired_table needs equally long correctness lists")
    a = b = c = d = 0
    for ca, cb in zip(correct_a, correct_b):
        if ca and cb:
            a += 1
        elif ca and not cb:
            b += 1
        elif not ca and cb:
            c += 1
        else:
            d += 1
    return McNemarTable(b=b, c=c, a=a, d=d)
