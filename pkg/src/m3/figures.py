"""Matplotlib figure rendering for the CLI report paths.

Every figure is written to a file next to the delimited output; no
interactive backends are touched.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation.scaling import LossObservation, ScalingLawParams, predict_loss


def render_balance_figure(
    proportions: dict[str, dict[str, float]], path: str | Path, title: str = "Dataset category shares"
) -> None:
    """Grouped bars of per-category shares before and after balancing."""
    categories = list(proportions["before"].keys())
    before = [proportions["before"][c] for c in categories]
    after = [proportions["after"][c] for c in categories]
    x = np.arange(len(categories))
    width = 0.38
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(x - width / 2, before, width, label="original", color="#7f9fc4")
    ax.bar(x + width / 2, after, width, label="balanced", color="#d98a5e")
    ax.set_xticks(x)
    ax.set_xticklabels(categories)
    ax.set_ylabel("share of total")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_metric_bars(
    labels: list[str], values: list[float], path: str | Path, title: str, ylabel: str = "score"
) -> None:
    fig, ax = plt.subplots(figsize=(max(4, 0.7 * len(labels) + 2), 4))
    ax.bar(np.arange(len(labels)), values, color="#5b8a72")
    ax.set_xticks(np.arange(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_scaling_fit_figure(
    observations: list[LossObservation],
    params: ScalingLawParams,
    path: str | Path,
) -> None:
    """Observed loss points and fitted curves, one series per model size."""
    sizes = sorted({o.N for o in observations})
    cmap = plt.get_cmap("viridis")
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for i, n in enumerate(sizes):
        rows = sorted((o.S, o.L) for o in observations if o.N == n)
        steps = np.array([s for s, _ in rows])
        losses = np.array([l for _, l in rows])
        color = cmap(i / max(len(sizes) - 1, 1))
        ax.plot(steps, losses, "o", color=color, markersize=4, label=f"N={n:.2g}")
        grid = np.geomspace(steps.min(), steps.max(), 200)
        ax.plot(grid, predict_loss(params, n, grid), "-", color=color, linewidth=1)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("training steps")
    ax.set_ylabel("loss")
    ax.set_title(
        f"L(N,S) fit: aN={params.alpha_N:.3f}, aS={params.alpha_S:.3f}, "
        f"Nc={params.N_c:.3g}, Sc={params.S_c:.3g}"
    )
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_benchmark_figure(
    results: dict[tuple[str, str, str], float],
    path: str | Path,
    title: str = "Benchmark results",
) -> None:
    """One bar group per (dataset, metric) column, one bar per model."""
    models = sorted({model for model, _, _ in results})
    columns = sorted({(d, m) for _, d, m in results})
    x = np.arange(len(columns))
    width = 0.8 / max(len(models), 1)
    cmap = plt.get_cmap("tab10")
    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(columns)), 4.5))
    for i, model in enumerate(models):
        values = [results.get((model, d, m), np.nan) for d, m in columns]
        ax.bar(x + (i - (len(models) - 1) / 2) * width, values, width, label=model, color=cmap(i % 10))
    ax.set_xticks(x)
    ax.set_xticklabels([f"{d}\n{m}" for d, m in columns], fontsize=8)
    ax.set_ylabel("score")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
