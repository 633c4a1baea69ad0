"""Benchmark tables: deterministic CSV and Markdown emission.

In the Markdown table the best value per column is bold and the
second-best is wrapped in underscores; ties for best are all bolded (and
the second-best is then the next distinct value).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

MISSING = "-"


@dataclass(frozen=True)
class BenchmarkLayout:
    models: tuple[str, ...]
    columns: tuple[tuple[str, str], ...]  # (dataset, metric)
    value_format: str = "{:.1f}"


@dataclass
class BenchmarkReport:
    layout: BenchmarkLayout
    csv_text: str
    markdown_text: str
    best: dict[tuple[str, str], list[str]] = field(default_factory=dict)
    second_best: dict[tuple[str, str], list[str]] = field(default_factory=dict)


def layout_from_results(results: dict[tuple[str, str, str], float]) -> BenchmarkLayout:
    models = sorted({model for model, _, _ in results})
    columns = sorted({(dataset, metric) for _, dataset, metric in results})
    return BenchmarkLayout(models=tuple(models), columns=tuple(columns))


def emit_benchmark_report(
    results: dict[tuple[str, str, str], float],
    layout: BenchmarkLayout | None = None,
) -> BenchmarkReport:
    """Render results keyed by (model, dataset, metric) as CSV + Markdown."""
    if layout is None:
        layout = layout_from_results(results)

    best: dict[tuple[str, str], list[str]] = {}
    second: dict[tuple[str, str], list[str]] = {}
    for column in layout.columns:
        dataset, metric = column
        values = [
            (model, results[(model, dataset, metric)])
            for model in layout.models
            if (model, dataset, metric) in results
        ]
        if not values:
            best[column] = []
            second[column] = []
            continue
        top = max(v for _, v in values)
        best[column] = [m for m, v in values if v == top]
        below = [v for _, v in values if v < top]
        if below:
            runner_up = max(below)
            second[column] = [m for m, v in values if v == runner_up]
        else:
            second[column] = []

    header = ["model"] + [f"{dataset} {metric}" for dataset, metric in layout.columns]
    csv_buf = io.StringIO()
    writer = csv.writer(csv_buf)
    writer.writerow(header)
    for model in layout.models:
        row = [model]
        for dataset, metric in layout.columns:
            value = results.get((model, dataset, metric))
            row.append(MISSING if value is None else layout.value_format.format(value))
        writer.writerow(row)

    md_lines = [
        "| " + " | ".join(["Model"] + [f"{d} {m}" for d, m in layout.columns]) + " |",
        "|" + "---|" * (len(layout.columns) + 1),
    ]
    for model in layout.models:
        cells = [model]
        for column in layout.columns:
            dataset, metric = column
            value = results.get((model, dataset, metric))
            if value is None:
                cells.append(MISSING)
                continue
            text = layout.value_format.format(value)
            if model in best[column]:
                text = f"**{text}**"
            elif model in second[column]:
                text = f"_{text}_"
            cells.append(text)
        md_lines.append("| " + " | ".join(cells) + " |")

    return BenchmarkReport(
        layout=layout,
        csv_text=csv_buf.getvalue(),
        markdown_text="\n".join(md_lines) + "\n",
        best=best,
        second_best=second,
    )


def parse_results_csv(path) -> dict[tuple[str, str, str], float]:
    """Read long-form results: model,dataset,metric,value."""
    results: dict[tuple[str, str, str], float] = {}
    with open(path, newline="", encoding="utf-8") as fp:
        reader = csv.DictReader(fp)
        required = {"model", "dataset", "metric", "value"}
        if reader.fieldnames is None or required - set(reader.fieldnames):
            raise ValueError(f"{path}: results CSV needs columns {sorted(required)}")
        for row in reader:
            results[(row["model"], row["dataset"], row["metric"])] = float(row["value"])
    return results
