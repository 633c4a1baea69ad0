"""The ``m3`` command line: registry tools, dataset preparation,
evaluation, and the gateway server/REPL.

Report-producing subcommands write delimited output (CSV/JSONL) plus a
rendered PNG figure side by side under ``--out``.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import engine
from .data import (
    ReportSample,
    SegSample,
    balance,
    build_sentence_pool,
    category_proportions,
    gen_report_conversations,
    gen_seg_conversations,
    load_specs,
    load_template_bank,
    normalize_report,
    records_to_jsonl,
    write_manifest_csv,
)
from .data.sentence_pool import SentencePool
from .errors import M3Error
from .evaluation import (
    McNemarTable,
    bleu4,
    classification_f1,
    closed_vqa_accuracy,
    fit_scaling_law,
    load_loss_csv,
    load_predictions,
    mcnemar,
    open_vqa_exact_match,
    paired_table,
    rouge_1,
    rouge_l,
)
from .evaluation.metrics import normalize_answer
from .evaluation.reporting import emit_benchmark_report, parse_results_csv
from .experts import ClassificationResult, load_conditions
from .gateway import create_app, load_config
from .registry import load_registry, render_system_prompt


@click.group()
@click.version_option(package_name="m3-gateway")
def main():
    """Expert-model orchestration gateway for medical VLMs."""


# --------------------------------------------------------------------------
# registry


@main.group()
def registry():
    """Validate and render expert model-card registries."""


@registry.command("validate")
@click.argument("path", type=click.Path(exists=True))
def registry_validate(path):
    try:
        reg = load_registry(path)
    except M3Error as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"OK: {len(reg.cards)} card(s) valid")
    for card in reg.cards:
        args = ", ".join(card.valid_args) or "(argument-free)"
        click.echo(f"  {card.name} [{card.modality}/{card.task}] -> {args}")


@registry.command("render")
@click.argument("path", type=click.Path(exists=True))
def registry_render(path):
    try:
        reg = load_registry(path)
    except M3Error as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(render_system_prompt(reg))


# --------------------------------------------------------------------------
# data


@main.group()
def data():
    """Dataset balancing, conversation generation, report normalization."""


@data.command("balance")
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path())
def data_balance(spec_path, seed, out_dir):
    """Build a balanced, shuffled training manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    specs = load_specs(spec_path)
    manifest = balance(specs, seed=seed)
    write_manifest_csv(specs, out / "manifest.csv")
    manifest.to_jsonl(out / "manifest.jsonl")
    proportions = category_proportions(specs)

    from .figures import render_balance_figure

    render_balance_figure(proportions, out / "balance.png")
    for spec in specs:
        click.echo(f"{spec.name}: {spec.original_count} x {spec.frequency} = {spec.balanced_count}")
    click.echo(f"total entries: {len(manifest)}")
    click.echo(f"wrote {out / 'manifest.csv'}, {out / 'manifest.jsonl'}, {out / 'balance.png'}")


@data.command("gen-seg")
@click.option("--samples", "samples_path", required=True, type=click.Path(exists=True))
@click.option("--registry", "registry_path", required=True, type=click.Path(exists=True))
@click.option("--card", "card_name", required=True)
@click.option("--templates", "templates_path", type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
def data_gen_seg(samples_path, registry_path, card_name, templates_path, seed, out_path):
    """Generate segmentation trigger conversations (JSONL)."""
    reg = load_registry(registry_path)
    card = next((c for c in reg.cards if c.name == card_name), None)
    if card is None:
        raise click.ClickException(f"no card named {card_name!r} in {registry_path}")
    samples = []
    with open(samples_path, encoding="utf-8") as fp:
        for line in fp:
            if line.strip():
                doc = json.loads(line)
                samples.append(
                    SegSample(id=str(doc["id"]), image=doc.get("image", ""), argument=doc["argument"])
                )
    bank = load_template_bank(templates_path)
    try:
        records = gen_seg_conversations(samples, card, bank, seed=seed)
    except M3Error as exc:
        raise click.ClickException(str(exc)) from exc
    records_to_jsonl(records, out_path)
    click.echo(f"wrote {len(records)} record(s) to {out_path}")


@data.command("gen-report")
@click.option("--samples", "samples_path", required=True, type=click.Path(exists=True))
@click.option("--threshold", default=0.5, show_default=True, type=float)
@click.option("--out", "out_path", required=True, type=click.Path())
def data_gen_report(samples_path, threshold, out_path):
    """Generate classification-conditioned report conversations (JSONL)."""
    samples = []
    with open(samples_path, encoding="utf-8") as fp:
        for line in fp:
            if not line.strip():
                continue
            doc = json.loads(line)
            probs = doc["probabilities"]
            pairs = list(probs.items()) if isinstance(probs, dict) else [tuple(p) for p in probs]
            samples.append(
                ReportSample(
                    id=str(doc["id"]),
                    image=doc.get("image", ""),
                    result=ClassificationResult(probabilities=tuple((str(n), float(p)) for n, p in pairs)),
                    report=doc.get("report"),
                )
            )
    try:
        records = gen_report_conversations(samples, threshold=threshold)
    except M3Error as exc:
        raise click.ClickException(str(exc)) from exc
    records_to_jsonl(records, out_path)
    click.echo(f"wrote {len(records)} record(s) to {out_path}")


@data.command("pool")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--min-count", default=2, show_default=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
def data_pool(corpus_path, min_count, out_path):
    """Collect a sentence pool from a report corpus (one report per line)."""
    with open(corpus_path, encoding="utf-8") as fp:
        corpus = [line.strip() for line in fp if line.strip()]
    pool = build_sentence_pool(corpus, min_count=min_count)
    pool.save(out_path)
    click.echo(f"pooled {len(pool.sentences)} sentence(s) into {out_path}")


@data.command("normalize")
@click.option("--report", "report_path", required=True, type=click.Path(exists=True))
@click.option("--pool", "pool_path", required=True, type=click.Path(exists=True))
@click.option("--threshold", default=0.6, show_default=True, type=float)
def data_normalize(report_path, pool_path, threshold):
    """Normalize one report against a sentence pool; prints the result."""
    pool = SentencePool.load(pool_path)
    text = Path(report_path).read_text(encoding="utf-8")
    click.echo(normalize_report(text, pool, threshold=threshold))


# --------------------------------------------------------------------------
# eval


@main.group("eval", invoke_without_command=True)
@click.option("--pred", "pred_path", type=click.Path(exists=True))
@click.option(
    "--metric",
    type=click.Choice(["accuracy", "open-exact", "f1", "bleu4", "rouge", "green"]),
)
@click.option("--schema", "schema_path", type=click.Path(exists=True))
@click.option("--lenient", is_flag=True, default=False)
@click.option("--rouge-variant", type=click.Choice(["l", "1"]), default="l", show_default=True)
@click.option("--out", "out_dir", type=click.Path())
@click.pass_context
def eval_group(ctx, pred_path, metric, schema_path, lenient, rouge_variant, out_dir):
    """Score a prediction file, or run a statistics subcommand."""
    if ctx.invoked_subcommand is not None:
        return
    if not pred_path or not metric:
        raise click.UsageError("either invoke a subcommand or pass --pred and --metric")
    records = load_predictions(pred_path)
    out = None
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)

    rows: list[tuple[str, float]] = []
    figure_title = metric
    try:
        if metric == "accuracy":
            value = closed_vqa_accuracy([r for r in records if r.task == "vqa-closed"]) * 100.0
            rows = [("accuracy", value)]
        elif metric == "open-exact":
            value = open_vqa_exact_match([r for r in records if r.task == "vqa-open"]) * 100.0
            rows = [("open-exact", value)]
        elif metric == "f1":
            conditions = load_conditions(schema_path) if schema_path else None
            if conditions is None:
                from .experts import default_conditions

                conditions = default_conditions()
            report = classification_f1(records, conditions, lenient=lenient)
            rows = list(report.condition_scores().items()) + [("macro", report.macro_f1)]
            if report.degenerate:
                click.echo(
                    f"note: conditions with no positives on either side scored 0 by convention: "
                    f"{', '.join(report.degenerate)}"
                )
            if report.lenient_ids:
                click.echo(f"note: {len(report.lenient_ids)} record(s) counted as all-no (--lenient)")
        elif metric == "bleu4":
            breakdown = bleu4([str(r.prediction) for r in records], [str(r.reference) for r in records])
            rows = [(f"p{i}", p * 100.0) for i, p in enumerate(breakdown.precisions, start=1)]
            rows += [("brevity_penalty", breakdown.brevity_penalty * 100.0), ("bleu4", breakdown.score)]
        elif metric == "rouge":
            fn = rouge_l if rouge_variant == "l" else rouge_1
            value = fn([str(r.prediction) for r in records], [str(r.reference) for r in records])
            rows = [(f"rouge-{rouge_variant}", value)]
        elif metric == "green":
            rows = [("green", float("nan"))]
            click.echo("green: not available (no judge attached)")
    except M3Error as exc:
        raise click.ClickException(str(exc)) from exc

    for name, value in rows:
        if value == value:  # skip NaN
            click.echo(f"{name}: {value:.4f}")
    if out is not None:
        csv_path = out / f"{metric}.csv"
        with open(csv_path, "w", encoding="utf-8") as fp:
            fp.write("name,value\n")
            for name, value in rows:
                fp.write(f"{name},{value:.6f}\n")
        from .figures import render_metric_bars

        plotted = [(n, v) for n, v in rows if v == v]
        render_metric_bars(
            [n for n, _ in plotted],
            [v for _, v in plotted],
            out / f"{metric}.png",
            title=figure_title,
        )
        click.echo(f"wrote {csv_path} and {out / (metric + '.png')}")


@eval_group.command("mcnemar")
@click.option("--a", "path_a", required=True, type=click.Path(exists=True))
@click.option("--b", "path_b", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", type=click.Path())
def eval_mcnemar(path_a, path_b, out_dir):
    """McNemar test of two closed-VQA prediction files on shared ids."""
    records_a = {r.id: r for r in load_predictions(path_a)}
    records_b = {r.id: r for r in load_predictions(path_b)}
    shared = sorted(set(records_a) & set(records_b))
    if not shared:
        raise click.ClickException("the two prediction files share no record ids")

    def correct(record):
        return normalize_answer(str(record.prediction)) == normalize_answer(str(record.reference))

    table = paired_table(
        [correct(records_a[i]) for i in shared],
        [correct(records_b[i]) for i in shared],
    )
    click.echo(f"n={len(shared)} a={table.a} b={table.b} c={table.c} d={table.d}")
    try:
        chi, p = mcnemar(table)
    except ValueError:
        click.echo("mcnemar: not applicable (no discordant pairs)")
        return
    click.echo(f"chi_square={chi:.6f} p_value={p:.6g}")
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "mcnemar.csv", "w", encoding="utf-8") as fp:
            fp.write("a,b,c,d,chi_square,p_value\n")
            fp.write(f"{table.a},{table.b},{table.c},{table.d},{chi:.9f},{p:.9g}\n")
        from .figures import render_metric_bars

        render_metric_bars(
            ["a (both right)", "b (A only)", "c (B only)", "d (both wrong)"],
            [table.a, table.b, table.c, table.d],
            out / "mcnemar.png",
            title=f"McNemar chi2={chi:.3f} p={p:.3g}",
            ylabel="count",
        )
        click.echo(f"wrote {out / 'mcnemar.csv'} and {out / 'mcnemar.png'}")


@eval_group.command("fit-scaling")
@click.option("--loss-csv", "loss_csv", required=True, type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_dir", type=click.Path())
def eval_fit_scaling(loss_csv, seed, out_dir):
    """Fit the loss power law L(N,S) to an N,S,L curve file."""
    observations = load_loss_csv(loss_csv)
    try:
        params, residual = fit_scaling_law(observations, seed=seed)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(
        f"alpha_N={params.alpha_N:.6g} alpha_S={params.alpha_S:.6g} "
        f"N_c={params.N_c:.6g} S_c={params.S_c:.6g} residual={residual:.6g}"
    )
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "scaling_fit.csv", "w", encoding="utf-8") as fp:
            fp.write("alpha_N,alpha_S,N_c,S_c,residual\n")
            fp.write(
                f"{params.alpha_N:.9g},{params.alpha_S:.9g},{params.N_c:.9g},"
                f"{params.S_c:.9g},{residual:.9g}\n"
            )
        from .figures import render_scaling_fit_figure

        render_scaling_fit_figure(observations, params, out / "scaling_fit.png")
        click.echo(f"wrote {out / 'scaling_fit.csv'} and {out / 'scaling_fit.png'}")


@eval_group.command("report")
@click.option("--results", "results_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def eval_report(results_path, out_dir):
    """Render a benchmark table (CSV + Markdown + figure) from long-form
    results (model,dataset,metric,value)."""
    results = parse_results_csv(results_path)
    report = emit_benchmark_report(results)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "benchmark.csv").write_text(report.csv_text, encoding="utf-8")
    (out / "benchmark.md").write_text(report.markdown_text, encoding="utf-8")
    from .figures import render_benchmark_figure

    render_benchmark_figure(results, out / "benchmark.png")
    click.echo(report.markdown_text)
    click.echo(f"wrote benchmark.csv, benchmark.md, benchmark.png under {out}")


# --------------------------------------------------------------------------
# serving


@main.command("serve")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--ui-dir", "ui_dir", type=click.Path(exists=True))
def serve(config_path, ui_dir):
    """Run the gateway HTTP service."""
    import uvicorn

    config = load_config(config_path)
    if ui_dir:
        config.ui_dir = ui_dir
    host, _, port = config.listen.rpartition(":")
    app = create_app(config)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))


@main.command("chat")
@click.option("--config", "config_path", type=click.Path(exists=True))
def chat(config_path):
    """Terminal REPL over the same engine (no HTTP).

    Commands: /image <path> attaches an image to the next turn, /quit exits.
    """
    from .experts import ExpertDispatcher
    from .gateway.service import GatewayState
    from .volumes import file_uri

    config = load_config(config_path)
    state = GatewayState(config)
    session = engine.new_session("chat", state.registry)
    vlm = state.vlm_for_session("chat")
    pending_images: list[str] = []
    click.echo("m3 chat - /image <path> to attach, /quit to exit")
    while True:
        try:
            line = click.prompt("you", prompt_suffix="> ")
        except (EOFError, click.Abort):
            break
        line = line.strip()
        if line in ("/quit", "/exit"):
            break
        if line.startswith("/image "):
            path = Path(line[len("/image "):].strip())
            if not path.exists():
                click.echo(f"no such file: {path}")
                continue
            pending_images.append(file_uri(path))
            click.echo(f"attached {path}")
            continue
        if not line:
            continue
        turn = engine.make_turn("user", line, images=tuple(pending_images))
        pending_images = []
        try:
            final = engine.run_turn(
                session,
                turn,
                vlm,
                state.registry,
                state.dispatcher,
                max_expert_rounds=config.max_expert_rounds,
                classification_threshold=config.classification_threshold,
                templates=state.templates,
            )
        except M3Error as exc:
            click.echo(f"error: {exc}")
            continue
        for entry in session.trigger_log[-2:]:
            if entry.status == "ok":
                click.echo(f"[expert {entry.event.keyword}({entry.event.argument}) ok]")
        click.echo(f"m3> {final}")


if __name__ == "__main__":
    main()
