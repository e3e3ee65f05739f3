"""Command-line surface: dataset generation, extraction, evaluation,
inspection, and threshold sweeping."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor

import click

from .config import NOISY_ORACLE, ORACLE, REMOTE, PipelineConfig
from .core import load_documents
from .errors import ConfigError, PipelineError
from .metrics import align_records, evaluate_items
from .postprocess import (
    build_gold_records,
    extract_document,
    read_records,
    write_records,
)
from .preprocess import Diagnostics, assemble_dataset, emit_squad, parse_squad, split_dataset
from .reader import (
    CorpusOracleBackend,
    ReaderInput,
    RemoteBackend,
    compute_scores,
    noisy_oracle_read,
    oracle_read,
)


@click.group()
def main():
    """Annotation-to-QA dataset pipeline with extraction and evaluation."""


def _load_config(path: str) -> PipelineConfig:
    try:
        return PipelineConfig.load(path)
    except ConfigError as exc:
        raise click.ClickException(str(exc)) from exc


config_option = click.option(
    "--config",
    "config_path",
    envvar="EHRQA_CONFIG",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
    help="Pipeline config JSON (or set EHRQA_CONFIG).",
)


@main.command("generate-dataset")
@config_option
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("output_dir", type=click.Path(file_okay=False))
@click.option("--gold/--no-gold", default=True, help="Also write gold extraction records.")
def cmd_generate_dataset(config_path: str, input_path: str, output_dir: str, gold: bool):
    """Convert annotated documents into SQuAD-2.0 train/dev/test files."""
    import os

    config = _load_config(config_path)
    types = config.type_registry()
    registry = config.template_registry()
    try:
        docs = load_documents(input_path, types, config.sentence_delimiters)
    except PipelineError as exc:
        raise click.ClickException(f"{input_path}: {exc}") from exc

    diagnostics = Diagnostics()
    examples = assemble_dataset(docs, registry, types, config, diagnostics)
    split = split_dataset(examples, config.split_ratios, config.split_seed)
    os.makedirs(output_dir, exist_ok=True)
    for name, part in (("train", split.train), ("dev", split.dev), ("test", split.test)):
        emit_squad(list(part), os.path.join(output_dir, f"{name}.json"))
    if gold:
        records = []
        for doc in docs:
            records.extend(build_gold_records(doc, registry, types, config))
        write_records(records, os.path.join(output_dir, "gold_records.jsonl"))

    kinds: dict[str, int] = {}
    for ex in examples:
        kind = ex.provenance.get("kind", "relation")
        if ex.is_impossible and kind != "impossible":
            kind = "natural-empty"
        kinds[kind] = kinds.get(kind, 0) + 1
    summary = {
        "documents": len(docs),
        "examples": len(examples),
        "by_kind": kinds,
        "impossible": sum(1 for ex in examples if ex.is_impossible),
        "split_sizes": {
            "train": len(split.train),
            "dev": len(split.dev),
            "test": len(split.test),
        },
        "warnings": diagnostics.warnings,
    }
    with open(os.path.join(output_dir, "summary.json"), "w", encoding="utf-8") as handle:
        json.dump(summary, handle, ensure_ascii=False, indent=2, sort_keys=True)
        handle.write("\n")
    click.echo(
        f"wrote {len(examples)} examples ({summary['impossible']} impossible) from "
        f"{len(docs)} documents: train={len(split.train)} dev={len(split.dev)} "
        f"test={len(split.test)}"
    )
    for warning in diagnostics.warnings:
        click.echo(f"warning: {warning}", err=True)


def _backend_for(doc, config: PipelineConfig, registry, types):
    selection = config.reader
    if selection.backend == ORACLE:
        return CorpusOracleBackend(doc, registry, types, config)
    if selection.backend == NOISY_ORACLE:
        return CorpusOracleBackend(
            doc, registry, types, config, noise=selection.noise, seed=selection.seed
        )
    raise AssertionError(selection.backend)


@main.command("extract")
@config_option
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("output_path", type=click.Path(dir_okay=False))
def cmd_extract(config_path: str, input_path: str, output_path: str):
    """Run two-stage comprehensive extraction over documents."""
    config = _load_config(config_path)
    types = config.type_registry()
    registry = config.template_registry()
    selection = config.reader

    diagnostics: list[str] = []
    if selection.backend == REMOTE:
        if not selection.endpoint:
            raise click.ClickException("remote backend selected but no endpoint configured")
        docs = _load_raw_docs(input_path)
        shared = RemoteBackend(selection.endpoint, selection.timeout, selection.retries)

        def run(doc):
            return extract_document(
                doc["text"], doc["doc_kind"], doc["doc_id"], registry, types, shared, config,
                diagnostics=diagnostics,
            )

    else:
        try:
            annotated = load_documents(input_path, types, config.sentence_delimiters)
        except PipelineError as exc:
            raise click.ClickException(
                f"{input_path}: {exc} (oracle backends require annotated input)"
            ) from exc

        def run(doc):
            backend = _backend_for(doc, config, registry, types)
            return extract_document(
                doc.text, doc.doc_kind, doc.doc_id, registry, types, backend, config,
                diagnostics=diagnostics,
            )

        docs = annotated
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            per_doc = list(pool.map(run, docs))
    else:
        per_doc = [run(doc) for doc in docs]
    records = [record for batch in per_doc for record in batch]
    write_records(records, output_path)
    click.echo(f"wrote {len(records)} records for {len(docs)} documents")
    for warning in diagnostics:
        click.echo(f"warning: {warning}", err=True)


def _load_raw_docs(path: str) -> list[dict]:
    docs = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            for key in ("doc_id", "doc_kind", "text"):
                if key not in record:
                    raise click.ClickException(f"{path}: line {lineno}: missing field {key!r}")
            docs.append(record)
    return docs


@main.command("evaluate")
@config_option
@click.argument("predictions_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("gold_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None)
def cmd_evaluate(config_path: str, predictions_path: str, gold_path: str, report_path: str | None):
    """Score extraction records against gold records (matched by doc and key)."""
    config = _load_config(config_path)
    items, warnings = align_records(
        read_records(predictions_path),
        read_records(gold_path),
        set(config.ner_queryable_types),
    )
    report = evaluate_items(items, config.separator)
    click.echo(report.render_table())
    if report_path:
        report.to_json(report_path)
    for warning in warnings:
        click.echo(f"warning: {warning}", err=True)


@main.command("inspect")
@config_option
@click.argument("dataset_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("qid")
def cmd_inspect(config_path: str, dataset_path: str, qid: str):
    """Pretty-print one example with its spans highlighted."""
    _load_config(config_path)
    examples = parse_squad(dataset_path)
    matches = [ex for ex in examples if ex.qid == qid]
    if not matches:
        raise click.ClickException(f"qid {qid!r} not found in {dataset_path}")
    ex = matches[0]
    marked = ex.context
    spans = [(a.answer_start, a.answer_start + len(a.text), "«", "»") for a in ex.answers]
    spans += [
        (a.answer_start, a.answer_start + len(a.text), "‹", "›") for a in ex.plausible_answers
    ]
    for start, end, open_mark, close_mark in sorted(spans, reverse=True):
        marked = marked[:start] + open_mark + marked[start:end] + close_mark + marked[end:]
    click.echo(f"qid:         {ex.qid}")
    click.echo(f"doc:         {ex.doc_id}")
    click.echo(f"question:    {ex.question}")
    click.echo(f"granularity: {ex.granularity} {ex.context_span.start}-{ex.context_span.end}")
    if ex.provenance:
        provenance = ", ".join(f"{k}={v}" for k, v in sorted(ex.provenance.items()))
        click.echo(f"provenance:  {provenance}")
    click.echo(f"impossible:  {ex.is_impossible}")
    click.echo(f"context:     {marked}")
    if ex.answers:
        click.echo("answers:     " + "; ".join(f"{a.text!r}@{a.answer_start}" for a in ex.answers))
    if ex.plausible_answers:
        click.echo(
            "plausible:   "
            + "; ".join(f"{a.text!r}@{a.answer_start}" for a in ex.plausible_answers)
        )


@main.command("sweep-threshold")
@config_option
@click.argument("dataset_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--low", default=-2.0, show_default=True)
@click.option("--high", default=2.0, show_default=True)
@click.option("--steps", default=21, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
def cmd_sweep_threshold(
    config_path: str, dataset_path: str, low: float, high: float, steps: int, out_path: str | None
):
    """Evaluate answerability accuracy across a threshold grid on a dev file."""
    config = _load_config(config_path)
    if config.reader.backend == REMOTE:
        raise click.ClickException("sweep-threshold runs on oracle or noisy-oracle backends")
    examples = parse_squad(dataset_path)
    if not examples:
        raise click.ClickException(f"{dataset_path} holds no examples")
    scored = []
    for ex in examples:
        inp = ReaderInput(qid=ex.qid, question=ex.question, context=ex.context)
        if config.reader.backend == NOISY_ORACLE:
            out = noisy_oracle_read(inp, ex, config.reader.noise, config.reader.seed)
        else:
            out = oracle_read(inp, ex)
        scores = compute_scores(out, config.verifier)
        scored.append((scores.score_diff, scores.mixture, not ex.is_impossible))

    grid = [low + (high - low) * i / (steps - 1) for i in range(steps)] if steps > 1 else [low]
    rows = []
    for delta in grid:
        correct = 0
        for diff, mixture, gold_answerable in scored:
            null_signal = diff > delta and mixture > delta
            answerable = (
                null_signal
                if config.verifier.polarity == "answer-when-above"
                else not null_signal
            )
            correct += answerable == gold_answerable
        rows.append({"delta": delta, "accuracy": correct / len(scored)})
    best = max(rows, key=lambda r: r["accuracy"])
    click.echo(f"{'delta':>8}  accuracy")
    for row in rows:
        marker = "  <- best" if row is best else ""
        click.echo(f"{row['delta']:8.3f}  {row['accuracy']:.4f}{marker}")
    if out_path:
        with open(out_path, "w", encoding="utf-8") as handle:
            json.dump({"grid": rows, "best": best}, handle, indent=2, sort_keys=True)
            handle.write("\n")


if __name__ == "__main__":
    main()
