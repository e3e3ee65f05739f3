"""Command-line surface for the reader sidecar: serve a model (or the
protocol stub) and fine-tune on generated SQuAD files."""

from __future__ import annotations

import json

import click

from .data import load_squad_examples
from .model import StubReader, load_checkpoint
from .server import ReaderServer
from .train import TrainingConfig, finetune


@click.group()
def main():
    """Reader model server and trainer."""


@main.command("serve")
@click.option("--model", "model_spec", default="stub", show_default=True,
              help="'stub', 'stub-broken', or a checkpoint directory.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8700, show_default=True)
def cmd_serve(model_spec: str, host: str, port: int):
    """Serve the wire protocol over HTTP."""
    if model_spec == "stub":
        reader = StubReader()
    elif model_spec == "stub-broken":
        reader = StubReader(mode="broken-sum")
    else:
        reader = load_checkpoint(model_spec)
    server = ReaderServer(reader, host=host, port=port)
    click.echo(f"serving {model_spec} at {server.endpoint}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()


@main.command("train")
@click.argument("datasets", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="TrainingConfig JSON; fields default when omitted.")
@click.option("--steps", type=int, default=None, help="Override the step budget.")
@click.option("--resume-from", type=click.Path(file_okay=False), default=None)
def cmd_train(datasets, out_dir: str, config_path: str | None, steps: int | None, resume_from):
    """Fine-tune the reader on SQuAD-2.0 files from the dataset generator."""
    cfg = TrainingConfig.load(config_path) if config_path else TrainingConfig()
    if steps is not None:
        cfg.max_steps = steps
    try:
        examples = load_squad_examples(list(datasets))
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    if not examples:
        raise click.ClickException("no training examples in the given datasets")
    path = finetune(examples, cfg, out_dir, resume_from=resume_from)
    with open(f"{path}/training.json", encoding="utf-8") as handle:
        steps_done = json.load(handle)["steps"]
    click.echo(f"trained to step {steps_done}; checkpoint at {path}")


if __name__ == "__main__":
    main()
