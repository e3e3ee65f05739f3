"""Fine-tuning loop for the two reading modules.

The sketchy module trains on the coarse answerability cross-entropy; the
intensive module trains on the weighted sum of span loss and its own
answerability loss.  Batches are drawn from a per-step seeded stream, so a
resumed run reproduces the exact batch (and loss) of any step index.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass

import numpy as np
import torch

from .data import TrainingExample
from .losses import answerability_loss, span_loss, total_loss
from .model import CharVocab, EncodedBatch, ModelConfig, ReaderModel, encode_batch, save_checkpoint


@dataclass
class TrainingConfig:
    alpha1: float = 1.0
    alpha2: float = 0.8
    epochs: int = 1
    max_steps: int | None = None
    batch_size: int = 8
    max_len: int = 384
    lr: float = 3e-4
    seed: int = 0
    d_model: int = 64
    nhead: int = 4
    layers: int = 2
    shared_encoder: bool = True

    def __post_init__(self):
        if self.alpha1 <= 0 or self.alpha2 < 0:
            raise ValueError("alpha1 must be positive and alpha2 nonnegative")

    @classmethod
    def load(cls, path: str) -> "TrainingConfig":
        with open(path, encoding="utf-8") as handle:
            return cls(**json.load(handle))


def _batch_for_step(
    examples: list[TrainingExample],
    vocab: CharVocab,
    cfg: TrainingConfig,
    step: int,
) -> tuple[EncodedBatch, torch.Tensor, torch.Tensor, torch.Tensor]:
    rng = np.random.default_rng(cfg.seed * 1_000_003 + step)
    picks = rng.integers(0, len(examples), size=min(cfg.batch_size, len(examples)))
    chosen = [examples[i] for i in picks]
    batch = encode_batch(vocab, [(ex.question, ex.context) for ex in chosen], cfg.max_len)
    golds, labels = [], []
    for ex, kept in zip(chosen, batch.context_lengths):
        if ex.no_answer_label or ex.gold_end > kept:
            # answers clipped away by truncation train as unanswerable
            golds.append((0, 0))
            labels.append(1)
        else:
            golds.append((ex.gold_start, ex.gold_end))
            labels.append(ex.no_answer_label)
    gold_start = torch.tensor([g[0] for g in golds], dtype=torch.long)
    gold_end = torch.tensor([g[1] for g in golds], dtype=torch.long)
    no_answer = torch.tensor(labels, dtype=torch.float32)
    return batch, gold_start, gold_end, no_answer


def finetune(
    examples: list[TrainingExample],
    cfg: TrainingConfig,
    out_dir: str,
    resume_from: str | None = None,
) -> str:
    """Train on the given examples and write a checkpoint plus a per-step
    metrics log (one JSON record per step) under ``out_dir``.

    Checkpoints carry optimizer and RNG state, so a resumed run reproduces
    the very losses an uninterrupted run would have logged.
    """
    if not examples:
        raise ValueError("training requires at least one example")
    torch.manual_seed(cfg.seed)
    if resume_from is None:
        vocab = CharVocab.build([ex.question + ex.context for ex in examples])
        model_cfg = ModelConfig(
            d_model=cfg.d_model,
            nhead=cfg.nhead,
            layers=cfg.layers,
            max_len=cfg.max_len,
            shared_encoder=cfg.shared_encoder,
            vocab=vocab.mapping,
        )
        model = ReaderModel(model_cfg)
        optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
        start_step = 0
    else:
        from .model import load_checkpoint

        reader = load_checkpoint(resume_from)
        model, vocab = reader.model, reader.vocab
        optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
        optimizer.load_state_dict(
            torch.load(os.path.join(resume_from, "optimizer.pt"), weights_only=True)
        )
        torch.set_rng_state(torch.load(os.path.join(resume_from, "rng.pt"), weights_only=True))
        with open(os.path.join(resume_from, "training.json"), encoding="utf-8") as handle:
            start_step = json.load(handle)["steps"]

    steps_per_epoch = max(1, (len(examples) + cfg.batch_size - 1) // cfg.batch_size)
    n_steps = cfg.max_steps if cfg.max_steps is not None else cfg.epochs * steps_per_epoch

    os.makedirs(out_dir, exist_ok=True)
    log_path = os.path.join(out_dir, "metrics.jsonl")
    model.train()
    with open(log_path, "w", encoding="utf-8") as log:
        for step in range(start_step, start_step + n_steps):
            batch, gold_start, gold_end, no_answer = _batch_for_step(examples, vocab, cfg, step)
            optimizer.zero_grad()
            y1, start_probs, end_probs, y2 = model(batch)
            l_ans1 = answerability_loss(y1, no_answer)
            l_span = span_loss(start_probs, end_probs, gold_start, gold_end)
            l_ans2 = answerability_loss(y2, no_answer)
            l_intensive = total_loss(l_span, l_ans2, cfg.alpha1, cfg.alpha2)
            loss = l_intensive + l_ans1
            loss.backward()
            optimizer.step()
            log.write(
                json.dumps(
                    {
                        "step": step,
                        "loss_total": loss.item(),
                        "loss_intensive": l_intensive.item(),
                        "loss_span": l_span.item(),
                        "loss_ans1": l_ans1.item(),
                        "loss_ans2": l_ans2.item(),
                    },
                    sort_keys=True,
                )
                + "\n"
            )

    save_checkpoint(
        out_dir,
        model,
        vocab,
        extra={"steps": start_step + n_steps, "config": asdict(cfg)},
    )
    torch.save(optimizer.state_dict(), os.path.join(out_dir, "optimizer.pt"))
    torch.save(torch.get_rng_state(), os.path.join(out_dir, "rng.pt"))
    return out_dir


def read_metrics(out_dir: str) -> list[dict]:
    records = []
    with open(os.path.join(out_dir, "metrics.jsonl"), encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
