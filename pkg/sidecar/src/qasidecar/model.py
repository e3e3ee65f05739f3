"""The reader model: a small character-level bidirectional transformer
encoder with a sketchy (answerability) head and an intensive (span +
answerability) head, plus a deterministic stub for protocol testing.

Character-level tokenization keeps the wire protocol's offset map trivial:
token i of the context is exactly character i.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

import torch
from torch import nn

PAD, CLS, SEP, UNK = 0, 1, 2, 3
SPECIALS = {"<pad>": PAD, "<cls>": CLS, "<sep>": SEP, "<unk>": UNK}


@dataclass
class ModelConfig:
    d_model: int = 64
    nhead: int = 4
    layers: int = 2
    max_len: int = 384
    shared_encoder: bool = True
    vocab: dict[str, int] = field(default_factory=lambda: dict(SPECIALS))


class CharVocab:
    """Character vocabulary with reserved special ids."""

    def __init__(self, mapping: dict[str, int]):
        self.mapping = dict(mapping)

    @classmethod
    def build(cls, texts: list[str]) -> "CharVocab":
        mapping = dict(SPECIALS)
        for text in texts:
            for ch in text:
                if ch not in mapping:
                    mapping[ch] = len(mapping)
        return cls(mapping)

    def __len__(self) -> int:
        return len(self.mapping)

    def encode(self, text: str) -> list[int]:
        return [self.mapping.get(ch, UNK) for ch in text]


@dataclass
class EncodedBatch:
    """Padded model input plus the index map back to wire positions."""

    ids: torch.Tensor  # (batch, seq)
    attention_mask: torch.Tensor  # (batch, seq) bool, True = real token
    wire_index: torch.Tensor  # (batch, max_wire) sequence index of wire position p
    wire_mask: torch.Tensor  # (batch, max_wire) bool, True = position exists
    context_lengths: list[int]
    truncated: list[bool]


def encode_batch(
    vocab: CharVocab,
    pairs: list[tuple[str, str]],
    max_len: int,
) -> EncodedBatch:
    """Encode (question, context) pairs as [CLS] q [SEP] c [SEP].

    Contexts that would overflow ``max_len`` are clipped and flagged.  Wire
    position 0 maps to [CLS]; positions 1..n map to the kept context
    characters.
    """
    rows = []
    spans = []
    truncated = []
    for question, context in pairs:
        q_ids = vocab.encode(question)
        budget = max_len - len(q_ids) - 3
        if budget < 1:
            q_keep = max(1, max_len - 4)
            q_ids = q_ids[:q_keep]
            budget = max_len - len(q_ids) - 3
        clipped = context[:budget]
        truncated.append(len(clipped) < len(context))
        c_ids = vocab.encode(clipped)
        ids = [CLS] + q_ids + [SEP] + c_ids + [SEP]
        context_start = 1 + len(q_ids) + 1
        rows.append(ids)
        spans.append((context_start, len(c_ids)))
    seq_len = max(len(r) for r in rows)
    max_wire = max(1 + n for _, n in spans)
    ids = torch.full((len(rows), seq_len), PAD, dtype=torch.long)
    attention = torch.zeros((len(rows), seq_len), dtype=torch.bool)
    wire_index = torch.zeros((len(rows), max_wire), dtype=torch.long)
    wire_mask = torch.zeros((len(rows), max_wire), dtype=torch.bool)
    for i, (row, (context_start, n)) in enumerate(zip(rows, spans)):
        ids[i, : len(row)] = torch.tensor(row, dtype=torch.long)
        attention[i, : len(row)] = True
        wire_index[i, 0] = 0  # [CLS] carries the null sentinel
        wire_mask[i, 0] = True
        for p in range(n):
            wire_index[i, 1 + p] = context_start + p
            wire_mask[i, 1 + p] = True
    return EncodedBatch(
        ids=ids,
        attention_mask=attention,
        wire_index=wire_index,
        wire_mask=wire_mask,
        context_lengths=[n for _, n in spans],
        truncated=truncated,
    )


class Encoder(nn.Module):
    def __init__(self, cfg: ModelConfig, vocab_size: int):
        super().__init__()
        self.embedding = nn.Embedding(vocab_size, cfg.d_model, padding_idx=PAD)
        self.positions = nn.Embedding(cfg.max_len, cfg.d_model)
        layer = nn.TransformerEncoderLayer(
            d_model=cfg.d_model,
            nhead=cfg.nhead,
            dim_feedforward=4 * cfg.d_model,
            batch_first=True,
            dropout=0.1,
        )
        self.transformer = nn.TransformerEncoder(layer, cfg.layers, enable_nested_tensor=False)

    def forward(self, ids: torch.Tensor, attention_mask: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(ids.shape[1], device=ids.device).unsqueeze(0)
        hidden = self.embedding(ids) + self.positions(positions)
        return self.transformer(hidden, src_key_padding_mask=~attention_mask)


def _masked_mean(hidden: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    weights = mask.unsqueeze(-1).to(hidden.dtype)
    return (hidden * weights).sum(dim=1) / weights.sum(dim=1).clamp_min(1.0)


class ReaderModel(nn.Module):
    """Two reading modules over one (or two) bidirectional encoders.

    The sketchy module produces the coarse no-answer probability; the
    intensive module produces start/end distributions over wire positions
    (null sentinel + context characters) and its own no-answer probability.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        vocab_size = max(len(cfg.vocab), 8)
        self.sketchy_encoder = Encoder(cfg, vocab_size)
        self.intensive_encoder = (
            self.sketchy_encoder if cfg.shared_encoder else Encoder(cfg, vocab_size)
        )
        self.sketchy_head = nn.Linear(cfg.d_model, 1)
        self.start_head = nn.Linear(cfg.d_model, 1)
        self.end_head = nn.Linear(cfg.d_model, 1)
        self.ans2_head = nn.Linear(cfg.d_model, 1)

    def forward(self, batch: EncodedBatch):
        sketchy_hidden = self.sketchy_encoder(batch.ids, batch.attention_mask)
        no_answer_1 = torch.sigmoid(
            self.sketchy_head(_masked_mean(sketchy_hidden, batch.attention_mask)).squeeze(-1)
        )
        intensive_hidden = (
            sketchy_hidden
            if self.cfg.shared_encoder
            else self.intensive_encoder(batch.ids, batch.attention_mask)
        )
        index = batch.wire_index.unsqueeze(-1).expand(-1, -1, intensive_hidden.shape[-1])
        wire_hidden = intensive_hidden.gather(1, index)
        neg_inf = torch.finfo(wire_hidden.dtype).min
        start_logits = self.start_head(wire_hidden).squeeze(-1).masked_fill(~batch.wire_mask, neg_inf)
        end_logits = self.end_head(wire_hidden).squeeze(-1).masked_fill(~batch.wire_mask, neg_inf)
        start_probs = torch.softmax(start_logits, dim=-1)
        end_probs = torch.softmax(end_logits, dim=-1)
        no_answer_2 = torch.sigmoid(
            self.ans2_head(_masked_mean(intensive_hidden, batch.attention_mask)).squeeze(-1)
        )
        return no_answer_1, start_probs, end_probs, no_answer_2


class TorchReader:
    """Inference wrapper turning (qid, question, context) batches into wire
    protocol output dicts."""

    def __init__(self, model: ReaderModel, vocab: CharVocab):
        self.model = model
        self.vocab = vocab

    @torch.no_grad()
    def read_batch(self, inputs: list[dict]) -> list[dict]:
        if not inputs:
            return []
        self.model.eval()
        batch = encode_batch(
            self.vocab,
            [(inp["question"], inp["context"]) for inp in inputs],
            self.model.cfg.max_len,
        )
        no_answer, start_probs, end_probs, _ = self.model(batch)
        outputs = []
        for i, inp in enumerate(inputs):
            n = batch.context_lengths[i]
            starts = start_probs[i, : n + 1]
            ends = end_probs[i, : n + 1]
            starts = (starts / starts.sum()).tolist()
            ends = (ends / ends.sum()).tolist()
            out = {
                "qid": inp["qid"],
                "no_answer_prob": float(no_answer[i]),
                "start_probs": starts,
                "end_probs": ends,
                "offsets": [[j, j + 1] for j in range(n)],
            }
            if batch.truncated[i]:
                out["truncated"] = True
            outputs.append(out)
        return outputs


class StubReader:
    """Deterministic stand-in model for protocol fixtures.

    Always claims the span covering the whole context: one-hot start at
    position 1 and end at position n, with a fixed no-answer probability.
    ``mode='broken-sum'`` deliberately violates the simplex invariant so
    clients' rejection paths can be exercised.
    """

    def __init__(self, mode: str = "ok", max_len: int = 384):
        self.mode = mode
        self.max_len = max_len

    def read_batch(self, inputs: list[dict]) -> list[dict]:
        outputs = []
        for inp in inputs:
            context = inp["context"]
            clipped = context[: self.max_len]
            n = max(len(clipped), 1)
            starts = [0.0] * (n + 1)
            ends = [0.0] * (n + 1)
            starts[1] = 1.0
            ends[n] = 1.0
            if self.mode == "broken-sum":
                starts[1] = 0.5
            out = {
                "qid": inp["qid"],
                "no_answer_prob": 0.125,
                "start_probs": starts,
                "end_probs": ends,
                "offsets": [[j, j + 1] for j in range(n)],
            }
            if len(clipped) < len(context):
                out["truncated"] = True
            outputs.append(out)
        return outputs


# --- checkpointing -----------------------------------------------------------


def save_checkpoint(path: str, model: ReaderModel, vocab: CharVocab, extra: dict | None = None) -> None:
    os.makedirs(path, exist_ok=True)
    torch.save(model.state_dict(), os.path.join(path, "weights.pt"))
    cfg = asdict(model.cfg)
    cfg["vocab"] = vocab.mapping
    with open(os.path.join(path, "model.json"), "w", encoding="utf-8") as handle:
        json.dump(cfg, handle, ensure_ascii=False, indent=2, sort_keys=True)
    if extra is not None:
        with open(os.path.join(path, "training.json"), "w", encoding="utf-8") as handle:
            json.dump(extra, handle, ensure_ascii=False, indent=2, sort_keys=True)


def load_checkpoint(path: str) -> TorchReader:
    with open(os.path.join(path, "model.json"), encoding="utf-8") as handle:
        raw = json.load(handle)
    cfg = ModelConfig(**raw)
    model = ReaderModel(cfg)
    model.load_state_dict(torch.load(os.path.join(path, "weights.pt"), weights_only=True))
    model.eval()
    return TorchReader(model, CharVocab(cfg.vocab))
