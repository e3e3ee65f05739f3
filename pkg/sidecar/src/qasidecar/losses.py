"""Training losses for the two reading modules.

All probabilities arriving here are post-softmax/sigmoid; logs are clamped
at EPS so perfect one-hot predictions stay finite.
"""

from __future__ import annotations

import torch

EPS = 1e-12


def answerability_loss(no_answer_probs: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean binary cross-entropy of the no-answer probability against the
    0/1 no-answer labels."""
    if no_answer_probs.shape != labels.shape:
        raise ValueError(
            f"shape mismatch: {tuple(no_answer_probs.shape)} vs {tuple(labels.shape)}"
        )
    if no_answer_probs.numel() == 0:
        raise ValueError("answerability loss needs at least one example")
    p = no_answer_probs.clamp(EPS, 1.0 - EPS)
    y = labels.to(p.dtype)
    return -(y * p.log() + (1.0 - y) * (1.0 - p).log()).mean()


def span_loss(
    start_probs: torch.Tensor,
    end_probs: torch.Tensor,
    gold_start: torch.Tensor,
    gold_end: torch.Tensor,
) -> torch.Tensor:
    """Mean negative log-likelihood of the true start and end positions.

    ``start_probs``/``end_probs`` are (batch, positions) distributions;
    gold positions index into them (position 0 is the null sentinel).
    """
    if start_probs.ndim != 2 or end_probs.shape != start_probs.shape:
        raise ValueError("start/end probability matrices must share a (batch, positions) shape")
    rows = torch.arange(start_probs.shape[0], device=start_probs.device)
    s = start_probs[rows, gold_start].clamp_min(EPS)
    e = end_probs[rows, gold_end].clamp_min(EPS)
    return -(s.log() + e.log()).mean()


def total_loss(l_span: torch.Tensor, l_ans2: torch.Tensor, alpha1: float, alpha2: float) -> torch.Tensor:
    """Weighted sum of the span loss and the intensive module's
    answerability loss."""
    return alpha1 * l_span + alpha2 * l_ans2
