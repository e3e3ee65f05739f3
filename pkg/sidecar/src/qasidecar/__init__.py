"""qasidecar: a minimal reader model server and trainer speaking the ehrqa
wire protocol."""

from .data import TrainingExample, load_squad_examples
from .losses import answerability_loss, span_loss, total_loss
from .model import (
    CharVocab,
    ModelConfig,
    ReaderModel,
    StubReader,
    TorchReader,
    load_checkpoint,
    save_checkpoint,
)
from .server import ReaderServer
from .train import TrainingConfig, finetune, read_metrics

__version__ = "0.1.0"

__all__ = [
    "CharVocab",
    "ModelConfig",
    "ReaderModel",
    "ReaderServer",
    "StubReader",
    "TorchReader",
    "TrainingConfig",
    "TrainingExample",
    "answerability_loss",
    "finetune",
    "load_checkpoint",
    "load_squad_examples",
    "read_metrics",
    "save_checkpoint",
    "span_loss",
    "total_loss",
]
