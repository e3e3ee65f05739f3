import numpy as np
import pytest
import torch

from qasidecar.model import (
    CLS,
    SEP,
    CharVocab,
    ModelConfig,
    ReaderModel,
    StubReader,
    TorchReader,
    encode_batch,
    load_checkpoint,
    save_checkpoint,
)


def test_vocab_round_trip():
    vocab = CharVocab.build(["abc", "bcd"])
    assert len(vocab) == 4 + 4  # specials + {a, b, c, d}
    assert vocab.encode("abz")[-1] == 3  # unknown char -> UNK


def test_encode_batch_layout():
    vocab = CharVocab.build(["what?", "ctx"])
    batch = encode_batch(vocab, [("what?", "ctx")], max_len=64)
    ids = batch.ids[0].tolist()
    assert ids[0] == CLS
    assert ids[6] == SEP  # after the 5-char question
    assert batch.context_lengths == [3]
    assert batch.truncated == [False]
    # wire position 0 is [CLS]; positions 1..3 are the context chars
    assert batch.wire_index[0, 0].item() == 0
    assert batch.wire_index[0, 1].item() == 7
    assert batch.wire_mask[0].tolist() == [True] * 4


def test_encode_batch_truncates_long_context():
    vocab = CharVocab.build(["q", "x" * 100])
    batch = encode_batch(vocab, [("q", "x" * 100)], max_len=24)
    assert batch.truncated == [True]
    assert batch.context_lengths[0] == 24 - 1 - 1 - 3 + 1  # budget = max_len - q - specials


def test_model_outputs_are_distributions():
    torch.manual_seed(0)
    vocab = CharVocab.build(["question one", "some context here"])
    cfg = ModelConfig(d_model=32, nhead=2, layers=1, max_len=64, vocab=vocab.mapping)
    model = ReaderModel(cfg)
    model.eval()
    batch = encode_batch(
        vocab,
        [("question one", "some context here"), ("question one", "tiny")],
        max_len=64,
    )
    with torch.no_grad():
        y1, start_probs, end_probs, y2 = model(batch)
    assert y1.shape == (2,) and y2.shape == (2,)
    assert torch.all((0 < y1) & (y1 < 1))
    for i, n in enumerate(batch.context_lengths):
        assert float(start_probs[i, : n + 1].sum()) == pytest.approx(1.0, abs=1e-5)
        assert float(end_probs[i, : n + 1].sum()) == pytest.approx(1.0, abs=1e-5)
        # no probability mass may leak onto padded wire positions
        assert float(start_probs[i, n + 1 :].sum()) == pytest.approx(0.0, abs=1e-6)


def test_torch_reader_wire_output():
    torch.manual_seed(1)
    vocab = CharVocab.build(["q?", "abcdef"])
    cfg = ModelConfig(d_model=32, nhead=2, layers=1, max_len=32, vocab=vocab.mapping)
    reader = TorchReader(ReaderModel(cfg), vocab)
    outputs = reader.read_batch([{"qid": "a", "question": "q?", "context": "abcdef"}])
    out = outputs[0]
    assert out["qid"] == "a"
    assert len(out["start_probs"]) == 7
    assert out["offsets"] == [[i, i + 1] for i in range(6)]
    assert sum(out["start_probs"]) == pytest.approx(1.0, abs=1e-6)
    assert sum(out["end_probs"]) == pytest.approx(1.0, abs=1e-6)
    assert reader.read_batch([]) == []


def test_stub_reader_modes():
    stub = StubReader()
    out = stub.read_batch([{"qid": "s", "question": "q?", "context": "hello"}])[0]
    assert out["start_probs"][1] == 1.0
    assert out["end_probs"][5] == 1.0
    assert out["no_answer_prob"] == 0.125
    broken = StubReader(mode="broken-sum")
    bad = broken.read_batch([{"qid": "s", "question": "q?", "context": "hello"}])[0]
    assert sum(bad["start_probs"]) != pytest.approx(1.0, abs=1e-6)


def test_stub_reader_truncation_flag():
    stub = StubReader(max_len=8)
    out = stub.read_batch([{"qid": "s", "question": "q?", "context": "x" * 20}])[0]
    assert out["truncated"] is True
    assert len(out["offsets"]) == 8


def test_checkpoint_round_trip(tmp_path):
    torch.manual_seed(2)
    vocab = CharVocab.build(["q?", "abcdef"])
    cfg = ModelConfig(d_model=32, nhead=2, layers=1, max_len=32, vocab=vocab.mapping)
    model = ReaderModel(cfg)
    save_checkpoint(str(tmp_path / "ckpt"), model, vocab)
    reloaded = load_checkpoint(str(tmp_path / "ckpt"))
    inputs = [{"qid": "a", "question": "q?", "context": "abcdef"}]
    model.eval()
    before = TorchReader(model, vocab).read_batch(inputs)[0]
    after = reloaded.read_batch(inputs)[0]
    assert np.allclose(before["start_probs"], after["start_probs"])
    assert np.allclose(before["end_probs"], after["end_probs"])
    assert before["no_answer_prob"] == pytest.approx(after["no_answer_prob"])
