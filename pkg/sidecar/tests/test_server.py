import json

import pytest
import requests

from ehrqa.errors import ProtocolError
from ehrqa.reader import ReaderInput, VerifierConfig, decode_span, remote_read, validate_reader_output

from qasidecar.model import StubReader
from qasidecar.server import ReaderServer


@pytest.fixture()
def stub_server():
    server = ReaderServer(StubReader()).start()
    yield server
    server.stop()


def test_healthz(stub_server):
    response = requests.get(stub_server.endpoint + "healthz", timeout=5)
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


def test_golden_exchange_byte_stable(stub_server, golden_exchange_path):
    golden = json.loads(open(golden_exchange_path, encoding="utf-8").read())
    response = requests.post(stub_server.endpoint, json=golden["request"], timeout=5)
    assert response.status_code == 200
    assert response.content.decode("utf-8") == golden["response"]


def test_primary_remote_read_against_stub(stub_server):
    batch = [
        ReaderInput(qid="a", question="What is here?", context="the liver shows effusion。"),
        ReaderInput(qid="b", question="And here?", context="no findings。"),
    ]
    outputs = remote_read(batch, stub_server.endpoint)
    assert [o.qid for o in outputs] == ["a", "b"]
    for inp, out in zip(batch, outputs):
        validate_reader_output(out, inp.context)
    # the stub always claims the whole context
    span = decode_span(outputs[0], VerifierConfig(max_answer_chars=1000))
    assert span is not None and (span.start, span.end) == (0, len(batch[0].context))


def test_malformed_stub_rejected_by_primary():
    server = ReaderServer(StubReader(mode="broken-sum")).start()
    try:
        with pytest.raises(ProtocolError, match="start_probs"):
            remote_read(
                [ReaderInput(qid="a", question="q?", context="hello")], server.endpoint
            )
    finally:
        server.stop()


def test_empty_inputs_yield_empty_outputs(stub_server):
    response = requests.post(stub_server.endpoint, json={"inputs": []}, timeout=5)
    assert response.status_code == 200
    assert response.json() == {"outputs": []}


def test_bad_request_is_a_400(stub_server):
    response = requests.post(stub_server.endpoint, json={"nope": 1}, timeout=5)
    assert response.status_code == 400
    response = requests.post(
        stub_server.endpoint, json={"inputs": [{"qid": "x"}]}, timeout=5
    )
    assert response.status_code == 400
    assert "question" in response.json()["error"]


def test_truncation_flag_over_the_wire():
    server = ReaderServer(StubReader(max_len=8)).start()
    try:
        response = requests.post(
            server.endpoint,
            json={"inputs": [{"qid": "a", "question": "q?", "context": "x" * 50}]},
            timeout=5,
        )
        out = response.json()["outputs"][0]
        assert out["truncated"] is True
        assert len(out["offsets"]) == 8
    finally:
        server.stop()
