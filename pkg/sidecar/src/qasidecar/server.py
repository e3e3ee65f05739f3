"""HTTP server speaking the reader wire protocol.

Request:  POST {"inputs": [{"qid", "question", "context"}, ...]}
Response: {"outputs": [{"qid", "no_answer_prob", "start_probs",
           "end_probs", "offsets", ("truncated")}, ...]}

Responses are serialized with sorted keys and fixed separators so golden
exchanges stay byte-stable.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


def render_response(outputs: list[dict]) -> bytes:
    return json.dumps({"outputs": outputs}, sort_keys=True, separators=(",", ":")).encode("utf-8")


class _Handler(BaseHTTPRequestHandler):
    server_version = "qasidecar/0.1"

    def do_GET(self):
        if self.path == "/healthz":
            self._reply(200, b'{"status":"ok"}')
        else:
            self._reply(404, b'{"error":"not found"}')

    def do_POST(self):
        try:
            length = int(self.headers.get("Content-Length", "0"))
            payload = json.loads(self.rfile.read(length))
            inputs = payload["inputs"]
            if not isinstance(inputs, list):
                raise ValueError("inputs must be a list")
            for inp in inputs:
                for key in ("qid", "question", "context"):
                    if key not in inp:
                        raise ValueError(f"input missing field {key!r}")
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            self._reply(400, json.dumps({"error": str(exc)}).encode("utf-8"))
            return
        outputs = self.server.reader.read_batch(inputs)  # type: ignore[attr-defined]
        self._reply(200, render_response(outputs))

    def _reply(self, status: int, body: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):  # tests and batch runs stay quiet
        pass


class ReaderServer:
    """Threaded HTTP server bound to a reader (model or stub)."""

    def __init__(self, reader, host: str = "127.0.0.1", port: int = 0):
        self.httpd = ThreadingHTTPServer((host, port), _Handler)
        self.httpd.reader = reader  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def endpoint(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}/"

    def start(self) -> "ReaderServer":
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()

    def serve_forever(self) -> None:
        self.httpd.serve_forever()
