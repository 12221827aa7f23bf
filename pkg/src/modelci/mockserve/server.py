"""Synthetic serving backend for desk-scale verification.

Loads a toy-format model and answers inference requests with shape-correct
zero outputs after sleeping per a configurable latency model:

    service_ms(batch) = base_ms + per_sample_ms * batch + U(0, jitter_ms)

A fixed seed makes the jitter sequence reproducible. Two protocols:

- rest: HTTP; POST /predict with {"inputs": [[...], ...]}, GET /health
- grpc-style: length-prefixed TCP; each frame is a 4-byte big-endian
  length followed by a JSON object ({"kind": "predict"|"health", ...})

Each connection handles one request at a time; concurrent connections run
independently, which keeps the concurrency/throughput relationship
analytically predictable.
"""

from __future__ import annotations

import json
import random
import socket
import socketserver
import struct
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from modelci.converter import toyformat

_FRAME_LEN = struct.Struct(">I")
MAX_FRAME = 64 * 1024 * 1024


@dataclass
class LatencyModel:
    base_ms: float = 0.0
    per_sample_ms: float = 0.0
    jitter_ms: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if min(self.base_ms, self.per_sample_ms, self.jitter_ms) < 0:
            raise ValueError("latency model parameters must be >= 0")
        self._rng = random.Random(self.seed)
        self._lock = threading.Lock()

    def service_ms(self, batch: int) -> float:
        jitter = 0.0
        if self.jitter_ms > 0:
            with self._lock:
                jitter = self._rng.uniform(0, self.jitter_ms)
        return self.base_ms + self.per_sample_ms * batch + jitter


class FaultScript:
    """Timed health flips, loaded from lines of ``<t_ms> <action>`` where
    action is health_fail or health_ok. State at time t is the last action
    whose timestamp has passed."""

    ACTIONS = {"health_fail": False, "health_ok": True}

    def __init__(self, events: list[tuple[float, str]]):
        for _, action in events:
            if action not in self.ACTIONS:
                raise ValueError(f"unknown fault action '{action}'")
        self.events = sorted(events)

    @classmethod
    def from_file(cls, path: str | Path) -> "FaultScript":
        events = []
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            t_ms, action = line.split()
            events.append((float(t_ms), action))
        return cls(events)

    def healthy_at(self, elapsed_ms: float) -> bool:
        healthy = True
        for t_ms, action in self.events:
            if t_ms <= elapsed_ms:
                healthy = self.ACTIONS[action]
        return healthy


class MockServer:
    """One model, one protocol, one OS-assigned port."""

    def __init__(self, model_bytes: bytes, latency: LatencyModel,
                 protocol: str = "rest", host: str = "127.0.0.1",
                 fault_script: FaultScript | None = None):
        self.graph = toyformat.load_model(model_bytes)
        self.in_dim, self.out_dim = toyformat.model_dims(self.graph)
        self.latency = latency
        self.protocol = protocol
        self.fault_script = fault_script or FaultScript([])
        self.started_at = time.monotonic()
        if protocol == "rest":
            self._server = _RestServer((host, 0), _RestHandler, self)
        elif protocol == "grpc-style":
            self._server = _FrameServer((host, 0), _FrameHandler, self)
        else:
            raise ValueError(f"unknown protocol '{protocol}'")
        self.port = self._server.server_address[1]

    # -- model behavior shared by both protocols --

    def healthy(self) -> bool:
        elapsed_ms = (time.monotonic() - self.started_at) * 1000
        return self.fault_script.healthy_at(elapsed_ms)

    def predict(self, inputs) -> dict:
        if not isinstance(inputs, list) or not inputs:
            raise ValueError("batch must be a non-empty list of samples")
        batch = len(inputs)
        service_ms = self.latency.service_ms(batch)
        time.sleep(service_ms / 1000.0)
        return {
            "outputs": [[0.0] * self.out_dim for _ in range(batch)],
            "batch": batch,
            "service_ms": service_ms,
        }

    def serve_forever(self):
        self._server.serve_forever(poll_interval=0.05)

    def shutdown(self):
        self._server.shutdown()
        self._server.server_close()


class _RestServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, addr, handler, mock: MockServer):
        super().__init__(addr, handler)
        self.mock = mock


class _RestHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        pass

    def _send_json(self, status: int, payload: dict):
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/health":
            if self.server.mock.healthy():
                self._send_json(200, {"status": "ok"})
            else:
                self._send_json(503, {"status": "failing"})
        else:
            self._send_json(404, {"error": "not found"})

    def do_POST(self):
        if self.path != "/predict":
            self._send_json(404, {"error": "not found"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            payload = json.loads(self.rfile.read(length) or b"{}")
            result = self.server.mock.predict(payload.get("inputs"))
        except (ValueError, json.JSONDecodeError) as exc:
            self._send_json(400, {"error": str(exc)})
            return
        self._send_json(200, result)


class _FrameServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, addr, handler, mock: MockServer):
        super().__init__(addr, handler)
        self.mock = mock


def read_frame(sock: socket.socket) -> bytes | None:
    header = _read_exact(sock, _FRAME_LEN.size)
    if header is None:
        return None
    (length,) = _FRAME_LEN.unpack(header)
    if length > MAX_FRAME:
        raise ValueError(f"frame of {length} bytes exceeds limit")
    return _read_exact(sock, length)


def write_frame(sock: socket.socket, payload: bytes) -> None:
    sock.sendall(_FRAME_LEN.pack(len(payload)) + payload)


def _read_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


class _FrameHandler(socketserver.BaseRequestHandler):
    def handle(self):
        mock = self.server.mock
        while True:
            try:
                raw = read_frame(self.request)
            except (ConnectionError, ValueError, OSError):
                return
            if raw is None:
                return
            try:
                msg = json.loads(raw)
                kind = msg.get("kind")
                if kind == "health":
                    reply = {"ok": True, "status": "ok"} if mock.healthy() \
                        else {"ok": False, "status": "failing"}
                elif kind == "predict":
                    reply = dict(mock.predict(msg.get("inputs")), ok=True)
                else:
                    reply = {"ok": False, "error": f"unknown kind '{kind}'"}
            except (ValueError, json.JSONDecodeError) as exc:
                reply = {"ok": False, "error": str(exc)}
            try:
                write_frame(self.request, json.dumps(reply).encode())
            except (ConnectionError, OSError):
                return
