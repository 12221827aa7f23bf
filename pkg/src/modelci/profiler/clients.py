"""Built-in load clients, one per serving protocol.

Clients are closed-loop: each sends its next request only after the
previous response lands. All latency math uses the monotonic clock.
"""

from __future__ import annotations

import http.client
import json
import socket
import threading
import time
from abc import ABC, abstractmethod

from modelci.errors import RequestFailure
from modelci.mockserve.server import read_frame, write_frame
from modelci.profiler.stats import LatencySamples

DEFAULT_TIMEOUT_S = 10.0
MAX_FAILURE_FRACTION = 0.05


class ProtocolClient(ABC):
    @abstractmethod
    def predict(self, payload: bytes) -> bool:
        """Send one inference request; True on success."""

    @abstractmethod
    def health(self) -> bool: ...

    @abstractmethod
    def close(self) -> None: ...


class RestClient(ProtocolClient):
    def __init__(self, host: str, port: int, timeout_s: float = DEFAULT_TIMEOUT_S):
        self.host, self.port, self.timeout_s = host, port, timeout_s
        self._conn = http.client.HTTPConnection(host, port, timeout=timeout_s)

    def _reset(self):
        try:
            self._conn.close()
        except OSError:
            pass
        self._conn = http.client.HTTPConnection(self.host, self.port, timeout=self.timeout_s)

    def predict(self, payload: bytes) -> bool:
        try:
            self._conn.request("POST", "/predict", payload,
                               {"Content-Type": "application/json"})
            resp = self._conn.getresponse()
            resp.read()  # drain so the keep-alive connection stays usable
            return resp.status == 200
        except (OSError, http.client.HTTPException):
            self._reset()
            return False

    def health(self) -> bool:
        try:
            self._conn.request("GET", "/health")
            resp = self._conn.getresponse()
            resp.read()
            return resp.status == 200
        except (OSError, http.client.HTTPException):
            self._reset()
            return False

    def close(self) -> None:
        try:
            self._conn.close()
        except OSError:
            pass


class GrpcStyleClient(ProtocolClient):
    """Client for the minimal length-prefixed TCP protocol."""

    def __init__(self, host: str, port: int, timeout_s: float = DEFAULT_TIMEOUT_S):
        self.host, self.port, self.timeout_s = host, port, timeout_s
        self._sock: socket.socket | None = None
        self._connect()

    def _connect(self):
        self._sock = socket.create_connection((self.host, self.port), timeout=self.timeout_s)

    def _reset(self):
        self.close()
        try:
            self._connect()
        except OSError:
            self._sock = None

    def _roundtrip(self, payload: bytes) -> dict | None:
        if self._sock is None:
            self._reset()
            if self._sock is None:
                return None
        try:
            write_frame(self._sock, payload)
            raw = read_frame(self._sock)
            if raw is None:
                self._reset()
                return None
            return json.loads(raw)
        except (OSError, ValueError):
            self._reset()
            return None

    def predict(self, payload: bytes) -> bool:
        reply = self._roundtrip(payload)
        return bool(reply and reply.get("ok"))

    def health(self) -> bool:
        reply = self._roundtrip(json.dumps({"kind": "health"}).encode())
        return bool(reply and reply.get("ok"))

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None


def make_client(protocol: str, host: str, port: int,
                timeout_s: float = DEFAULT_TIMEOUT_S) -> ProtocolClient:
    if protocol == "rest":
        return RestClient(host, port, timeout_s)
    if protocol == "grpc-style":
        return GrpcStyleClient(host, port, timeout_s)
    raise ValueError(f"no client for protocol '{protocol}'")


def probe_health(protocol: str, endpoint: str, timeout_s: float = 2.0) -> bool:
    host, port = split_endpoint(endpoint)
    try:
        client = make_client(protocol, host, port, timeout_s)
    except OSError:
        return False
    try:
        return client.health()
    finally:
        client.close()


def split_endpoint(endpoint: str) -> tuple[str, int]:
    host, _, port = endpoint.rpartition(":")
    return host, int(port)


def build_payload(protocol: str, batch_size: int, sample_size: int) -> bytes:
    """Shape-correct inference payload: batch_size samples of sample_size zeros."""
    inputs = [[0.0] * sample_size for _ in range(batch_size)]
    if protocol == "rest":
        return json.dumps({"inputs": inputs}).encode()
    return json.dumps({"kind": "predict", "inputs": inputs}).encode()


def measure_cell(endpoint: str, protocol: str, batch_size: int, n_requests: int,
                 concurrency: int = 1, *, sample_size: int = 1,
                 warmup_requests: int = 0, timeout_s: float = DEFAULT_TIMEOUT_S,
                 max_failure_fraction: float = MAX_FAILURE_FRACTION) -> LatencySamples:
    """Drive exactly n_requests through closed-loop clients and record
    per-request wall times plus completion instants (ms since the shared
    measurement start).

    Raises RequestFailure once failures exceed max_failure_fraction of
    n_requests; per-client timestamps are monotonic by construction.
    """
    host, port = split_endpoint(endpoint)
    payload = build_payload(protocol, batch_size, sample_size)
    counts = [n_requests // concurrency] * concurrency
    for i in range(n_requests % concurrency):
        counts[i] += 1
    warmups = [warmup_requests // concurrency] * concurrency
    for i in range(warmup_requests % concurrency):
        warmups[i] += 1

    lock = threading.Lock()
    latencies: list[float] = []
    completions: list[float] = []
    failures = [0]
    abort = threading.Event()
    failure_budget = int(max_failure_fraction * n_requests)
    start_box: dict[str, float] = {}

    def set_start():
        start_box["t"] = time.monotonic()

    barrier = threading.Barrier(concurrency, action=set_start)

    def worker(idx: int):
        client = None
        reached_barrier = False
        try:
            try:
                client = make_client(protocol, host, port, timeout_s)
            except OSError:
                client = None
            for _ in range(warmups[idx]):
                if abort.is_set():
                    return
                ok = client.predict(payload) if client else False
                if not ok:
                    with lock:
                        failures[0] += 1
                        if failures[0] > failure_budget:
                            abort.set()
                            return
            try:
                reached_barrier = True
                barrier.wait(timeout=timeout_s * max(1, warmup_requests + 1))
            except threading.BrokenBarrierError:
                return
            for _ in range(counts[idx]):
                if abort.is_set():
                    return
                t0 = time.monotonic()
                ok = client.predict(payload) if client else False
                t1 = time.monotonic()
                with lock:
                    if ok:
                        latencies.append((t0, (t1 - t0) * 1000.0))
                        completions.append((t1 - start_box["t"]) * 1000.0)
                    else:
                        failures[0] += 1
                        if failures[0] > failure_budget:
                            abort.set()
                            return
        finally:
            if not reached_barrier:
                barrier.abort()  # never strand workers already waiting
            if client:
                client.close()

    threads = [threading.Thread(target=worker, args=(i,), daemon=True)
               for i in range(concurrency)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    if failures[0] > failure_budget:
        raise RequestFailure(
            f"{failures[0]} of {n_requests} requests failed "
            f"(budget {failure_budget}) against {protocol}://{endpoint}"
        )
    ordered = sorted(latencies)  # by request start time, stable record order
    return LatencySamples(
        latencies_ms=[lat for _, lat in ordered],
        completions_ms=sorted(completions),
        failed=failures[0],
    )
