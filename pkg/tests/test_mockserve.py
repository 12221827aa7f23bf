"""Mock serving backend checks: latency model, protocols, faults, handshake."""

import json
import socket
import subprocess
import sys
import threading
import time

import pytest

from modelci.converter import toyformat
from modelci.mockserve import FaultScript, LatencyModel, MockServer
from modelci.mockserve.server import read_frame, write_frame
from modelci.profiler.clients import GrpcStyleClient, RestClient

from procutil import spawn_mockserve, stop

TOY_GRAPH = {"layers": [
    {"op": "linear", "in_dim": 4, "out_dim": 8, "weights": [0.1] * 32},
    {"op": "linear", "in_dim": 8, "out_dim": 2, "weights": [0.2] * 16},
]}


@pytest.fixture
def model_file(tmp_path):
    path = tmp_path / "model.json"
    path.write_bytes(toyformat.canonical_json(TOY_GRAPH))
    return path


@pytest.fixture
def inproc_server():
    servers = []

    def start(**kwargs) -> MockServer:
        kwargs.setdefault("latency", LatencyModel())
        server = MockServer(toyformat.canonical_json(TOY_GRAPH), **kwargs)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        servers.append(server)
        return server

    yield start
    for server in servers:
        server.shutdown()


class TestLatencyModel:
    def test_deterministic_without_jitter(self):
        lm = LatencyModel(base_ms=10, per_sample_ms=2)
        assert lm.service_ms(4) == 18.0

    def test_jitter_is_seed_reproducible(self):
        a = LatencyModel(base_ms=1, jitter_ms=5, seed=42)
        b = LatencyModel(base_ms=1, jitter_ms=5, seed=42)
        assert [a.service_ms(1) for _ in range(20)] == [b.service_ms(1) for _ in range(20)]

    def test_negative_params_rejected(self):
        with pytest.raises(ValueError):
            LatencyModel(base_ms=-1)


class TestFaultScript:
    def test_state_follows_last_passed_event(self):
        script = FaultScript([(100, "health_fail"), (200, "health_ok")])
        assert script.healthy_at(0)
        assert not script.healthy_at(150)
        assert script.healthy_at(500)

    def test_from_file(self, tmp_path):
        path = tmp_path / "faults"
        path.write_text("# flip at 50ms\n50 health_fail\n")
        script = FaultScript.from_file(path)
        assert script.healthy_at(0) and not script.healthy_at(60)

    def test_unknown_action(self):
        with pytest.raises(ValueError):
            FaultScript([(0, "explode")])


class TestRestProtocol:
    def test_predict_shape_and_latency(self, inproc_server):
        server = inproc_server(latency=LatencyModel(base_ms=10))
        client = RestClient("127.0.0.1", server.port)
        conn = client._conn
        t0 = time.monotonic()
        conn.request("POST", "/predict", json.dumps(
            {"inputs": [[0.0] * 4] * 4}).encode())
        resp = conn.getresponse()
        body = json.loads(resp.read())
        elapsed_ms = (time.monotonic() - t0) * 1000
        client.close()
        assert resp.status == 200
        assert body["service_ms"] == 10.0
        assert len(body["outputs"]) == 4
        assert len(body["outputs"][0]) == server.out_dim
        assert 10 <= elapsed_ms < 60  # base latency plus scheduler noise

    def test_empty_batch_is_400(self, inproc_server):
        server = inproc_server()
        client = RestClient("127.0.0.1", server.port)
        conn = client._conn
        conn.request("POST", "/predict", json.dumps({"inputs": []}).encode())
        resp = conn.getresponse()
        resp.read()
        client.close()
        assert resp.status == 400

    def test_health_ok(self, inproc_server):
        server = inproc_server()
        client = RestClient("127.0.0.1", server.port)
        assert client.health()
        client.close()

    def test_health_follows_fault_script(self, inproc_server):
        server = inproc_server(fault_script=FaultScript([(300, "health_fail")]))
        client = RestClient("127.0.0.1", server.port)
        assert client.health()
        time.sleep(0.35)
        assert not client.health()
        client.close()


class TestGrpcStyleProtocol:
    def test_predict_and_health_frames(self, inproc_server):
        server = inproc_server(protocol="grpc-style", latency=LatencyModel(base_ms=1))
        client = GrpcStyleClient("127.0.0.1", server.port)
        assert client.health()
        assert client.predict(json.dumps(
            {"kind": "predict", "inputs": [[0.0] * 4] * 2}).encode())
        client.close()

    def test_raw_frame_round_trip(self, inproc_server):
        server = inproc_server(protocol="grpc-style")
        sock = socket.create_connection(("127.0.0.1", server.port), timeout=5)
        write_frame(sock, json.dumps({"kind": "predict", "inputs": [[1.0] * 4]}).encode())
        reply = json.loads(read_frame(sock))
        sock.close()
        assert reply["ok"] and reply["batch"] == 1
        assert len(reply["outputs"][0]) == server.out_dim

    def test_unknown_kind_rejected(self, inproc_server):
        server = inproc_server(protocol="grpc-style")
        sock = socket.create_connection(("127.0.0.1", server.port), timeout=5)
        write_frame(sock, json.dumps({"kind": "nonsense"}).encode())
        reply = json.loads(read_frame(sock))
        sock.close()
        assert not reply["ok"]

    def test_empty_batch_rejected(self, inproc_server):
        server = inproc_server(protocol="grpc-style")
        client = GrpcStyleClient("127.0.0.1", server.port)
        assert not client.predict(json.dumps({"kind": "predict", "inputs": []}).encode())
        client.close()


class TestSubprocess:
    def test_ready_handshake_and_serving(self, model_file):
        proc, port = spawn_mockserve(model_file, "--base-ms", "1")
        try:
            client = RestClient("127.0.0.1", port)
            assert client.health()
            assert client.predict(json.dumps({"inputs": [[0.0] * 4]}).encode())
            client.close()
        finally:
            stop(proc)

    def test_undecodable_model_exits_nonzero(self, tmp_path):
        bad = tmp_path / "bad.bin"
        bad.write_bytes(b"garbage that is not a model")
        proc = subprocess.run(
            [sys.executable, "-m", "modelci.mockserve", "--model", str(bad)],
            capture_output=True, timeout=30,
        )
        assert proc.returncode == 2

    def test_seeded_jitter_reproducible_across_runs(self, model_file):
        def service_times(port, n=10):
            client = RestClient("127.0.0.1", port)
            conn = client._conn
            out = []
            for _ in range(n):
                conn.request("POST", "/predict",
                             json.dumps({"inputs": [[0.0] * 4]}).encode())
                resp = conn.getresponse()
                out.append(json.loads(resp.read())["service_ms"])
            client.close()
            return out

        args = ("--jitter-ms", "5", "--seed", "77")
        proc1, port1 = spawn_mockserve(model_file, *args)
        try:
            first = service_times(port1)
        finally:
            stop(proc1)
        proc2, port2 = spawn_mockserve(model_file, *args)
        try:
            second = service_times(port2)
        finally:
            stop(proc2)
        assert first == second
        assert len(set(first)) > 1  # jitter actually varies within a run
