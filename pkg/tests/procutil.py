"""Subprocess helpers shared by server-spawning tests."""

from __future__ import annotations

import subprocess
import sys
import time


def spawn_ready(argv: list[str], timeout_s: float = 15.0,
                ready_prefix: str = "READY ") -> tuple[subprocess.Popen, int]:
    """Start a process and wait for its '<prefix><port>' handshake line."""
    proc = subprocess.Popen(
        argv, stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True
    )
    deadline = time.monotonic() + timeout_s
    line = ""
    while time.monotonic() < deadline:
        line = proc.stdout.readline()
        if not line:
            break
        if line.startswith(ready_prefix):
            return proc, int(line[len(ready_prefix):].strip().split()[0])
    stderr = ""
    if proc.poll() is not None:
        stderr = proc.stderr.read()
    proc.kill()
    raise RuntimeError(f"no handshake from {argv}: last line {line!r}, stderr: {stderr[:500]}")


def spawn_mockserve(model_path, *extra: str, timeout_s: float = 15.0):
    argv = [sys.executable, "-m", "modelci.mockserve", "--model", str(model_path), *extra]
    return spawn_ready(argv, timeout_s)


def stop(proc: subprocess.Popen, grace_s: float = 3.0) -> None:
    if proc.poll() is None:
        proc.terminate()
        try:
            proc.wait(timeout=grace_s)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait(timeout=grace_s)
    if proc.stdout:
        proc.stdout.close()
    if proc.stderr:
        proc.stderr.close()
