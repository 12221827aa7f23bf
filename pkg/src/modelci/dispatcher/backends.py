"""Execution backends: how serving programs actually run.

The default backend launches local processes (what tests exercise); the
container backend shells out to a container runtime CLI and follows the
same handshake contract. Launched programs announce their serving port by
printing ``READY <port>`` on standard output within the ready timeout,
which sidesteps pre-allocated-port races entirely.
"""

from __future__ import annotations

import os
import queue
import signal
import subprocess
import threading
from dataclasses import dataclass, field
from typing import Optional

from modelci.errors import InvalidRequest, LaunchFailure


@dataclass
class ServingBackendTemplate:
    """A launchable serving system: which formats it loads, which protocols
    it speaks, and how to start it."""

    name: str
    accepted_formats: list[str]
    protocols: list[str]
    command: list[str]  # tokens may contain {model_path}, {protocol}, {port}
    kind: str = "process"  # "process" | "container"
    image: str = ""        # container kind only
    env: dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        if not self.name:
            raise InvalidRequest("backend template needs a name")
        if not self.accepted_formats:
            raise InvalidRequest(f"backend '{self.name}' accepts no formats")
        if not self.protocols:
            raise InvalidRequest(f"backend '{self.name}' speaks no protocols")
        if self.kind == "process" and not self.command:
            raise InvalidRequest(f"backend '{self.name}' has no launch command")
        if self.kind == "container" and not self.image:
            raise InvalidRequest(f"backend '{self.name}' has no container image")
        if self.kind not in ("process", "container"):
            raise InvalidRequest(f"backend '{self.name}': unknown kind '{self.kind}'")


class Handle:
    """A started serving program plus its stdout line stream."""

    def __init__(self, proc: subprocess.Popen):
        self.proc = proc
        self.lines: queue.Queue[Optional[str]] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self):
        try:
            for line in self.proc.stdout:
                self.lines.put(line.rstrip("\n"))
        except (OSError, ValueError):
            pass
        finally:
            self.lines.put(None)  # EOF marker

    def next_line(self, timeout: float) -> Optional[str]:
        try:
            return self.lines.get(timeout=timeout)
        except queue.Empty:
            return None

    @property
    def pid(self) -> int:
        return self.proc.pid


class ExecutionBackend:
    def start(self, argv: list[str], env: Optional[dict[str, str]] = None) -> Handle:
        raise NotImplementedError

    def stop(self, handle: Handle, grace_s: float = 3.0) -> None:
        raise NotImplementedError

    def alive(self, handle: Handle) -> bool:
        raise NotImplementedError


class ProcessBackend(ExecutionBackend):
    """Local subprocesses in their own session so stray children die with them."""

    def start(self, argv: list[str], env: Optional[dict[str, str]] = None) -> Handle:
        full_env = dict(os.environ)
        if env:
            full_env.update(env)
        try:
            proc = subprocess.Popen(
                argv,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                start_new_session=True,
                env=full_env,
            )
        except OSError as exc:
            raise LaunchFailure(f"cannot start {argv[0]}: {exc}") from exc
        return Handle(proc)

    def stop(self, handle: Handle, grace_s: float = 3.0) -> None:
        proc = handle.proc
        if proc.poll() is None:
            try:
                os.killpg(proc.pid, signal.SIGTERM)
            except (ProcessLookupError, PermissionError):
                proc.terminate()
            try:
                proc.wait(timeout=grace_s)
            except subprocess.TimeoutExpired:
                try:
                    os.killpg(proc.pid, signal.SIGKILL)
                except (ProcessLookupError, PermissionError):
                    proc.kill()
                proc.wait(timeout=grace_s)
        if proc.stdout:
            proc.stdout.close()

    def alive(self, handle: Handle) -> bool:
        return handle.proc.poll() is None


class ContainerBackend(ExecutionBackend):
    """Shells out to a container runtime CLI (docker/podman compatible).

    The container must print the same READY handshake; --network=host keeps
    the announced port directly reachable. Optional, feature-gated by
    config; desk-scale verification uses ProcessBackend.
    """

    def __init__(self, runtime: str = "docker"):
        self.runtime = runtime
        self._proc_backend = ProcessBackend()

    def start(self, argv: list[str], env: Optional[dict[str, str]] = None,
              image: str = "", mounts: Optional[list[tuple[str, str]]] = None) -> Handle:
        if not image:
            raise LaunchFailure("container backend needs an image")
        cmd = [self.runtime, "run", "--rm", "-i", "--network=host"]
        for host_path, container_path in mounts or []:
            cmd += ["-v", f"{host_path}:{container_path}:ro"]
        for key, value in (env or {}).items():
            cmd += ["-e", f"{key}={value}"]
        cmd.append(image)
        cmd += argv
        return self._proc_backend.start(cmd)

    def stop(self, handle: Handle, grace_s: float = 3.0) -> None:
        self._proc_backend.stop(handle, grace_s)

    def alive(self, handle: Handle) -> bool:
        return self._proc_backend.alive(handle)
