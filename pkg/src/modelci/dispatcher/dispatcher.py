"""Instance lifecycle: dispatch a variant onto a device, watch it, stop it."""

from __future__ import annotations

import logging
import re
import shutil
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional

from modelci.dispatcher.backends import (
    ContainerBackend,
    ExecutionBackend,
    Handle,
    ProcessBackend,
    ServingBackendTemplate,
)
from modelci.errors import (
    IncompatibleFormat,
    LaunchFailure,
    NotFound,
    ReadyTimeout,
    UnknownDevice,
)
from modelci.profiler.clients import probe_health
from modelci.registry.registry import ModelRegistry
from modelci.registry.types import ModelVariant, new_id

logger = logging.getLogger(__name__)

READY_RE = re.compile(r"^READY\s+(\d+)\b")

INSTANCE_STATES = ["starting", "ready", "unhealthy", "stopped"]


@dataclass
class ServiceInstance:
    id: str
    record_id: str
    variant_id: str
    device: str
    backend: str
    protocol: str
    endpoint: str = ""
    state: str = "starting"
    created_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    handle: Optional[Handle] = None
    consecutive_failures: int = 0

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "record_id": self.record_id,
            "variant_id": self.variant_id,
            "device": self.device,
            "backend": self.backend,
            "protocol": self.protocol,
            "endpoint": self.endpoint,
            "state": self.state,
            "created_at": self.created_at,
        }


class Dispatcher:
    """Starts serving backends, polls their health, and tears them down.

    Dispatch/terminate may be called concurrently; per-instance operations
    are serialized by an instance lock. Health polling runs in a background
    thread per live instance and publishes state flips through on_event.
    """

    def __init__(self, registry: ModelRegistry,
                 templates: dict[str, ServingBackendTemplate],
                 work_dir: str | Path,
                 known_devices: Callable[[], list[str]],
                 ready_timeout_s: float = 30.0,
                 health_interval_s: float = 1.0,
                 health_fail_threshold: int = 2,
                 on_event: Optional[Callable[[str, dict], None]] = None):
        self.registry = registry
        self.templates = templates
        self.work_dir = Path(work_dir)
        self.work_dir.mkdir(parents=True, exist_ok=True)
        self.known_devices = known_devices
        self.ready_timeout_s = ready_timeout_s
        self.health_interval_s = health_interval_s
        self.health_fail_threshold = health_fail_threshold
        self.on_event = on_event or (lambda kind, payload: None)
        self._instances: dict[str, ServiceInstance] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._table_lock = threading.Lock()
        self._exec_backends: dict[str, ExecutionBackend] = {"process": ProcessBackend()}
        self._pollers: dict[str, threading.Thread] = {}
        self._stop_polling = threading.Event()

    def enable_container_backend(self, runtime: str = "docker") -> None:
        self._exec_backends["container"] = ContainerBackend(runtime)

    # -- public API ------------------------------------------------------------

    def dispatch(self, variant: ModelVariant, device: str, backend_name: str,
                 protocol: str, wait_ready: bool = True) -> ServiceInstance:
        template = self.templates.get(backend_name)
        if template is None:
            raise NotFound(f"no serving backend named '{backend_name}'")
        if variant.format not in template.accepted_formats:
            raise IncompatibleFormat(
                f"backend '{backend_name}' does not accept format '{variant.format}'"
            )
        if protocol not in template.protocols:
            raise IncompatibleFormat(
                f"backend '{backend_name}' does not speak protocol '{protocol}'"
            )
        if device not in self.known_devices():
            raise UnknownDevice(f"device '{device}' not reported by telemetry")
        exec_backend = self._exec_backends.get(template.kind)
        if exec_backend is None:
            raise LaunchFailure(
                f"execution backend '{template.kind}' is not enabled"
            )

        instance_id = new_id()
        inst_dir = self.work_dir / instance_id
        inst_dir.mkdir(parents=True)
        model_path = inst_dir / f"model.{_safe_suffix(variant.format)}"
        model_path.write_bytes(self.registry.get_blob(variant.blob_digest))

        argv = [
            token.replace("{model_path}", str(model_path))
                 .replace("{protocol}", protocol)
            for token in template.command
        ]
        handle: Optional[Handle] = None
        try:
            if template.kind == "container":
                handle = exec_backend.start(
                    argv, env=template.env, image=template.image,
                    mounts=[(str(inst_dir), str(inst_dir))],
                )
            else:
                handle = exec_backend.start(argv, env=template.env)
            port = self._await_handshake(handle)
            instance = ServiceInstance(
                id=instance_id,
                record_id=variant.parent_id,
                variant_id=variant.id,
                device=device,
                backend=backend_name,
                protocol=protocol,
                endpoint=f"127.0.0.1:{port}",
                handle=handle,
            )
            with self._table_lock:
                self._instances[instance_id] = instance
                self._locks[instance_id] = threading.Lock()
            self._emit(instance)
            if wait_ready:
                self._await_first_health(instance, exec_backend)
            self._start_poller(instance, exec_backend)
            return instance
        except Exception:
            if handle is not None:
                exec_backend.stop(handle)
            with self._table_lock:
                self._instances.pop(instance_id, None)
                self._locks.pop(instance_id, None)
            shutil.rmtree(inst_dir, ignore_errors=True)
            raise

    def terminate(self, instance_id: str) -> None:
        instance = self._get(instance_id)
        if instance.state == "stopped":
            raise NotFound(f"instance {instance_id} already stopped")
        with self._lock_of(instance_id):
            if instance.state == "stopped":
                raise NotFound(f"instance {instance_id} already stopped")
            backend = self._exec_backend_for(instance)
            if instance.handle is not None:
                backend.stop(instance.handle)
            instance.state = "stopped"
        shutil.rmtree(self.work_dir / instance_id, ignore_errors=True)
        self._emit(instance)

    def health(self, instance_id: str) -> str:
        instance = self._get(instance_id)
        if instance.state == "stopped":
            return "stopped"
        self._probe_once(instance)
        return instance.state

    def instances(self) -> list[ServiceInstance]:
        with self._table_lock:
            return sorted(self._instances.values(), key=lambda i: i.created_at)

    def get_instance(self, instance_id: str) -> ServiceInstance:
        return self._get(instance_id)

    def live_instances(self) -> list[ServiceInstance]:
        return [i for i in self.instances() if i.state != "stopped"]

    def pid_of(self, instance_id: str) -> Optional[int]:
        with self._table_lock:
            instance = self._instances.get(instance_id)
        if instance is None or instance.state == "stopped" or instance.handle is None:
            return None
        return instance.handle.pid

    def record_in_use(self, record_id: str) -> bool:
        return any(i.record_id == record_id for i in self.live_instances())

    def shutdown(self) -> None:
        self._stop_polling.set()
        for instance in self.live_instances():
            try:
                self.terminate(instance.id)
            except NotFound:
                pass

    # -- internals ----------------------------------------------------------------

    def _get(self, instance_id: str) -> ServiceInstance:
        with self._table_lock:
            instance = self._instances.get(instance_id)
        if instance is None:
            raise NotFound(f"no instance with id {instance_id}")
        return instance

    def _lock_of(self, instance_id: str) -> threading.Lock:
        with self._table_lock:
            lock = self._locks.get(instance_id)
        if lock is None:
            raise NotFound(f"no instance with id {instance_id}")
        return lock

    def _exec_backend_for(self, instance: ServiceInstance) -> ExecutionBackend:
        template = self.templates[instance.backend]
        return self._exec_backends[template.kind]

    def _await_handshake(self, handle: Handle) -> int:
        deadline = time.monotonic() + self.ready_timeout_s
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ReadyTimeout(
                    f"no READY handshake within {self.ready_timeout_s}s"
                )
            line = handle.next_line(timeout=remaining)
            if line is None:
                if not handle.proc or handle.proc.poll() is not None:
                    raise LaunchFailure(
                        f"backend exited with code {handle.proc.returncode} before handshake"
                    )
                continue
            match = READY_RE.match(line.strip())
            if match:
                return int(match.group(1))

    def _await_first_health(self, instance: ServiceInstance,
                            exec_backend: ExecutionBackend) -> None:
        deadline = time.monotonic() + self.ready_timeout_s
        poll_s = 0.01
        while time.monotonic() < deadline:
            if not exec_backend.alive(instance.handle):
                raise LaunchFailure("backend died before becoming healthy")
            if probe_health(instance.protocol, instance.endpoint, timeout_s=2.0):
                instance.state = "ready"
                instance.consecutive_failures = 0
                self._emit(instance)
                return
            time.sleep(poll_s)
            poll_s = min(poll_s * 2, 0.2)
        raise ReadyTimeout(
            f"instance {instance.id} not healthy within {self.ready_timeout_s}s"
        )

    def _probe_once(self, instance: ServiceInstance) -> None:
        healthy = probe_health(instance.protocol, instance.endpoint, timeout_s=2.0)
        with self._lock_of(instance.id):
            if instance.state == "stopped":
                return
            previous = instance.state
            if healthy:
                instance.consecutive_failures = 0
                instance.state = "ready"
            else:
                instance.consecutive_failures += 1
                if instance.consecutive_failures >= self.health_fail_threshold:
                    instance.state = "unhealthy"
            if instance.state != previous:
                self._emit(instance)

    def _start_poller(self, instance: ServiceInstance,
                      exec_backend: ExecutionBackend) -> None:
        def poll():
            while not self._stop_polling.is_set():
                time.sleep(self.health_interval_s)
                if instance.state == "stopped":
                    return
                if not exec_backend.alive(instance.handle):
                    with self._lock_of(instance.id):
                        if instance.state not in ("stopped", "unhealthy"):
                            instance.state = "unhealthy"
                            self._emit(instance)
                    continue
                self._probe_once(instance)

        thread = threading.Thread(target=poll, daemon=True,
                                  name=f"health-{instance.id}")
        self._pollers[instance.id] = thread
        thread.start()

    def _emit(self, instance: ServiceInstance) -> None:
        try:
            self.on_event("instance_state", instance.to_doc())
        except Exception:  # events must never break lifecycle paths
            logger.exception("instance event callback failed")


def _safe_suffix(fmt: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", fmt) or "bin"
