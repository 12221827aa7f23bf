"""Device statistics providers.

The host provider reads OS statistics (CPU devices only; a GPU collector
can implement the same interface later). The synthetic provider replays a
scripted trace file with lines of

    <t_ms> <device> <utilization> <memory_used> <memory_total>

holding each device's last values after its final event. Telemetry never
fabricates: a device appears in a snapshot only once its provider reported it.
"""

from __future__ import annotations

import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path

import psutil

from modelci.errors import ProviderFailure


@dataclass
class DeviceStats:
    utilization: float  # fraction of total capacity, in [0, 1]
    memory_used: int
    memory_total: int

    def to_doc(self) -> dict:
        return {
            "utilization": self.utilization,
            "memory_used": self.memory_used,
            "memory_total": self.memory_total,
        }


@dataclass
class DeviceSnapshot:
    timestamp: float  # wall-clock epoch seconds
    devices: dict[str, DeviceStats] = field(default_factory=dict)
    stale: bool = False

    def to_doc(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "devices": {d: s.to_doc() for d, s in self.devices.items()},
            "stale": self.stale,
        }


@dataclass
class InstanceStats:
    instance_id: str
    timestamp: float
    cpu_fraction: float  # of total machine capacity; same unit as DeviceStats
    memory_bytes: int
    net_rx_bytes: int
    net_tx_bytes: int

    def to_doc(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "timestamp": self.timestamp,
            "cpu_fraction": self.cpu_fraction,
            "memory_bytes": self.memory_bytes,
            "net_rx_bytes": self.net_rx_bytes,
            "net_tx_bytes": self.net_tx_bytes,
        }


class DeviceProvider(ABC):
    @abstractmethod
    def sample(self) -> dict[str, DeviceStats]:
        """Current stats for every device this provider knows."""


class HostProvider(DeviceProvider):
    """Aggregate host CPU as device ``cpu:0``."""

    def __init__(self):
        psutil.cpu_percent(interval=None)  # prime the delta-based counter

    def sample(self) -> dict[str, DeviceStats]:
        try:
            util = psutil.cpu_percent(interval=None) / 100.0
            mem = psutil.virtual_memory()
        except OSError as exc:
            raise ProviderFailure(f"host sampling failed: {exc}") from exc
        return {
            "cpu:0": DeviceStats(
                utilization=min(max(util, 0.0), 1.0),
                memory_used=int(mem.used),
                memory_total=int(mem.total),
            )
        }


class SyntheticProvider(DeviceProvider):
    """Replays a scripted trace against an injectable clock."""

    def __init__(self, events: list[tuple[float, str, float, int, int]],
                 clock=time.monotonic):
        # events: (t_ms, device, utilization, memory_used, memory_total)
        self.events = sorted(events, key=lambda e: e[0])
        self._clock = clock
        self._t0 = clock()

    @classmethod
    def from_file(cls, path: str | Path, clock=time.monotonic) -> "SyntheticProvider":
        events = []
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            t_ms, device, util, used, total = line.split()
            events.append((float(t_ms), device, float(util), int(used), int(total)))
        return cls(events, clock=clock)

    def elapsed_ms(self) -> float:
        return (self._clock() - self._t0) * 1000.0

    def sample(self) -> dict[str, DeviceStats]:
        now_ms = self.elapsed_ms()
        state: dict[str, DeviceStats] = {}
        for t_ms, device, util, used, total in self.events:
            if t_ms <= now_ms:
                state[device] = DeviceStats(utilization=util, memory_used=used,
                                            memory_total=total)
        return state


class ProcessStatsReader:
    """Per-process resource readings keyed by pid.

    cpu_percent is delta-based, so Process handles are cached between calls.
    Network byte counters are approximated with the kernel's per-process I/O
    character counters (socket traffic is included there); real NIC-level
    accounting needs a container runtime.
    """

    def __init__(self):
        self._procs: dict[int, psutil.Process] = {}
        self._ncpu = psutil.cpu_count() or 1

    def read(self, pid: int) -> tuple[float, int, int, int]:
        """(cpu_fraction, rss_bytes, rx_bytes, tx_bytes) or raises ProviderFailure."""
        try:
            proc = self._procs.get(pid)
            if proc is None or not proc.is_running():
                proc = psutil.Process(pid)
                proc.cpu_percent(interval=None)  # prime
                self._procs[pid] = proc
            with proc.oneshot():
                cpu = proc.cpu_percent(interval=None) / 100.0 / self._ncpu
                rss = proc.memory_info().rss
                rx = tx = 0
                try:
                    io = proc.io_counters()
                    rx = getattr(io, "read_chars", io.read_bytes)
                    tx = getattr(io, "write_chars", io.write_bytes)
                except (psutil.AccessDenied, AttributeError, OSError):
                    pass
            return min(cpu, 1.0), rss, rx, tx
        except (psutil.NoSuchProcess, psutil.ZombieProcess) as exc:
            self._procs.pop(pid, None)
            raise ProviderFailure(f"process {pid} gone: {exc}") from exc
        except psutil.Error as exc:
            raise ProviderFailure(f"cannot sample pid {pid}: {exc}") from exc

    def forget(self, pid: int) -> None:
        self._procs.pop(pid, None)
