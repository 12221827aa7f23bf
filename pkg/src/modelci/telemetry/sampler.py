"""Periodic sampling, fan-out to subscribers, and instance statistics."""

from __future__ import annotations

import logging
import queue
import threading
import time
from typing import Callable, Iterator, Optional

from modelci.errors import NotFound, ProviderFailure
from modelci.telemetry.exposition import render_exposition
from modelci.telemetry.providers import (
    DeviceProvider,
    DeviceSnapshot,
    InstanceStats,
    ProcessStatsReader,
)

logger = logging.getLogger(__name__)


class Subscription:
    """Bounded snapshot stream; the producer drops the oldest entry instead
    of blocking when a consumer lags."""

    def __init__(self, interval_ms: int, maxsize: int = 16):
        self.interval_ms = interval_ms
        self._queue: queue.Queue[DeviceSnapshot] = queue.Queue(maxsize=maxsize)
        self._last_push = 0.0
        self._closed = threading.Event()

    def push(self, snapshot: DeviceSnapshot) -> None:
        while True:
            try:
                self._queue.put_nowait(snapshot)
                return
            except queue.Full:
                try:
                    self._queue.get_nowait()
                except queue.Empty:
                    pass

    def get(self, timeout: Optional[float] = None) -> Optional[DeviceSnapshot]:
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            return None

    def __iter__(self) -> Iterator[DeviceSnapshot]:
        while not self._closed.is_set():
            snap = self.get(timeout=0.25)
            if snap is not None:
                yield snap

    def close(self) -> None:
        self._closed.set()


class Telemetry:
    """One sampling activity per provider; reads of the latest snapshot are
    lock-cheap and never block the sampler."""

    def __init__(self, provider: DeviceProvider, interval_ms: int = 1000):
        self.provider = provider
        self.interval_ms = interval_ms
        self._latest: Optional[DeviceSnapshot] = None
        self._lock = threading.Lock()
        self._subs: list[Subscription] = []
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None
        self._proc_reader = ProcessStatsReader()
        # wired by the platform: instance id -> pid of a live instance
        self.instance_pid_resolver: Optional[Callable[[str], Optional[int]]] = None
        self._instance_stats: dict[str, InstanceStats] = {}

    # -- device sampling -------------------------------------------------------

    def sample_devices(self) -> DeviceSnapshot:
        """Sample now. On provider failure the last snapshot is served again,
        flagged stale (never fabricated devices)."""
        try:
            devices = self.provider.sample()
            snapshot = DeviceSnapshot(timestamp=time.time(), devices=devices)
        except ProviderFailure as exc:
            logger.warning("device provider failed: %s", exc)
            with self._lock:
                previous = self._latest
            snapshot = DeviceSnapshot(
                timestamp=time.time(),
                devices=dict(previous.devices) if previous else {},
                stale=True,
            )
        with self._lock:
            self._latest = snapshot
        return snapshot

    def latest(self) -> Optional[DeviceSnapshot]:
        with self._lock:
            return self._latest

    def device_ids(self) -> list[str]:
        snap = self.latest()
        return sorted(snap.devices) if snap else []

    # -- subscriptions ----------------------------------------------------------

    def subscribe(self, interval_ms: Optional[int] = None, maxsize: int = 16) -> Subscription:
        interval = interval_ms if interval_ms is not None else self.interval_ms
        if interval < 10:
            raise ValueError("subscription interval must be >= 10 ms")
        sub = Subscription(interval_ms=interval, maxsize=maxsize)
        with self._lock:
            self._subs.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        sub.close()
        with self._lock:
            if sub in self._subs:
                self._subs.remove(sub)

    # -- background loop ----------------------------------------------------------

    def start(self) -> None:
        if self._thread is not None:
            return
        self._stop.clear()
        self._thread = threading.Thread(target=self._run, name="telemetry", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    def _cadence_s(self) -> float:
        with self._lock:
            intervals = [self.interval_ms] + [s.interval_ms for s in self._subs]
        return min(intervals) / 1000.0

    def _run(self) -> None:
        while not self._stop.is_set():
            snapshot = self.sample_devices()
            now = time.monotonic()
            with self._lock:
                subs = list(self._subs)
            for sub in subs:
                due = now - sub._last_push >= sub.interval_ms / 1000.0 * 0.99
                if due:
                    sub.push(snapshot)
                    sub._last_push = now
            self._stop.wait(self._cadence_s())

    # -- instance statistics ---------------------------------------------------------

    def sample_instance(self, instance_id: str) -> InstanceStats:
        if self.instance_pid_resolver is None:
            raise NotFound("no execution backend wired for instance stats")
        pid = self.instance_pid_resolver(instance_id)
        if pid is None:
            self._instance_stats.pop(instance_id, None)
            raise NotFound(f"no live instance {instance_id}")
        cpu, rss, rx, tx = self._proc_reader.read(pid)
        stats = InstanceStats(
            instance_id=instance_id,
            timestamp=time.time(),
            cpu_fraction=cpu,
            memory_bytes=rss,
            net_rx_bytes=rx,
            net_tx_bytes=tx,
        )
        self._instance_stats[instance_id] = stats
        return stats

    def latest_instance_stats(self, instance_id: str) -> Optional[InstanceStats]:
        return self._instance_stats.get(instance_id)

    # -- scrape endpoint ----------------------------------------------------------------

    def exposition(self) -> str:
        return render_exposition(self.latest(), list(self._instance_stats.values()))
