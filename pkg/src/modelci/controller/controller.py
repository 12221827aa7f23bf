"""Idle-aware scheduling: profile only on devices that stay under the
utilization threshold, pause when a device gets busy, place deployments on
the least-loaded device.

A device is idle-eligible when its last K utilization samples are all below
the threshold, the samples are fresh, and no profiling cell is running
there. While a cell runs, busy detection subtracts the profiled instance's
own CPU share so the profiler never pauses itself.

The controller is a pure state machine: feed it snapshots/submissions and
call tick(); it emits actions and never touches the outside world itself.
tick() is deterministic — identical state yields the identical action list.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from modelci.errors import InvalidRequest
from modelci.profiler.types import Cell, ProfilingJob
from modelci.telemetry.providers import DeviceSnapshot


@dataclass
class ControllerConfig:
    idle_threshold: float = 0.4     # devices above this fraction are busy
    consecutive_samples: int = 3    # K samples required below threshold
    staleness_intervals: int = 3    # samples older than this many snapshots don't count

    def validate(self) -> None:
        if not 0 < self.idle_threshold <= 1:
            raise InvalidRequest("idle_threshold must be in (0, 1]")
        if self.consecutive_samples < 1:
            raise InvalidRequest("consecutive_samples must be >= 1")


@dataclass
class SchedulingAction:
    kind: str                      # start_cell | pause_job | resume_job | place_instance
    device: str = ""
    job_id: str = ""
    cell: Optional[Cell] = None
    placement_id: str = ""

    def to_doc(self) -> dict:
        return {
            "kind": self.kind,
            "device": self.device,
            "job_id": self.job_id,
            "cell": self.cell.key() if self.cell else None,
            "placement_id": self.placement_id,
        }


@dataclass
class PlacementRequest:
    id: str
    record_id: str
    variant_id: str
    backend: str
    protocol: str
    device_constraint: list[str] = field(default_factory=list)
    submit_seq: int = 0

    def allows(self, device: str) -> bool:
        return not self.device_constraint or device in self.device_constraint


class Controller:
    def __init__(self, config: Optional[ControllerConfig] = None):
        self.config = config or ControllerConfig()
        self.config.validate()
        self._snapshot_seq = 0
        self._windows: dict[str, deque[float]] = {}
        self._last_seen: dict[str, int] = {}
        self._latest_util: dict[str, float] = {}
        self._jobs: dict[str, ProfilingJob] = {}
        self._job_order: list[str] = []
        self._running: dict[str, tuple[str, Cell]] = {}  # device -> (job_id, cell)
        self._self_load: dict[str, float] = {}
        self._placements: list[PlacementRequest] = []
        self._submit_counter = 0

    # -- inputs ------------------------------------------------------------------

    def on_snapshot(self, snapshot: DeviceSnapshot) -> None:
        """Update per-device ring buffers of the last K utilization samples.
        Stale snapshots advance time without refreshing anyone (absence is
        never idleness)."""
        self._snapshot_seq += 1
        if snapshot.stale:
            return
        k = self.config.consecutive_samples
        for device, stats in snapshot.devices.items():
            window = self._windows.get(device)
            if window is None or window.maxlen != k:
                window = deque(window or [], maxlen=k)
                self._windows[device] = window
            window.append(stats.utilization)
            self._last_seen[device] = self._snapshot_seq
            self._latest_util[device] = stats.utilization

    def submit(self, job: ProfilingJob) -> None:
        if job.id in self._jobs:
            return
        self._submit_counter += 1
        job.submit_seq = job.submit_seq or self._submit_counter
        self._jobs[job.id] = job
        self._job_order.append(job.id)

    def request_placement(self, placement: PlacementRequest) -> None:
        self._submit_counter += 1
        placement.submit_seq = placement.submit_seq or self._submit_counter
        self._placements.append(placement)

    def note_cell_done(self, device: str) -> None:
        """The platform reports a finished (or failed) measurement cell."""
        self._running.pop(device, None)
        self._self_load.pop(device, None)

    def note_instance_stats(self, device: str, cpu_fraction: float) -> None:
        """Latest CPU share of the profiling instance running on device."""
        if device in self._running:
            self._self_load[device] = cpu_fraction

    def remove_job(self, job_id: str) -> None:
        self._jobs.pop(job_id, None)
        if job_id in self._job_order:
            self._job_order.remove(job_id)

    # -- queries ---------------------------------------------------------------------

    def is_idle(self, device: str) -> bool:
        window = self._windows.get(device)
        if window is None or len(window) < self.config.consecutive_samples:
            return False
        if not self._fresh(device):
            return False
        if device in self._running:
            return False
        return all(u < self.config.idle_threshold for u in window)

    def _fresh(self, device: str) -> bool:
        last = self._last_seen.get(device)
        return last is not None and \
            (self._snapshot_seq - last) < self.config.staleness_intervals

    def _device_busy_for_pause(self, device: str) -> bool:
        """All K samples above threshold after removing our own load."""
        window = self._windows.get(device)
        if window is None or len(window) < self.config.consecutive_samples:
            return False
        own = self._self_load.get(device, 0.0)
        return all(max(u - own, 0.0) > self.config.idle_threshold for u in window)

    def job(self, job_id: str) -> Optional[ProfilingJob]:
        return self._jobs.get(job_id)

    def jobs_fifo(self) -> list[ProfilingJob]:
        return [self._jobs[jid] for jid in self._job_order]

    def pending_placements(self) -> list[PlacementRequest]:
        return list(self._placements)

    def running_cells(self) -> dict[str, tuple[str, Cell]]:
        return dict(self._running)

    # -- the scheduling step -------------------------------------------------------------

    def tick(self) -> list[SchedulingAction]:
        """Deterministic function of controller state.

        1. Pause running jobs whose device stayed busy for K samples.
        2. For each idle device (lexicographic order), grant the next cell
           of the oldest eligible job targeting it (FIFO, one device per
           job at a time; paused jobs resume first).
        3. Place pending deployments on the least-utilized fresh device
           below the threshold, skipping devices used for profiling.
        """
        actions: list[SchedulingAction] = []

        # 1. service protection: pause on sustained external load
        for device in sorted(self._running):
            job_id, _cell = self._running[device]
            job = self._jobs.get(job_id)
            if job is None or job.state != "running":
                continue
            if self._device_busy_for_pause(device):
                job.state = "paused"
                actions.append(SchedulingAction(kind="pause_job", device=device,
                                                job_id=job_id))

        # 2. grant cells to idle devices, oldest job first
        running_jobs = {job_id for job_id, _ in self._running.values()}
        for device in sorted(self._windows):
            if not self.is_idle(device):
                continue
            for job in self.jobs_fifo():
                if job.state not in ("queued", "waiting_for_device", "paused"):
                    continue
                if job.id in running_jobs:
                    continue  # one in-flight cell per job
                remaining = job.remaining_on_device(device)
                if not remaining:
                    continue
                if job.state == "paused":
                    actions.append(SchedulingAction(kind="resume_job", device=device,
                                                    job_id=job.id))
                cell = remaining[0]
                actions.append(SchedulingAction(kind="start_cell", device=device,
                                                job_id=job.id, cell=cell))
                self._running[device] = (job.id, cell)
                running_jobs.add(job.id)
                job.state = "running"
                break

        # jobs that still got nothing are visibly waiting
        for job in self.jobs_fifo():
            if job.state == "queued" and job.id not in running_jobs:
                job.state = "waiting_for_device"

        # 3. placements: least-utilized fresh device under the threshold
        leftover: list[PlacementRequest] = []
        for placement in sorted(self._placements, key=lambda p: p.submit_seq):
            candidates = [
                d for d in sorted(self._windows)
                if self._fresh(d)
                and self._latest_util.get(d, 1.0) < self.config.idle_threshold
                and d not in self._running
                and d not in job_devices_this_tick
                and placement.allows(d)
            ]
            if not candidates:
                leftover.append(placement)
                continue
            device = min(candidates, key=lambda d: (self._latest_util[d], d))
            actions.append(SchedulingAction(kind="place_instance", device=device,
                                            placement_id=placement.id,
                                            job_id=placement.record_id))
        self._placements = leftover
        return actions
