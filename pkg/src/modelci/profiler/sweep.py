"""Sweep execution: dispatch, warm up, measure, aggregate, tear down.

Cells run in their deterministic enumeration order. The serving instance
is reused while consecutive cells share (device, backend, protocol) — in
practice across batch sizes — and jobs are persisted after every cell so a
restarted daemon resumes from completed_cells instead of re-measuring.
"""

from __future__ import annotations

import logging
import threading
import time
from typing import Callable, Optional

from modelci.dispatcher.dispatcher import Dispatcher, ServiceInstance
from modelci.errors import CellFailure, ModelCIError, NotFound
from modelci.profiler.clients import measure_cell
from modelci.profiler.stats import ResourceSample, aggregate
from modelci.profiler.types import Cell, ProfilingJob, ProfilingResult
from modelci.registry.registry import ModelRegistry
from modelci.registry.store import StoreBackend
from modelci.telemetry.sampler import Telemetry

logger = logging.getLogger(__name__)

JOBS = "jobs"


class JobStore:
    """Profiling jobs persist in the same document store as records."""

    def __init__(self, store: StoreBackend):
        self.store = store
        self._lock = threading.Lock()

    def save(self, job: ProfilingJob) -> None:
        with self._lock:
            self.store.put_doc(JOBS, job.id, job.to_doc())

    def load(self, job_id: str) -> ProfilingJob:
        doc = self.store.get_doc(JOBS, job_id)
        if doc is None:
            raise NotFound(f"no profiling job with id {job_id}")
        return ProfilingJob.from_doc(doc)

    def all_jobs(self) -> list[ProfilingJob]:
        return [ProfilingJob.from_doc(d) for d in self.store.list_docs(JOBS)]


class _ResourceTrace(threading.Thread):
    """Samples one instance's stats on a fixed cadence during measurement."""

    def __init__(self, telemetry: Telemetry, instance_id: str, interval_ms: int):
        super().__init__(daemon=True, name=f"trace-{instance_id}")
        self.telemetry = telemetry
        self.instance_id = instance_id
        self.interval_ms = interval_ms
        self.samples: list[ResourceSample] = []
        self._stop = threading.Event()

    def run(self):
        t0 = time.monotonic()
        while not self._stop.is_set():
            try:
                stats = self.telemetry.sample_instance(self.instance_id)
                self.samples.append(ResourceSample(
                    t_ms=(time.monotonic() - t0) * 1000.0,
                    cpu_fraction=stats.cpu_fraction,
                    memory_bytes=stats.memory_bytes,
                ))
            except ModelCIError:
                pass  # instance died or provider hiccup; trace just thins out
            self._stop.wait(self.interval_ms / 1000.0)

    def stop(self) -> list[ResourceSample]:
        self._stop.set()
        self.join(timeout=5)
        return self.samples


class Profiler:
    """Measures deployed variants cell by cell and persists the results."""

    def __init__(self, registry: ModelRegistry, dispatcher: Dispatcher,
                 telemetry: Telemetry, jobs: JobStore,
                 on_event: Optional[Callable[[str, dict], None]] = None):
        self.registry = registry
        self.dispatcher = dispatcher
        self.telemetry = telemetry
        self.jobs = jobs
        self.on_event = on_event or (lambda kind, payload: None)

    # -- instance management -----------------------------------------------------

    def instance_matches(self, instance: Optional[ServiceInstance], job: ProfilingJob,
                         cell: Cell) -> bool:
        return (
            instance is not None
            and instance.state == "ready"
            and instance.variant_id == job.variant_id
            and instance.device == cell.device
            and instance.backend == cell.backend
            and instance.protocol == cell.protocol
        )

    def ensure_instance(self, job: ProfilingJob, cell: Cell,
                        current: Optional[ServiceInstance]) -> ServiceInstance:
        if self.instance_matches(current, job, cell):
            return current
        if current is not None:
            self.teardown(current)
        record = self.registry.get(job.record_id)
        variant = record.variant_by_id(job.variant_id)
        if variant is None:
            raise CellFailure(f"variant {job.variant_id} missing from record {job.record_id}")
        return self.dispatcher.dispatch(variant, cell.device, cell.backend, cell.protocol)

    def teardown(self, instance: Optional[ServiceInstance]) -> None:
        if instance is None:
            return
        try:
            self.dispatcher.terminate(instance.id)
        except NotFound:
            pass

    # -- measurement ----------------------------------------------------------------

    def run_cell(self, job: ProfilingJob, cell: Cell,
                 instance: ServiceInstance) -> ProfilingResult:
        """Warm up, measure, aggregate, persist, mark complete."""
        record = self.registry.get(job.record_id)
        sample_size = record.inputs[0].sample_size() if record.inputs else 1
        sweep = job.sweep
        trace = _ResourceTrace(self.telemetry, instance.id, sweep.sample_interval_ms)
        trace.start()
        try:
            samples = measure_cell(
                instance.endpoint,
                cell.protocol,
                cell.batch_size,
                sweep.requests_per_cell,
                sweep.concurrency,
                sample_size=sample_size,
                warmup_requests=sweep.warmup_requests,
            )
        except ModelCIError as exc:
            trace.stop()
            raise CellFailure(f"cell {cell.key()}: {exc}") from exc
        resource_trace = trace.stop()
        result = aggregate(
            samples,
            resource_trace,
            cell.batch_size,
            variant_id=job.variant_id,
            device=cell.device,
            backend=cell.backend,
            protocol=cell.protocol,
            resource_scope="process" if cell.device.startswith("cpu") else cell.device,
        )
        self._complete_cell(job, cell, result)
        return result

    def record_cell_failure(self, job: ProfilingJob, cell: Cell, error: str) -> None:
        """A failed cell is recorded and never retried; the sweep continues."""
        job.completed_cells.add(cell.key())
        job.failed_cells[cell.key()] = error
        self.jobs.save(job)
        self.on_event("cell_failed", {"job_id": job.id, "cell": cell.key(), "error": error})

    def _complete_cell(self, job: ProfilingJob, cell: Cell, result: ProfilingResult) -> None:
        job.completed_cells.add(cell.key())
        job.results.append(result)
        self.jobs.save(job)
        self.registry.append_result(job.record_id, result)
        self.on_event("cell_completed", {
            "job_id": job.id, "cell": cell.key(), "result": result.to_doc(),
        })

    def finalize_if_done(self, job: ProfilingJob) -> bool:
        """Move a fully-attempted job to its terminal state."""
        if not job.is_done():
            return False
        job.state = "completed" if job.results else "failed"
        if job.failed_cells and not job.results:
            job.error = f"all {len(job.failed_cells)} cells failed"
        self.jobs.save(job)
        self.registry.advance_status(
            job.record_id, "profiled" if job.results else "failed")
        self.on_event("job_state", {"job_id": job.id, "state": job.state})
        return True

    # -- direct sweep execution (library path; the daemon drives cells through
    #    the controller instead) ---------------------------------------------------

    def run_sweep(self, job: ProfilingJob,
                  should_continue: Optional[Callable[[ProfilingJob, Cell], bool]] = None
                  ) -> list[ProfilingResult]:
        """Run every remaining cell in order, reusing instances across batch
        sizes. should_continue is consulted at each cell boundary; declining
        pauses the job (resume later picks up exactly the remaining cells)."""
        job.state = "running"
        self.jobs.save(job)
        self.registry.advance_status(job.record_id, "profiling")
        self.on_event("job_state", {"job_id": job.id, "state": "running"})
        produced: list[ProfilingResult] = []
        instance: Optional[ServiceInstance] = None
        try:
            for cell in job.sweep.cells():
                if cell.key() in job.completed_cells:
                    continue
                if should_continue is not None and not should_continue(job, cell):
                    job.state = "paused"
                    self.jobs.save(job)
                    self.on_event("job_state", {"job_id": job.id, "state": "paused"})
                    return produced
                try:
                    instance = self.ensure_instance(job, cell, instance)
                    produced.append(self.run_cell(job, cell, instance))
                except ModelCIError as exc:
                    logger.warning("cell %s failed: %s", cell.key(), exc)
                    self.record_cell_failure(job, cell, str(exc))
                    self.teardown(instance)
                    instance = None
            self.finalize_if_done(job)
            return produced
        finally:
            self.teardown(instance)
