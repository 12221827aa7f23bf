"""Profiling domain types: sweep specs, cells, jobs, and per-cell results."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional

from modelci.errors import InvalidRequest

JOB_STATES = ["queued", "waiting_for_device", "running", "paused", "completed", "failed"]

DEFAULT_BATCH_SIZES = [1, 2, 4, 8, 16, 32]


@dataclass(frozen=True, order=True)
class Cell:
    """One sweep cell: the (device, backend, protocol, batch size) combination."""

    device: str
    backend: str
    protocol: str
    batch_size: int

    def key(self) -> str:
        return f"{self.device}|{self.backend}|{self.protocol}|{self.batch_size}"

    @classmethod
    def from_key(cls, key: str) -> "Cell":
        device, backend, protocol, batch = key.split("|")
        return cls(device=device, backend=backend, protocol=protocol, batch_size=int(batch))


@dataclass
class SweepSpec:
    """What to measure: the cross-product of these axes."""

    batch_sizes: list[int] = field(default_factory=lambda: list(DEFAULT_BATCH_SIZES))
    devices: list[str] = field(default_factory=list)
    backends: list[str] = field(default_factory=list)
    protocols: list[str] = field(default_factory=lambda: ["rest"])
    requests_per_cell: int = 100
    warmup_requests: int = 10
    concurrency: int = 1
    sample_interval_ms: int = 100

    def validate(self) -> None:
        for name in ("batch_sizes", "devices", "backends", "protocols"):
            if not getattr(self, name):
                raise InvalidRequest(f"sweep '{name}' must be non-empty")
        if any(b < 1 for b in self.batch_sizes):
            raise InvalidRequest("batch sizes must be positive")
        if self.requests_per_cell < 10:
            raise InvalidRequest("requests_per_cell must be >= 10")
        if self.warmup_requests < 0:
            raise InvalidRequest("warmup_requests must be >= 0")
        if self.concurrency < 1:
            raise InvalidRequest("concurrency must be >= 1")
        if self.sample_interval_ms < 1:
            raise InvalidRequest("sample_interval_ms must be >= 1")

    def cells(self) -> list[Cell]:
        """Deterministic enumeration: lexicographic in (device, backend,
        protocol, batch size). Resumability depends on this order."""
        combos = itertools.product(
            sorted(set(self.devices)),
            sorted(set(self.backends)),
            sorted(set(self.protocols)),
            sorted(set(self.batch_sizes)),
        )
        return [Cell(*c) for c in combos]

    def to_doc(self) -> dict:
        return {
            "batch_sizes": self.batch_sizes,
            "devices": self.devices,
            "backends": self.backends,
            "protocols": self.protocols,
            "requests_per_cell": self.requests_per_cell,
            "warmup_requests": self.warmup_requests,
            "concurrency": self.concurrency,
            "sample_interval_ms": self.sample_interval_ms,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "SweepSpec":
        return cls(
            batch_sizes=list(doc.get("batch_sizes") or DEFAULT_BATCH_SIZES),
            devices=list(doc.get("devices") or []),
            backends=list(doc.get("backends") or []),
            protocols=list(doc.get("protocols") or ["rest"]),
            requests_per_cell=int(doc.get("requests_per_cell", 100)),
            warmup_requests=int(doc.get("warmup_requests", 10)),
            concurrency=int(doc.get("concurrency", 1)),
            sample_interval_ms=int(doc.get("sample_interval_ms", 100)),
        )


@dataclass
class ProfilingResult:
    """One sweep cell's six indicators plus provenance.

    memory_bytes / utilization report the process RSS and CPU fraction when
    measured on a CPU device (resource_scope marks which collector produced
    them); degraded is set when the resource trace was empty.
    """

    variant_id: str
    device: str
    backend: str
    protocol: str
    batch_size: int
    peak_throughput: float
    p50_latency_ms: float
    p95_latency_ms: float
    p99_latency_ms: float
    memory_bytes: Optional[float]
    utilization: Optional[float]
    measured_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    raw_sample_count: int = 0
    degraded: bool = False
    resource_scope: str = "process"

    INDICATORS = (
        "peak_throughput",
        "p50_latency_ms",
        "p95_latency_ms",
        "p99_latency_ms",
        "memory_bytes",
        "utilization",
    )

    def cell(self) -> Cell:
        return Cell(self.device, self.backend, self.protocol, self.batch_size)

    def to_doc(self) -> dict:
        return {
            "variant_id": self.variant_id,
            "device": self.device,
            "backend": self.backend,
            "protocol": self.protocol,
            "batch_size": self.batch_size,
            "peak_throughput": self.peak_throughput,
            "p50_latency_ms": self.p50_latency_ms,
            "p95_latency_ms": self.p95_latency_ms,
            "p99_latency_ms": self.p99_latency_ms,
            "memory_bytes": self.memory_bytes,
            "utilization": self.utilization,
            "measured_at": self.measured_at,
            "raw_sample_count": self.raw_sample_count,
            "degraded": self.degraded,
            "resource_scope": self.resource_scope,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ProfilingResult":
        return cls(
            variant_id=doc["variant_id"],
            device=doc["device"],
            backend=doc["backend"],
            protocol=doc["protocol"],
            batch_size=int(doc["batch_size"]),
            peak_throughput=doc["peak_throughput"],
            p50_latency_ms=doc["p50_latency_ms"],
            p95_latency_ms=doc["p95_latency_ms"],
            p99_latency_ms=doc["p99_latency_ms"],
            memory_bytes=doc.get("memory_bytes"),
            utilization=doc.get("utilization"),
            measured_at=doc["measured_at"],
            raw_sample_count=int(doc.get("raw_sample_count", 0)),
            degraded=bool(doc.get("degraded", False)),
            resource_scope=doc.get("resource_scope", "process"),
        )


@dataclass
class ProfilingJob:
    """A sweep over one variant, scheduled cell-by-cell on idle devices."""

    id: str
    record_id: str
    variant_id: str
    sweep: SweepSpec
    state: str = "queued"
    completed_cells: set[str] = field(default_factory=set)
    failed_cells: dict[str, str] = field(default_factory=dict)
    results: list[ProfilingResult] = field(default_factory=list)
    submitted_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    submit_seq: int = 0
    error: str = ""

    def remaining_cells(self) -> list[Cell]:
        """Cells not yet attempted; failed cells count as attempted."""
        return [c for c in self.sweep.cells() if c.key() not in self.completed_cells]

    def remaining_on_device(self, device: str) -> list[Cell]:
        return [c for c in self.remaining_cells() if c.device == device]

    def is_done(self) -> bool:
        return not self.remaining_cells()

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "record_id": self.record_id,
            "variant_id": self.variant_id,
            "sweep": self.sweep.to_doc(),
            "state": self.state,
            "completed_cells": sorted(self.completed_cells),
            "failed_cells": self.failed_cells,
            "results": [r.to_doc() for r in self.results],
            "submitted_at": self.submitted_at,
            "submit_seq": self.submit_seq,
            "error": self.error,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ProfilingJob":
        return cls(
            id=doc["id"],
            record_id=doc["record_id"],
            variant_id=doc["variant_id"],
            sweep=SweepSpec.from_doc(doc["sweep"]),
            state=doc.get("state", "queued"),
            completed_cells=set(doc.get("completed_cells") or []),
            failed_cells=dict(doc.get("failed_cells") or {}),
            results=[ProfilingResult.from_doc(d) for d in doc.get("results") or []],
            submitted_at=doc.get("submitted_at", ""),
            submit_seq=int(doc.get("submit_seq", 0)),
            error=doc.get("error", ""),
        )
