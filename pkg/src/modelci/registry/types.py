"""Domain types for the model registry."""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Optional

from modelci.errors import InvalidManifest
from modelci.profiler.types import ProfilingResult

# Lifecycle states in forward order. "failed" sits outside the chain:
# reachable from any non-terminal state, and may retry back into converting.
LIFECYCLE = ["registered", "converting", "converted", "profiling", "profiled", "serving"]
FAILED = "failed"
ALL_STATUSES = LIFECYCLE + [FAILED]


def legal_transition(current: str, new: str) -> bool:
    if new == current:
        return False
    if current == FAILED:
        return new == "converting"
    idx = LIFECYCLE.index(current)
    if new == FAILED:
        return current != "serving"  # serving is terminal apart from nothing
    return new in LIFECYCLE and LIFECYCLE.index(new) == idx + 1


def new_id() -> str:
    return uuid.uuid4().hex[:12]


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class TensorSpec:
    """Shape/dtype of one model input or output; -1 marks the batch dimension."""

    name: str
    shape: list[int]
    dtype: str = "float32"

    def validate(self) -> None:
        if not self.name:
            raise InvalidManifest("tensor spec needs a name")
        if not self.shape:
            raise InvalidManifest(f"tensor '{self.name}' needs a shape")
        dynamic = [d for d in self.shape if d == -1]
        if len(dynamic) > 1:
            raise InvalidManifest(f"tensor '{self.name}': at most one -1 dimension")
        if any(d < 1 for d in self.shape if d != -1):
            raise InvalidManifest(f"tensor '{self.name}': dims must be >= 1 or -1")

    def sample_size(self) -> int:
        """Elements in one sample (dynamic dims excluded)."""
        n = 1
        for d in self.shape:
            if d != -1:
                n *= d
        return n

    def to_doc(self) -> dict:
        return {"name": self.name, "shape": self.shape, "dtype": self.dtype}

    @classmethod
    def from_doc(cls, doc: dict) -> "TensorSpec":
        return cls(name=doc["name"], shape=list(doc["shape"]), dtype=doc.get("dtype", "float32"))


@dataclass
class ModelVariant:
    """One converted artifact of a registered model."""

    id: str
    parent_id: str
    format: str
    blob_digest: str
    serving_backends: list[str]
    created_at: str = field(default_factory=utc_now_iso)

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "parent_id": self.parent_id,
            "format": self.format,
            "blob_digest": self.blob_digest,
            "serving_backends": self.serving_backends,
            "created_at": self.created_at,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ModelVariant":
        return cls(
            id=doc["id"],
            parent_id=doc["parent_id"],
            format=doc["format"],
            blob_digest=doc["blob_digest"],
            serving_backends=list(doc["serving_backends"]),
            created_at=doc["created_at"],
        )


@dataclass
class RegistrationManifest:
    """What a user submits alongside a weight file."""

    name: str
    framework: str
    task: str = ""
    dataset: str = ""
    version: Optional[int] = None
    metrics: dict = field(default_factory=dict)
    inputs: list[TensorSpec] = field(default_factory=list)
    outputs: list[TensorSpec] = field(default_factory=list)
    convert: bool = True
    profile: bool = True

    def validate(self) -> None:
        if not self.name:
            raise InvalidManifest("manifest needs a non-empty name")
        if not self.framework:
            raise InvalidManifest("manifest needs a non-empty framework")
        if not self.inputs:
            raise InvalidManifest("manifest needs at least one input tensor spec")
        if self.version is not None and (not isinstance(self.version, int) or self.version < 1):
            raise InvalidManifest("version must be a positive integer")
        for k, v in self.metrics.items():
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise InvalidManifest(f"metric '{k}' must be numeric")
        for spec in self.inputs + self.outputs:
            spec.validate()

    @classmethod
    def from_doc(cls, doc: dict) -> "RegistrationManifest":
        if not isinstance(doc, dict):
            raise InvalidManifest("manifest must be a mapping")
        known = {"name", "framework", "version", "task", "dataset", "metrics",
                 "inputs", "outputs", "convert", "profile"}
        unknown = set(doc) - known
        if unknown:
            raise InvalidManifest(f"unknown manifest keys: {sorted(unknown)}")
        try:
            manifest = cls(
                name=doc.get("name", ""),
                framework=doc.get("framework", ""),
                version=doc.get("version"),
                task=doc.get("task", ""),
                dataset=doc.get("dataset", ""),
                metrics=dict(doc.get("metrics") or {}),
                inputs=[TensorSpec.from_doc(d) for d in doc.get("inputs") or []],
                outputs=[TensorSpec.from_doc(d) for d in doc.get("outputs") or []],
                convert=bool(doc.get("convert", True)),
                profile=bool(doc.get("profile", True)),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidManifest(f"malformed manifest: {exc}") from exc
        manifest.validate()
        return manifest


# Fields update() may touch; everything else raises ImmutableField.
MUTABLE_FIELDS = {"task", "dataset", "metrics", "status"}


@dataclass
class ModelRecord:
    """A registered model: static info, weight blob digest, lifecycle status,
    plus attached variants and profiling results."""

    id: str
    name: str
    framework: str
    version: int
    task: str
    dataset: str
    metrics: dict
    inputs: list[TensorSpec]
    outputs: list[TensorSpec]
    weight_digest: str
    status: str = "registered"
    created_at: str = field(default_factory=utc_now_iso)
    updated_at: str = field(default_factory=utc_now_iso)
    variants: list[ModelVariant] = field(default_factory=list)
    profiling_results: list[ProfilingResult] = field(default_factory=list)

    def touch(self) -> None:
        now = utc_now_iso()
        if now <= self.updated_at:
            # clock resolution guard: updated_at must strictly advance
            prev = datetime.fromisoformat(self.updated_at)
            now = (prev + timedelta(microseconds=1)).isoformat()
        self.updated_at = now

    def variant_by_id(self, variant_id: str) -> Optional[ModelVariant]:
        for v in self.variants:
            if v.id == variant_id:
                return v
        return None

    def referenced_digests(self) -> set[str]:
        return {self.weight_digest} | {v.blob_digest for v in self.variants}

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "framework": self.framework,
            "version": self.version,
            "task": self.task,
            "dataset": self.dataset,
            "metrics": self.metrics,
            "inputs": [t.to_doc() for t in self.inputs],
            "outputs": [t.to_doc() for t in self.outputs],
            "weight_digest": self.weight_digest,
            "status": self.status,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
            "variants": [v.to_doc() for v in self.variants],
            "profiling_results": [r.to_doc() for r in self.profiling_results],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ModelRecord":
        return cls(
            id=doc["id"],
            name=doc["name"],
            framework=doc["framework"],
            version=doc["version"],
            task=doc.get("task", ""),
            dataset=doc.get("dataset", ""),
            metrics=dict(doc.get("metrics") or {}),
            inputs=[TensorSpec.from_doc(d) for d in doc.get("inputs") or []],
            outputs=[TensorSpec.from_doc(d) for d in doc.get("outputs") or []],
            weight_digest=doc["weight_digest"],
            status=doc.get("status", "registered"),
            created_at=doc["created_at"],
            updated_at=doc["updated_at"],
            variants=[ModelVariant.from_doc(d) for d in doc.get("variants") or []],
            profiling_results=[ProfilingResult.from_doc(d) for d in doc.get("profiling_results") or []],
        )


@dataclass
class ModelQuery:
    """Filter for retrieve(); None means "don't filter on this field"."""

    name: Optional[str] = None
    framework: Optional[str] = None
    task: Optional[str] = None
    status: Optional[str] = None

    def matches(self, record: ModelRecord) -> bool:
        if self.name is not None and record.name != self.name:
            return False
        if self.framework is not None and record.framework != self.framework:
            return False
        if self.task is not None and record.task != self.task:
            return False
        if self.status is not None and record.status != self.status:
            return False
        return True
