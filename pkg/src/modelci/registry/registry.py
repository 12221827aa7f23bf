"""The housekeeper: register / retrieve / update / delete over the model store."""

from __future__ import annotations

import threading
from collections import defaultdict
from typing import Callable, Optional

from modelci.errors import (
    DuplicateVersion,
    IllegalTransition,
    ImmutableField,
    InUse,
    InvalidManifest,
    NotFound,
    UpdateConflict,
)
from modelci.registry.store import StoreBackend
from modelci.registry.types import (
    MUTABLE_FIELDS,
    ModelQuery,
    ModelRecord,
    ModelVariant,
    RegistrationManifest,
    legal_transition,
    new_id,
)
from modelci.profiler.types import ProfilingResult

MODELS = "models"


class ModelRegistry:
    """Persists model records, weight blobs, variants, and profiling results.

    Mutations are serialized per record id; registration takes a global lock
    so version auto-increment and the (name, framework, version) uniqueness
    check stay atomic under concurrent callers.
    """

    def __init__(self, store: StoreBackend,
                 in_use_check: Optional[Callable[[str], bool]] = None):
        self.store = store
        self._in_use_check = in_use_check
        self._register_lock = threading.Lock()
        self._record_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._locks_guard = threading.Lock()

    def _lock_for(self, record_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._record_locks[record_id]

    # -- housekeeper APIs -----------------------------------------------------

    def register(self, manifest: RegistrationManifest, weights: bytes) -> ModelRecord:
        manifest.validate()
        if not weights:
            raise InvalidManifest("weights must be non-empty")
        digest = self.store.put_blob(weights)
        with self._register_lock:
            existing = [
                r for r in self._all_records()
                if r.name == manifest.name and r.framework == manifest.framework
            ]
            if manifest.version is not None:
                if any(r.version == manifest.version for r in existing):
                    raise DuplicateVersion(
                        f"{manifest.name}/{manifest.framework} v{manifest.version} already registered"
                    )
                version = manifest.version
            else:
                version = max((r.version for r in existing), default=0) + 1
            record = ModelRecord(
                id=new_id(),
                name=manifest.name,
                framework=manifest.framework,
                version=version,
                task=manifest.task,
                dataset=manifest.dataset,
                metrics=dict(manifest.metrics),
                inputs=list(manifest.inputs),
                outputs=list(manifest.outputs),
                weight_digest=digest,
            )
            self.store.put_doc(MODELS, record.id, record.to_doc())
        return record

    def retrieve(self, query: Optional[ModelQuery] = None) -> list[ModelRecord]:
        query = query or ModelQuery()
        matched = [r for r in self._all_records() if query.matches(r)]
        return sorted(matched, key=lambda r: (r.name, r.version))

    def get(self, record_id: str) -> ModelRecord:
        doc = self.store.get_doc(MODELS, record_id)
        if doc is None:
            raise NotFound(f"no model with id {record_id}")
        return ModelRecord.from_doc(doc)

    def update(self, record_id: str, patch: dict,
               expected_updated_at: Optional[str] = None) -> ModelRecord:
        with self._lock_for(record_id):
            record = self.get(record_id)
            if expected_updated_at is not None and record.updated_at != expected_updated_at:
                raise UpdateConflict(
                    f"record changed at {record.updated_at}, expected {expected_updated_at}"
                )
            for key in patch:
                if key not in MUTABLE_FIELDS:
                    raise ImmutableField(f"field '{key}' cannot be updated")
            if "status" in patch:
                new_status = patch["status"]
                if not legal_transition(record.status, new_status):
                    raise IllegalTransition(
                        f"cannot move status from '{record.status}' to '{new_status}'"
                    )
                record.status = new_status
            if "task" in patch:
                record.task = str(patch["task"])
            if "dataset" in patch:
                record.dataset = str(patch["dataset"])
            if "metrics" in patch:
                metrics = patch["metrics"]
                if not isinstance(metrics, dict):
                    raise InvalidManifest("metrics patch must be a mapping")
                record.metrics = dict(metrics)
            record.touch()
            self.store.put_doc(MODELS, record.id, record.to_doc())
            return record

    def delete(self, record_id: str) -> dict:
        with self._lock_for(record_id):
            record = self.get(record_id)
            if self._in_use_check is not None and self._in_use_check(record_id):
                raise InUse(f"model {record_id} has live service instances")
            self.store.delete_doc(MODELS, record_id)
            # garbage-collect blobs no other record still references
            still_referenced: set[str] = set()
            for other in self._all_records():
                still_referenced |= other.referenced_digests()
            removed = []
            for digest in sorted(record.referenced_digests() - still_referenced):
                if self.store.delete_blob(digest):
                    removed.append(digest)
            return {
                "id": record_id,
                "variants_deleted": len(record.variants),
                "results_deleted": len(record.profiling_results),
                "blobs_deleted": removed,
            }

    # -- blob passthrough -------------------------------------------------------

    def put_blob(self, data: bytes) -> str:
        return self.store.put_blob(data)

    def get_blob(self, digest: str) -> bytes:
        return self.store.get_blob(digest)

    # -- pipeline helpers (used by the converter/profiler workers) ---------------

    def append_variant(self, record_id: str, variant: ModelVariant) -> ModelRecord:
        with self._lock_for(record_id):
            record = self.get(record_id)
            record.variants.append(variant)
            record.touch()
            self.store.put_doc(MODELS, record.id, record.to_doc())
            return record

    def append_result(self, record_id: str, result: ProfilingResult) -> ModelRecord:
        with self._lock_for(record_id):
            record = self.get(record_id)
            record.profiling_results.append(result)
            record.touch()
            self.store.put_doc(MODELS, record.id, record.to_doc())
            return record

    def set_status(self, record_id: str, status: str) -> ModelRecord:
        """Strict transition; raises IllegalTransition like update()."""
        return self.update(record_id, {"status": status})

    def advance_status(self, record_id: str, status: str) -> ModelRecord:
        """Best-effort transition for pipeline automation: no-op when the
        move would be backward or redundant."""
        with self._lock_for(record_id):
            record = self.get(record_id)
            if record.status != status and legal_transition(record.status, status):
                record.status = status
                record.touch()
                self.store.put_doc(MODELS, record.id, record.to_doc())
            return record

    # -- internals ---------------------------------------------------------------

    def _all_records(self) -> list[ModelRecord]:
        return [ModelRecord.from_doc(d) for d in self.store.list_docs(MODELS)]
