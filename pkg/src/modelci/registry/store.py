"""Pluggable document + blob storage.

The default backend keeps one JSON file per document under ``meta/`` and
content-addressed blobs under ``blobs/<first-2-hex>/<digest>``. Writes go
through a temp file + atomic rename so readers only ever see committed
state; blob digests are lowercase hex SHA-256.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Iterator, Optional

from modelci.errors import StorageFailure, UnknownDigest


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class StoreBackend(ABC):
    """Interface the registry persists through; swap in a real database by
    implementing these eight methods."""

    @abstractmethod
    def put_doc(self, collection: str, doc_id: str, doc: dict) -> None: ...

    @abstractmethod
    def get_doc(self, collection: str, doc_id: str) -> Optional[dict]: ...

    @abstractmethod
    def delete_doc(self, collection: str, doc_id: str) -> bool: ...

    @abstractmethod
    def list_docs(self, collection: str) -> Iterator[dict]: ...

    @abstractmethod
    def put_blob(self, data: bytes) -> str: ...

    @abstractmethod
    def get_blob(self, digest: str) -> bytes: ...

    @abstractmethod
    def has_blob(self, digest: str) -> bool: ...

    @abstractmethod
    def delete_blob(self, digest: str) -> bool: ...


class FileStore(StoreBackend):
    """File-backed store rooted at a directory; safe for concurrent callers
    within one process (atomic renames make cross-process readers safe too)."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.meta_dir = self.root / "meta"
        self.blob_dir = self.root / "blobs"
        self.meta_dir.mkdir(parents=True, exist_ok=True)
        self.blob_dir.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()

    # -- documents ----------------------------------------------------------

    def _doc_path(self, collection: str, doc_id: str) -> Path:
        if "/" in doc_id or doc_id in ("", ".", ".."):
            raise StorageFailure(f"unusable document id: {doc_id!r}")
        return self.meta_dir / collection / f"{doc_id}.json"

    def put_doc(self, collection: str, doc_id: str, doc: dict) -> None:
        path = self._doc_path(collection, doc_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        data = json.dumps(doc, indent=2, sort_keys=True).encode()
        with self._write_lock:
            self._atomic_write(path, data)

    def get_doc(self, collection: str, doc_id: str) -> Optional[dict]:
        path = self._doc_path(collection, doc_id)
        try:
            return json.loads(path.read_text())
        except FileNotFoundError:
            return None
        except json.JSONDecodeError as exc:
            raise StorageFailure(f"corrupt document {path}: {exc}") from exc

    def delete_doc(self, collection: str, doc_id: str) -> bool:
        path = self._doc_path(collection, doc_id)
        with self._write_lock:
            try:
                path.unlink()
                return True
            except FileNotFoundError:
                return False

    def list_docs(self, collection: str) -> Iterator[dict]:
        coll_dir = self.meta_dir / collection
        if not coll_dir.is_dir():
            return
        for path in sorted(coll_dir.glob("*.json")):
            try:
                yield json.loads(path.read_text())
            except FileNotFoundError:
                continue  # deleted while listing
            except json.JSONDecodeError as exc:
                raise StorageFailure(f"corrupt document {path}: {exc}") from exc

    # -- blobs ---------------------------------------------------------------

    def _blob_path(self, digest: str) -> Path:
        if len(digest) != 64 or any(c not in "0123456789abcdef" for c in digest):
            raise UnknownDigest(f"not a sha-256 hex digest: {digest!r}")
        return self.blob_dir / digest[:2] / digest

    def put_blob(self, data: bytes) -> str:
        digest = sha256_hex(data)
        path = self.blob_dir / digest[:2] / digest
        if path.exists():
            return digest  # content addressed: identical bytes dedupe
        path.parent.mkdir(parents=True, exist_ok=True)
        self._atomic_write(path, data)
        return digest

    def get_blob(self, digest: str) -> bytes:
        try:
            return self._blob_path(digest).read_bytes()
        except FileNotFoundError:
            raise UnknownDigest(f"no blob with digest {digest}") from None

    def has_blob(self, digest: str) -> bool:
        try:
            return self._blob_path(digest).exists()
        except UnknownDigest:
            return False

    def delete_blob(self, digest: str) -> bool:
        try:
            self._blob_path(digest).unlink()
            return True
        except FileNotFoundError:
            return False

    # -- helpers --------------------------------------------------------------

    @staticmethod
    def _atomic_write(path: Path, data: bytes) -> None:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except OSError as exc:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise StorageFailure(f"write to {path} failed: {exc}") from exc
