"""File store checks: content addressing, dedup, durability."""

import random

import pytest

from modelci.errors import UnknownDigest
from modelci.registry.store import FileStore, sha256_hex


@pytest.fixture
def store(tmp_path):
    return FileStore(tmp_path / "store")


class TestBlobs:
    def test_round_trip_property(self, store):
        rng = random.Random(0xABCD)
        for _ in range(1000):
            blob = rng.randbytes(rng.randint(1, 512))
            digest = store.put_blob(blob)
            assert store.get_blob(digest) == blob

    def test_identical_bytes_one_copy(self, store, tmp_path):
        d1 = store.put_blob(b"same bytes")
        d2 = store.put_blob(b"same bytes")
        assert d1 == d2
        blob_files = list((tmp_path / "store" / "blobs").rglob("*"))
        assert sum(1 for p in blob_files if p.is_file()) == 1

    def test_digest_is_sha256(self, store):
        digest = store.put_blob(b"\x00\x01")
        assert digest == sha256_hex(b"\x00\x01")
        assert len(digest) == 64 and digest == digest.lower()

    def test_unknown_digest(self, store):
        with pytest.raises(UnknownDigest):
            store.get_blob("deadbeef" * 8)

    def test_malformed_digest(self, store):
        with pytest.raises(UnknownDigest):
            store.get_blob("deadbeef")
        assert not store.has_blob("nope")

    def test_delete_blob(self, store):
        digest = store.put_blob(b"bye")
        assert store.delete_blob(digest)
        assert not store.has_blob(digest)
        assert not store.delete_blob(digest)


class TestDocuments:
    def test_put_get_delete(self, store):
        store.put_doc("models", "abc", {"id": "abc", "x": 1})
        assert store.get_doc("models", "abc") == {"id": "abc", "x": 1}
        assert store.delete_doc("models", "abc")
        assert store.get_doc("models", "abc") is None
        assert not store.delete_doc("models", "abc")

    def test_list_docs_sorted_by_id(self, store):
        for doc_id in ["c", "a", "b"]:
            store.put_doc("models", doc_id, {"id": doc_id})
        assert [d["id"] for d in store.list_docs("models")] == ["a", "b", "c"]

    def test_list_missing_collection(self, store):
        assert list(store.list_docs("nothing")) == []

    def test_overwrite_replaces(self, store):
        store.put_doc("models", "x", {"v": 1})
        store.put_doc("models", "x", {"v": 2})
        assert store.get_doc("models", "x") == {"v": 2}

    def test_fresh_store_sees_committed_state(self, tmp_path):
        # crash durability: a second store over the same directory reads
        # everything the first one wrote
        first = FileStore(tmp_path / "s")
        first.put_doc("models", "m1", {"id": "m1"})
        digest = first.put_blob(b"weights")
        second = FileStore(tmp_path / "s")
        assert second.get_doc("models", "m1") == {"id": "m1"}
        assert second.get_blob(digest) == b"weights"
