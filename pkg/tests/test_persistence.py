import json

import numpy as np
import pytest

from apiground.errors import IntegrityError
from apiground.persistence import (
    ProjectIndexManifest,
    content_digest,
    load_index,
    save_index,
)
from apiground.references import render_reference

from conftest import random_unit_vectors


@pytest.fixture
def saved(tmp_path, example_references, embedder):
    texts = [render_reference(r) for r in example_references]
    vectors = embedder.transform(texts)
    digests = {"DataStore.py": content_digest("source"), "utils.py": content_digest("other")}
    base = tmp_path / "project_index"
    manifest = save_index(base, example_references, vectors, embedder.embedder_id, digests)
    return base, manifest, vectors


class TestSaveLoad:
    def test_two_file_pair_written(self, saved):
        base, _, _ = saved
        assert base.with_suffix(".json").exists()
        assert base.with_suffix(".vec").exists()

    def test_roundtrip_preserves_entries(self, saved, example_references):
        base, _, _ = saved
        manifest, _ = load_index(base)
        assert manifest.entries == example_references
        assert manifest.embedder_id == "subtoken-hash-v1-d256"
        assert manifest.dimension == 256
        assert set(manifest.file_digests) == {"DataStore.py", "utils.py"}

    def test_vectors_roundtrip_at_float32_precision(self, saved):
        base, _, original = saved
        _, loaded = load_index(base)
        assert loaded.dtype == np.float64
        assert np.allclose(loaded, original, atol=1e-6)
        assert np.array_equal(loaded, original.astype(np.float32).astype(np.float64))

    def test_blob_is_little_endian_float32_in_entry_order(self, saved):
        base, manifest, original = saved
        blob = base.with_suffix(".vec").read_bytes()
        assert len(blob) == len(manifest.entries) * manifest.dimension * 4
        first = np.frombuffer(blob[: manifest.dimension * 4], dtype="<f4")
        assert np.array_equal(first, original[0].astype("<f4"))

    def test_offsets_are_consecutive(self, saved):
        _, manifest, _ = saved
        assert manifest.vector_offsets == [i * 256 * 4 for i in range(4)]

    def test_manifest_is_plain_json(self, saved):
        base, _, _ = saved
        data = json.loads(base.with_suffix(".json").read_text())
        assert data["embedder_id"] == "subtoken-hash-v1-d256"
        assert all("vector_offset" in e for e in data["entries"])
        roundtrip = ProjectIndexManifest.from_dict(data)
        assert roundtrip.vector_offsets == [e["vector_offset"] for e in data["entries"]]

    def test_vector_count_mismatch_rejected(self, tmp_path, example_references):
        with pytest.raises(ValueError, match="does not match"):
            save_index(
                tmp_path / "bad",
                example_references,
                random_unit_vectors(3, 8, seed=0),  # 3 vectors, 4 entries
                "id",
                {},
            )

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="manifest"):
            load_index(tmp_path / "nothing")

    def test_missing_blob(self, saved):
        base, _, _ = saved
        base.with_suffix(".vec").unlink()
        with pytest.raises(FileNotFoundError, match="blob"):
            load_index(base)


class TestIntegrity:
    def test_truncated_blob_names_first_unreadable_entry(self, saved, example_references):
        base, _, _ = saved
        blob = base.with_suffix(".vec").read_bytes()
        base.with_suffix(".vec").write_bytes(blob[: 2 * 256 * 4 + 17])
        with pytest.raises(IntegrityError) as exc_info:
            load_index(base)
        assert example_references[2].qualified_name in str(exc_info.value)

    def test_oversized_blob_rejected(self, saved):
        base, _, _ = saved
        blob = base.with_suffix(".vec").read_bytes()
        base.with_suffix(".vec").write_bytes(blob + b"\x00" * 4)
        with pytest.raises(IntegrityError, match="expected"):
            load_index(base)

    def test_corrupted_blob_fails_digest_check(self, saved):
        base, _, _ = saved
        blob = bytearray(base.with_suffix(".vec").read_bytes())
        blob[100] ^= 0xFF
        base.with_suffix(".vec").write_bytes(bytes(blob))
        with pytest.raises(IntegrityError, match="digest"):
            load_index(base)

    def test_content_digest_is_sha256(self):
        import hashlib

        assert content_digest("abc") == hashlib.sha256(b"abc").hexdigest()
