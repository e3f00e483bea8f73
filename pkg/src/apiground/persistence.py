"""Persistence of a pre-analyzed project index.

A saved index is a two-file pair sharing a base path:

* ``<base>.json`` — the manifest: embedder id, vector dimension, creation
  timestamp, per-source-file content digests, and the reference entries,
  each carrying the byte offset of its vector in the blob.
* ``<base>.vec`` — raw little-endian float32 vectors, stored consecutively
  in entry order.

The manifest records a digest of the blob so corruption is detected at
load time, naming the first entry whose vector cannot be read.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import IntegrityError
from .references import ApiReference

MANIFEST_SUFFIX = ".json"
VECTORS_SUFFIX = ".vec"
_FLOAT_BYTES = 4


@dataclass
class ProjectIndexManifest:
    embedder_id: str
    dimension: int
    created_at: str
    file_digests: dict[str, str]
    entries: list[ApiReference]
    vector_offsets: list[int]
    vector_digest: str = ""

    def to_dict(self) -> dict:
        return {
            "embedder_id": self.embedder_id,
            "dimension": self.dimension,
            "created_at": self.created_at,
            "file_digests": self.file_digests,
            "vector_digest": self.vector_digest,
            "entries": [
                dict(ref.to_dict(), vector_offset=offset)
                for ref, offset in zip(self.entries, self.vector_offsets)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProjectIndexManifest":
        entries = [ApiReference.from_dict(e) for e in d["entries"]]
        offsets = [int(e["vector_offset"]) for e in d["entries"]]
        return cls(
            embedder_id=d["embedder_id"],
            dimension=int(d["dimension"]),
            created_at=d["created_at"],
            file_digests=dict(d["file_digests"]),
            entries=entries,
            vector_offsets=offsets,
            vector_digest=d.get("vector_digest", ""),
        )


def content_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def save_index(
    base_path: str | Path,
    references: list[ApiReference],
    vectors: np.ndarray,
    embedder_id: str,
    file_digests: dict[str, str],
) -> ProjectIndexManifest:
    """Write the manifest/blob pair; returns the manifest that was written."""
    base = Path(base_path)
    vectors = np.asarray(vectors, dtype=np.float32)
    if vectors.ndim != 2 or vectors.shape[0] != len(references):
        raise ValueError(
            f"vector count {vectors.shape[0] if vectors.ndim == 2 else '?'} "
            f"does not match {len(references)} entries"
        )
    dimension = vectors.shape[1]
    blob = vectors.astype("<f4").tobytes()
    offsets = [i * dimension * _FLOAT_BYTES for i in range(len(references))]
    manifest = ProjectIndexManifest(
        embedder_id=embedder_id,
        dimension=dimension,
        created_at=datetime.now(timezone.utc).isoformat(),
        file_digests=dict(file_digests),
        entries=list(references),
        vector_offsets=offsets,
        vector_digest=hashlib.sha256(blob).hexdigest(),
    )
    base.parent.mkdir(parents=True, exist_ok=True)
    base.with_suffix(base.suffix + VECTORS_SUFFIX).write_bytes(blob)
    base.with_suffix(base.suffix + MANIFEST_SUFFIX).write_text(
        json.dumps(manifest.to_dict(), indent=2)
    )
    return manifest


def load_index(base_path: str | Path) -> tuple[ProjectIndexManifest, np.ndarray]:
    """Load and integrity-check a saved index; returns (manifest, float64 vectors)."""
    base = Path(base_path)
    manifest_path = base.with_suffix(base.suffix + MANIFEST_SUFFIX)
    vectors_path = base.with_suffix(base.suffix + VECTORS_SUFFIX)
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest at {manifest_path}")
    if not vectors_path.exists():
        raise FileNotFoundError(f"no vector blob at {vectors_path}")
    manifest = ProjectIndexManifest.from_dict(json.loads(manifest_path.read_text()))
    blob = vectors_path.read_bytes()

    entry_bytes = manifest.dimension * _FLOAT_BYTES
    for ref, offset in zip(manifest.entries, manifest.vector_offsets):
        if offset + entry_bytes > len(blob):
            raise IntegrityError(
                f"vector blob truncated: entry {ref.qualified_name!r} needs bytes "
                f"[{offset}, {offset + entry_bytes}) but blob has {len(blob)}"
            )
    expected = len(manifest.entries) * entry_bytes
    if len(blob) != expected:
        raise IntegrityError(
            f"vector blob has {len(blob)} bytes, expected {expected} for "
            f"{len(manifest.entries)} entries of dimension {manifest.dimension}"
        )
    if manifest.vector_digest and hashlib.sha256(blob).hexdigest() != manifest.vector_digest:
        raise IntegrityError("vector blob digest does not match the manifest")

    vectors = np.frombuffer(blob, dtype="<f4").reshape(
        len(manifest.entries), manifest.dimension
    )
    return manifest, vectors.astype(np.float64)
