"""Exact nearest-neighbor search over unit vectors.

Small collections use a brute-force linear scan; larger ones a ball tree.
Both report similarity as ``1 - d^2 / 2`` where ``d`` is the Euclidean
distance between unit vectors, so cosine order and Euclidean order agree,
and both compute per-pair distances with identical arithmetic so their
results are bit-for-bit equal. Ties are broken by ascending ref_id.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .embedding import NORM_TOLERANCE, is_zero_vector

DEFAULT_LINEAR_THRESHOLD = 512
DEFAULT_LEAF_SIZE = 32

# Slack on the ball-tree pruning bound: never risk dropping a boundary point
# to float rounding; visiting a few extra leaves is free.
_PRUNE_SLACK = 1e-9


@dataclass
class QueryResult:
    """Ranked matches for one query; ``zero_query`` flags a degenerate query."""

    matches: list[tuple[Hashable, float]]
    zero_query: bool = False

    def __iter__(self):
        return iter(self.matches)

    def __len__(self):
        return len(self.matches)


@dataclass
class _Ball:
    center: np.ndarray
    radius: float
    indices: np.ndarray | None = None  # leaf only
    left: "_Ball | None" = None
    right: "_Ball | None" = None


class ReferenceIndex:
    """Immutable exact-NN index over (ref_id, unit vector) pairs."""

    def __init__(
        self,
        ref_ids: Sequence[Hashable],
        vectors: np.ndarray,
        structure: str,
        leaf_size: int = DEFAULT_LEAF_SIZE,
        embedder_id: str = "",
    ):
        if structure not in ("linear", "ball_tree"):
            raise ValueError(f"unknown structure: {structure!r}")
        self.ref_ids = list(ref_ids)
        self.vectors = np.ascontiguousarray(vectors, dtype=np.float64)
        self.structure = structure
        self.leaf_size = leaf_size
        self.embedder_id = embedder_id
        # Tie-break rank: position in the sorted order of ref_ids.
        order = sorted(range(len(self.ref_ids)), key=lambda i: self.ref_ids[i])
        self._rank = np.empty(len(order), dtype=np.int64)
        for rank, i in enumerate(order):
            self._rank[i] = rank
        self._root = (
            self._build_ball(np.arange(len(self.ref_ids)))
            if structure == "ball_tree" and len(self.ref_ids) > 0
            else None
        )

    def __len__(self):
        return len(self.ref_ids)

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1] if self.vectors.ndim == 2 else 0

    # -- construction ------------------------------------------------------

    def _build_ball(self, indices: np.ndarray) -> _Ball:
        points = self.vectors[indices]
        center = points.mean(axis=0)
        radius = float(np.sqrt(((points - center) ** 2).sum(axis=1)).max())
        if len(indices) <= self.leaf_size:
            return _Ball(center=center, radius=radius, indices=indices)
        spread = points.max(axis=0) - points.min(axis=0)
        dim = int(np.argmax(spread))
        order = np.argsort(points[:, dim], kind="stable")
        mid = len(indices) // 2
        return _Ball(
            center=center,
            radius=radius,
            left=self._build_ball(indices[order[:mid]]),
            right=self._build_ball(indices[order[mid:]]),
        )

    # -- querying ----------------------------------------------------------

    def nearest(self, query: np.ndarray, m: int) -> QueryResult:
        """Return the ``min(m, len(self))`` most similar entries.

        Results are sorted by similarity descending, ties broken by
        ascending ref_id. A zero query vector yields an empty, flagged
        result rather than an error.
        """
        if m < 1:
            raise ValueError("m must be >= 1")
        query = np.asarray(query, dtype=np.float64)
        if len(self) == 0:
            return QueryResult(matches=[])
        if query.shape != (self.dimension,):
            raise ValueError(
                f"query dimension {query.shape} does not match index ({self.dimension},)"
            )
        if is_zero_vector(query):
            return QueryResult(matches=[], zero_query=True)

        if self.structure == "linear" or self._root is None:
            picked = self._scan(np.arange(len(self.ref_ids)), query, m)
        else:
            picked = self._search_tree(query, m)
        matches = [
            (self.ref_ids[i], 1.0 - d2 / 2.0)
            for d2, _, i in sorted(picked)
        ]
        return QueryResult(matches=matches)

    def _scan(self, indices: np.ndarray, query: np.ndarray, m: int):
        d2 = ((self.vectors[indices] - query) ** 2).sum(axis=1)
        items = [(float(d), int(self._rank[i]), int(i)) for d, i in zip(d2, indices)]
        return heapq.nsmallest(m, items)

    def _search_tree(self, query: np.ndarray, m: int):
        # Max-heap (via negation) of the current m best (d^2, rank) pairs.
        heap: list[tuple[float, int, int]] = []

        def visit(node: _Ball):
            dist_to_center = float(np.sqrt(((query - node.center) ** 2).sum()))
            lower = max(0.0, dist_to_center - node.radius)
            if len(heap) == m and lower * lower > -heap[0][0] + _PRUNE_SLACK:
                return
            if node.indices is not None:
                d2 = ((self.vectors[node.indices] - query) ** 2).sum(axis=1)
                for d, i in zip(d2, node.indices):
                    item = (-float(d), -int(self._rank[i]), int(i))
                    if len(heap) < m:
                        heapq.heappush(heap, item)
                    elif item > heap[0]:
                        heapq.heapreplace(heap, item)
                return
            children = [node.left, node.right]
            children.sort(
                key=lambda c: float(((query - c.center) ** 2).sum())
            )
            for child in children:
                visit(child)

        visit(self._root)
        return sorted((-d2, -nrank, i) for d2, nrank, i in heap)


def build_index(
    pairs: Sequence[tuple[Hashable, np.ndarray]],
    threshold: int = DEFAULT_LINEAR_THRESHOLD,
    leaf_size: int = DEFAULT_LEAF_SIZE,
    embedder_id: str = "",
    structure: str | None = None,
) -> ReferenceIndex:
    """Build an immutable index; linear below ``threshold`` entries, else ball tree.

    All vectors must be unit length; zero vectors are rejected with an error
    naming the offending ref_id. ``structure`` forces a layout regardless of
    size (used by tests to cross-check the two).
    """
    ref_ids = [ref_id for ref_id, _ in pairs]
    arrays = [np.asarray(v, dtype=np.float64) for _, v in pairs]
    if len({a.shape for a in arrays}) > 1:
        raise ValueError("vectors have mixed dimensions")
    for ref_id, a in zip(ref_ids, arrays):
        norm = float(np.linalg.norm(a))
        if norm == 0.0:
            raise ValueError(f"zero vector for ref_id {ref_id!r} cannot be indexed")
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise ValueError(f"vector for ref_id {ref_id!r} is not unit length (norm={norm})")
    vectors = np.stack(arrays) if arrays else np.zeros((0, 0), dtype=np.float64)
    if structure is None:
        structure = "linear" if len(pairs) < threshold else "ball_tree"
    return ReferenceIndex(
        ref_ids, vectors, structure=structure, leaf_size=leaf_size, embedder_id=embedder_id
    )


def nearest(index: ReferenceIndex, query: np.ndarray, m: int) -> QueryResult:
    """Functional alias for :meth:`ReferenceIndex.nearest`."""
    return index.nearest(query, m)
