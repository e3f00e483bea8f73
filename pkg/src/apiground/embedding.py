"""Embedding of code text into unit vectors for similarity search.

The built-in embedder is a deterministic hashed bag of lowercase subtokens:
fully offline, reentrant, and good enough to capture the lexical overlap
between a hallucinated API and the real one. Remote embedding services plug
in behind the same transform interface; the embedder id pinned in a saved
index prevents ever mixing the two.
"""

from __future__ import annotations

import hashlib
import math
import re
import time

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import IncompatibilityError, TransportError

_ALNUM_RUN = re.compile(r"[A-Za-z0-9]+")
_CAMEL_PIECES = re.compile(r"[0-9]+|[A-Z]+(?![a-z])|[A-Z][a-z]*|[a-z]+")

NORM_TOLERANCE = 1e-6


def split_subtokens(text: str) -> list[str]:
    """Split code text into lowercase subtokens.

    Splits on non-alphanumeric characters, then on camelCase and digit
    boundaries, e.g. ``findByKeyword2`` -> ``find``, ``by``, ``keyword``, ``2``.
    """
    tokens: list[str] = []
    for run in _ALNUM_RUN.findall(text):
        tokens.extend(piece.lower() for piece in _CAMEL_PIECES.findall(run))
    return tokens


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors; 0.0 if either is zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def is_zero_vector(v: np.ndarray) -> bool:
    return not np.any(v)


class SubtokenHashingEmbedder(TransformerMixin, BaseEstimator):
    """Deterministic bag-of-subtokens embedder.

    Each subtoken is hashed into one of ``n_features`` buckets, weighted by
    ``1 + log(term frequency)``, and the result is L2-normalized. Empty or
    whitespace-only text maps to the all-zero vector. Hash collisions are
    accepted; there is no collision handling.
    """

    def __init__(self, n_features: int = 256):
        self.n_features = n_features

    @property
    def dimension(self) -> int:
        return self.n_features

    @property
    def embedder_id(self) -> str:
        return f"subtoken-hash-v1-d{self.n_features}"

    def fit(self, X=None, y=None):
        return self  # stateless

    def transform(self, X: list[str]) -> np.ndarray:
        return np.stack([self.embed(text) for text in X])

    def embed(self, text: str) -> np.ndarray:
        v = np.zeros(self.n_features, dtype=np.float64)
        counts: dict[str, int] = {}
        for token in split_subtokens(text):
            counts[token] = counts.get(token, 0) + 1
        for token, tf in counts.items():
            v[_bucket(token, self.n_features)] += 1.0 + math.log(tf)
        norm = float(np.linalg.norm(v))
        if norm > 0.0:
            v /= norm
        return v


def _bucket(token: str, n_features: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % n_features


class RemoteEmbedder(BaseEstimator):
    """Client for a single-endpoint embedding service.

    Request: ``POST url`` with ``{"texts": [...]}``; response:
    ``{"vectors": [[...], ...]}``. The auth token is read from the
    ``APIGROUND_EMBEDDER_TOKEN`` environment variable when not given.
    Transport failures are retried; a :class:`TransportError` carrying the
    attempt count is raised when the retries are exhausted.
    """

    def __init__(
        self,
        url: str,
        embedder_id: str,
        dimension: int,
        token: str | None = None,
        max_attempts: int = 3,
        timeout: float = 30.0,
        retry_delay: float = 0.5,
        session=None,
    ):
        self.url = url
        self._embedder_id = embedder_id
        self._dimension = dimension
        if token is None:
            import os

            token = os.environ.get("APIGROUND_EMBEDDER_TOKEN")
        self.token = token
        self.max_attempts = max_attempts
        self.timeout = timeout
        self.retry_delay = retry_delay
        if session is None:
            import requests

            session = requests.Session()
        self._session = session

    @property
    def embedder_id(self) -> str:
        return self._embedder_id

    @property
    def dimension(self) -> int:
        return self._dimension

    def fit(self, X=None, y=None):
        return self

    def transform(self, X: list[str]) -> np.ndarray:
        nonempty = [i for i, text in enumerate(X) if text.strip()]
        out = np.zeros((len(X), self._dimension), dtype=np.float64)
        if not nonempty:
            return out
        payload = {"texts": [X[i] for i in nonempty]}
        data = self._post(payload)
        vectors = np.asarray(data["vectors"], dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[1] != self._dimension:
            raise IncompatibilityError(
                f"embedding service returned dimension {vectors.shape[-1]}, "
                f"expected {self._dimension}"
            )
        norms = np.linalg.norm(vectors, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        out[nonempty] = vectors / norms
        return out

    def embed(self, text: str) -> np.ndarray:
        return self.transform([text])[0]

    def _post(self, payload: dict) -> dict:
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        last_error: Exception | None = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                response = self._session.post(
                    self.url, json=payload, headers=headers, timeout=self.timeout
                )
                response.raise_for_status()
                return response.json()
            except IncompatibilityError:
                raise
            except Exception as exc:  # transport or HTTP failure; retry
                last_error = exc
                if attempt < self.max_attempts:
                    time.sleep(self.retry_delay)
        raise TransportError(
            f"embedding request failed after {self.max_attempts} attempts: {last_error}",
            attempts=self.max_attempts,
        )
