"""Retrieval of the top-n API references for a piece of code.

Two retrieval granularities mirror the two target tasks: per line (code
completion, where we also want to surface APIs that would replace
re-implemented logic) and per extracted call usage (test repair, where only
fixing wrong calls matters). Each unit queries the index for its own top-n
candidates; the per-unit lists are merged by similarity, deduplicated
keeping the maximum score, and truncated to n.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .embedding import is_zero_vector
from .errors import IncompatibilityError
from .index import DEFAULT_LINEAR_THRESHOLD, ReferenceIndex, build_index
from .references import ApiReference, render_reference

_COMMENT_PREFIXES = ("#", "//", "/*", "*", '"""', "'''")
_IMPORT_RE = re.compile(r"^\s*(import\s|from\s+\S+\s+import\s|const\s+.*=\s*require\s*\()")

# Longest dotted identifier chain immediately preceding an opening paren.
_CALL_HEAD_RE = re.compile(r"((?:[A-Za-z_$][\w$]*\.)*[A-Za-z_$][\w$]*)\s*\(")

_CALL_KEYWORDS = {
    "if", "elif", "for", "while", "switch", "catch", "with", "return",
    "and", "or", "not", "in", "is", "assert", "yield", "await", "del",
    "function", "def", "class", "lambda", "typeof",
}


@dataclass(frozen=True)
class ApiUsage:
    """A syntactic call site: dotted access path plus raw argument texts."""

    path: str
    args: tuple[str, ...]

    def as_text(self) -> str:
        return f"{self.path}({', '.join(self.args)})"


@dataclass(frozen=True)
class RetrievedReference:
    reference: ApiReference
    similarity: float
    query_unit: str


@dataclass
class RetrievalResult:
    mode: str  # "per_line" | "per_usage"
    refs: list[RetrievedReference] = field(default_factory=list)

    def rendered_lines(self, max_line_length: int | None = None) -> list[str]:
        if max_line_length is None:
            return [render_reference(r.reference) for r in self.refs]
        return [render_reference(r.reference, max_line_length) for r in self.refs]

    def __len__(self):
        return len(self.refs)

    def __bool__(self):
        return bool(self.refs)


class ReferenceCatalog:
    """An embedded, searchable collection of a project's API references."""

    def __init__(
        self,
        references: list[ApiReference],
        embedder,
        linear_threshold: int = DEFAULT_LINEAR_THRESHOLD,
        structure: str | None = None,
        vectors=None,
    ):
        self.references = list(references)
        self.embedder = embedder
        if vectors is None:
            texts = [render_reference(r) for r in self.references]
            vectors = embedder.transform(texts) if texts else None
        pairs = []
        for i, ref in enumerate(self.references):
            v = vectors[i]
            if is_zero_vector(v):
                continue  # nothing to embed; unreachable for rendered references
            pairs.append((i, v))
        self.index: ReferenceIndex = build_index(
            pairs,
            threshold=linear_threshold,
            embedder_id=embedder.embedder_id,
            structure=structure,
        )

    def __len__(self):
        return len(self.references)

    @property
    def embedder_id(self) -> str:
        return self.embedder.embedder_id

    @classmethod
    def from_saved(cls, manifest, vectors, embedder, linear_threshold: int = DEFAULT_LINEAR_THRESHOLD):
        """Build a catalog from a loaded manifest, reusing the stored vectors."""
        if manifest.embedder_id != embedder.embedder_id:
            raise IncompatibilityError(
                f"index was built with embedder {manifest.embedder_id!r}, "
                f"query embedder is {embedder.embedder_id!r}"
            )
        vectors = np.asarray(vectors, dtype=np.float64).copy()
        norms = np.linalg.norm(vectors, axis=1, keepdims=True)
        nonzero = norms[:, 0] > 0.0
        vectors[nonzero] /= norms[nonzero]  # undo float32 storage rounding
        return cls(manifest.entries, embedder, linear_threshold=linear_threshold, vectors=vectors)


def extract_api_usages(code: str) -> list[ApiUsage]:
    """Extract syntactic call sites via regular-expression matching.

    Returns the dotted access path and the top-level comma-split argument
    texts for every call; nested calls yield both the outer and the inner
    usage. Candidates with unmatched parentheses are dropped silently.
    """
    usages: list[ApiUsage] = []
    for m in _CALL_HEAD_RE.finditer(code):
        path = m.group(1)
        if path.split(".")[-1] in _CALL_KEYWORDS or path.split(".")[0] in _CALL_KEYWORDS:
            continue
        args = _scan_arguments(code, m.end() - 1)
        if args is None:
            continue
        usages.append(ApiUsage(path=path, args=tuple(args)))
    return usages


def _scan_arguments(code: str, open_paren: int) -> list[str] | None:
    """Scan a balanced argument list starting at ``code[open_paren] == '('``."""
    depth = 0
    args: list[str] = []
    current: list[str] = []
    quote: str | None = None
    i = open_paren
    while i < len(code):
        c = code[i]
        if quote is not None:
            current.append(c)
            if c == quote and code[i - 1] != "\\":
                quote = None
        elif c in "\"'":
            quote = c
            current.append(c)
        elif c in "([{":
            depth += 1
            if depth > 1:
                current.append(c)
        elif c in ")]}":
            depth -= 1
            if depth == 0:
                text = "".join(current).strip()
                if text:
                    args.append(text)
                return args
            current.append(c)
        elif c == "," and depth == 1:
            text = "".join(current).strip()
            if text:
                args.append(text)
            current = []
        else:
            if depth >= 1:
                current.append(c)
        i += 1
    return None  # unmatched parenthesis


def _is_retrieval_line(line: str) -> bool:
    stripped = line.strip()
    if not stripped:
        return False
    if any(stripped.startswith(p) for p in _COMMENT_PREFIXES):
        return False
    if _IMPORT_RE.match(stripped):
        return False
    return True


def _retrieve_units(units: list[str], catalog: ReferenceCatalog, n: int, mode: str) -> RetrievalResult:
    if n < 1:
        raise ValueError("n must be >= 1")
    result = RetrievalResult(mode=mode)
    if len(catalog.index) == 0 or not units:
        return result
    best: dict[int, RetrievedReference] = {}
    vectors = catalog.embedder.transform(units)
    for unit, vector in zip(units, vectors):
        if is_zero_vector(vector):
            continue
        for ref_idx, similarity in catalog.index.nearest(vector, n):
            prev = best.get(ref_idx)
            if prev is None or similarity > prev.similarity:
                best[ref_idx] = RetrievedReference(
                    reference=catalog.references[ref_idx],
                    similarity=similarity,
                    query_unit=unit,
                )
    ranked = sorted(best.items(), key=lambda kv: (-kv[1].similarity, kv[0]))
    result.refs = [r for _, r in ranked[:n]]
    return result


def retrieve_per_line(code: str, catalog: ReferenceCatalog, n: int) -> RetrievalResult:
    """Retrieve the top-n references most similar to any line of ``code``.

    Blank, comment-only, and import lines are skipped as retrieval units.
    """
    units = [line for line in code.splitlines() if _is_retrieval_line(line)]
    return _retrieve_units(units, catalog, n, mode="per_line")


def retrieve_per_usage(code: str, catalog: ReferenceCatalog, n: int) -> RetrievalResult:
    """Retrieve the top-n references most similar to any call usage in ``code``."""
    seen: set[str] = set()
    units: list[str] = []
    for usage in extract_api_usages(code):
        text = usage.as_text()
        if text not in seen:
            seen.add(text)
            units.append(text)
    return _retrieve_units(units, catalog, n, mode="per_usage")
