import random
from pathlib import Path

import pytest

from apiground.embedding import SubtokenHashingEmbedder
from apiground.references import ApiReference, Param, ReferenceKind
from apiground.retrieval import ReferenceCatalog

FIXTURES = Path(__file__).parent / "fixtures"
RUNNING_EXAMPLE = FIXTURES / "running_example"

HALLUCINATED_COMPLETION = (
    "    return sorted(docs, key=x.score(document, keyword), reverse=True)[:top_k]"
)
CORRECT_COMPLETION = (
    "    return sorted(docs, key=lambda d: relevance(d, keyword), reverse=True)[:top_k]"
)
RELEVANCE_LINE = "relevance(document: str, keyword: str) -> float"


@pytest.fixture
def embedder():
    return SubtokenHashingEmbedder()


@pytest.fixture
def example_references():
    """The four references of the running-example project."""
    return [
        ApiReference(
            ReferenceKind.FUNCTION,
            "DataStore.find_by_keyword",
            (Param("self"), Param("keyword", "str")),
            "List[str]",
            source_file="DataStore.py",
        ),
        ApiReference(
            ReferenceKind.FUNCTION,
            "relevance",
            (Param("document", "str"), Param("keyword", "str")),
            "float",
            source_file="utils.py",
        ),
        ApiReference(ReferenceKind.CLASS, "DataStore", source_file="DataStore.py"),
        ApiReference(ReferenceKind.ATTRIBUTE, "DataStore.documents", source_file="DataStore.py"),
    ]


@pytest.fixture
def example_catalog(example_references, embedder):
    return ReferenceCatalog(example_references, embedder)


@pytest.fixture
def search_context():
    return (FIXTURES / "search_context.py").read_text()


def random_unit_vectors(count, dim, seed):
    import numpy as np

    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def random_code_text(rng: random.Random, max_lines: int = 12) -> str:
    words = [
        "data", "load", "store", "fetch", "parse", "merge", "result", "index",
        "cache", "value", "records", "items", "batch", "config", "path",
    ]
    lines = []
    for _ in range(rng.randint(1, max_lines)):
        name = "_".join(rng.sample(words, rng.randint(1, 3)))
        arg = rng.choice(words)
        lines.append(rng.choice([
            f"{name} = {arg}.copy()",
            f"result = {name}({arg}, limit={rng.randint(1, 99)})",
            f"for item in {name}: process(item)",
            f"# {name} handles {arg}",
            "",
        ]))
    return "\n".join(lines)
