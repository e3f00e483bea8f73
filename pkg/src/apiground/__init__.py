"""Grounding black-box LLM code generation in a project's real API surface.

Workflow: extract and embed the project's API references once, then for
each completion request run an initial query, a RAG query, and up to k
iterative queries whose retrieved references come from the model's own
previous output.
"""

from .embedding import RemoteEmbedder, SubtokenHashingEmbedder, cosine_similarity
from .errors import (
    ApigroundError,
    BudgetError,
    IncompatibilityError,
    IntegrityError,
    TransportError,
)
from .evaluation import (
    CompletionTask,
    ScoreReport,
    best_at_k,
    build_tasks,
    edit_distance,
    exact_api_match,
    normalized_edit_similarity,
    subtokenize,
    tally_refinement_outcomes,
)
from .index import ReferenceIndex, build_index, nearest
from .llm import CachingLlm, HttpLlm, LlmRequest, LlmResponse, ScriptedLlm
from .loop import (
    GenerationTrace,
    LoopConfig,
    detect_hallucination_error,
    rank_completions,
    run_loop,
    run_refinement_on_failure,
)
from .persistence import ProjectIndexManifest, load_index, save_index
from .prompting import Placement, PromptMode, PromptSpec, build_prompt, count_tokens
from .references import (
    ApiReference,
    ReferenceKind,
    extract_api_references,
    render_reference,
)
from .retrieval import (
    ApiUsage,
    ReferenceCatalog,
    RetrievalResult,
    extract_api_usages,
    retrieve_per_line,
    retrieve_per_usage,
)

__version__ = "0.1.0"

__all__ = [
    "ApiReference",
    "ApiUsage",
    "ApigroundError",
    "BudgetError",
    "CachingLlm",
    "CompletionTask",
    "GenerationTrace",
    "HttpLlm",
    "IncompatibilityError",
    "IntegrityError",
    "LlmRequest",
    "LlmResponse",
    "LoopConfig",
    "Placement",
    "ProjectIndexManifest",
    "PromptMode",
    "PromptSpec",
    "ReferenceCatalog",
    "ReferenceIndex",
    "ReferenceKind",
    "RemoteEmbedder",
    "RetrievalResult",
    "ScoreReport",
    "ScriptedLlm",
    "SubtokenHashingEmbedder",
    "TransportError",
    "best_at_k",
    "build_index",
    "build_prompt",
    "build_tasks",
    "cosine_similarity",
    "count_tokens",
    "detect_hallucination_error",
    "edit_distance",
    "exact_api_match",
    "extract_api_references",
    "extract_api_usages",
    "load_index",
    "nearest",
    "normalized_edit_similarity",
    "rank_completions",
    "render_reference",
    "retrieve_per_line",
    "retrieve_per_usage",
    "run_loop",
    "run_refinement_on_failure",
    "save_index",
    "subtokenize",
    "tally_refinement_outcomes",
]
