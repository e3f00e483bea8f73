"""The grounded generation loop.

One completion run issues at most 2 + k model queries: the initial prompt,
a RAG prompt whose references are retrieved from the initial prompt's own
text, and up to k iterative prompts whose references are retrieved from the
model's previous completion. The failure-refinement entry point starts
directly at the iterative stage and is gated on the error message looking
like a hallucinated API.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import TransportError
from .llm import DEFAULT_MAX_NEW_TOKENS, LlmClient, LlmRequest
from .prompting import (
    DEFAULT_BUDGET_TOKENS,
    Placement,
    PromptMode,
    PromptSpec,
    build_prompt,
)
from .retrieval import (
    ReferenceCatalog,
    RetrievalResult,
    retrieve_per_line,
    retrieve_per_usage,
)

HALLUCINATION_PATTERNS = ("is not a function", "of undefined")


@dataclass
class LoopConfig:
    k: int = 3  # iterative refinements beyond the initial and RAG queries
    n: int = 20  # references per prompt
    placement: Placement = Placement.PREPEND
    comment_prefix: str = "# "
    budget_tokens: int = DEFAULT_BUDGET_TOKENS
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS
    temperature: float = 0.0
    num_completions: int = 1


@dataclass
class TraceStep:
    prompt_mode: PromptMode
    prompt: PromptSpec
    retrieved: RetrievalResult | None
    completions: list[str]
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "prompt_mode": self.prompt_mode.value,
            "prompt": self.prompt.to_dict(),
            "retrieved": (
                [
                    {
                        "qualified_name": r.reference.qualified_name,
                        "similarity": r.similarity,
                        "query_unit": r.query_unit,
                    }
                    for r in self.retrieved.refs
                ]
                if self.retrieved is not None
                else None
            ),
            "completions": self.completions,
            "error": self.error,
        }


@dataclass
class GenerationTrace:
    steps: list[TraceStep] = field(default_factory=list)
    mode: str = "completion"  # "completion" | "refinement"
    k: int = 0
    n: int = 0

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "k": self.k,
            "n": self.n,
            "steps": [s.to_dict() for s in self.steps],
        }


def detect_hallucination_error(message: str) -> bool:
    """True iff the message looks like a hallucinated-API runtime error."""
    return any(pattern in message for pattern in HALLUCINATION_PATTERNS)


def rank_completions(trace: GenerationTrace) -> list[str]:
    """All completions across the trace, later (more grounded) steps first.

    Textual duplicates are kept once, at their best position.
    """
    ranked: list[str] = []
    seen: set[str] = set()
    for step in reversed(trace.steps):
        for completion in step.completions:
            if completion not in seen:
                seen.add(completion)
                ranked.append(completion)
    return ranked


def _query(llm: LlmClient, prompt: PromptSpec, config: LoopConfig) -> tuple[list[str], str | None]:
    request = LlmRequest(
        prompt=prompt.text,
        max_new_tokens=config.max_new_tokens,
        temperature=config.temperature,
        num_completions=config.num_completions,
    )
    try:
        response = llm.complete(request)
        return response.completions, None
    except TransportError as exc:
        return [], str(exc)


def _latest_completion(steps: list[TraceStep], fallback: str) -> str:
    for step in reversed(steps):
        if step.completions:
            return step.completions[0]
    return fallback


def run_loop(
    code_context: str,
    catalog: ReferenceCatalog | None,
    llm: LlmClient,
    config: LoopConfig | None = None,
) -> GenerationTrace:
    """Run the full initial -> RAG -> iterative progression.

    With an empty (or absent) catalog the loop degrades to the initial query
    only. A failed model query is recorded on its step and the loop keeps
    going with the remaining budget.
    """
    config = config or LoopConfig()
    if config.k < 0:
        raise ValueError("k must be >= 0")
    trace = GenerationTrace(mode="completion", k=config.k, n=config.n)

    def step(mode: PromptMode, retrieved: RetrievalResult | None):
        prompt = build_prompt(
            code_context,
            retrieved,
            mode=mode,
            placement=config.placement,
            comment_prefix=config.comment_prefix,
            budget=config.budget_tokens,
        )
        completions, error = _query(llm, prompt, config)
        trace.steps.append(
            TraceStep(
                prompt_mode=mode,
                prompt=prompt,
                retrieved=retrieved,
                completions=completions,
                error=error,
            )
        )

    step(PromptMode.INITIAL, None)
    if catalog is None or len(catalog) == 0:
        return trace

    initial_prompt_text = trace.steps[0].prompt.text
    step(PromptMode.RAG, retrieve_per_line(initial_prompt_text, catalog, config.n))

    for _ in range(config.k):
        basis = _latest_completion(trace.steps, fallback=code_context)
        step(PromptMode.ITERATIVE, retrieve_per_line(basis, catalog, config.n))
    return trace


def run_refinement_on_failure(
    artifact: str,
    error_message: str,
    catalog: ReferenceCatalog | None,
    llm: LlmClient,
    config: LoopConfig | None = None,
) -> GenerationTrace:
    """Refine a previously generated artifact that crashed at runtime.

    Only activates when the error message matches a hallucination pattern;
    otherwise returns an empty trace without querying the model. Retrieval
    is per extracted API usage and the block is appended, matching the
    test-repair setting.
    """
    config = config or LoopConfig()
    trace = GenerationTrace(mode="refinement", k=config.k, n=config.n)
    if not detect_hallucination_error(error_message):
        return trace
    if catalog is None or len(catalog) == 0:
        return trace

    basis = artifact
    for _ in range(config.k):
        retrieved = retrieve_per_usage(basis, catalog, config.n)
        if not retrieved:
            break  # nothing to ground on; do not spend a query
        prompt = build_prompt(
            artifact,
            retrieved,
            mode=PromptMode.ITERATIVE,
            placement=Placement.APPEND,
            comment_prefix=config.comment_prefix,
            budget=config.budget_tokens,
        )
        completions, error = _query(llm, prompt, config)
        trace.steps.append(
            TraceStep(
                prompt_mode=PromptMode.ITERATIVE,
                prompt=prompt,
                retrieved=retrieved,
                completions=completions,
                error=error,
            )
        )
        basis = _latest_completion(trace.steps, fallback=artifact)
    return trace
