"""Prompt assembly with an API-reference comment block under a token budget.

The reference block is a run of commented lines opened by an
``API Reference:`` header, holding the retrieved references in decreasing
order of similarity. When the assembled prompt exceeds the budget, the
lowest-similarity references are dropped first; only then is the code
context truncated from the beginning, so the retained context is always a
suffix of the original.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .errors import BudgetError
from .retrieval import RetrievalResult

REFERENCE_HEADER = "API Reference:"
DEFAULT_BUDGET_TOKENS = 2048

COMMENT_PREFIXES = {"python": "# ", "javascript": "// "}

_TOKEN_RE = re.compile(r"[A-Za-z0-9]+|[^\w\s]")
_CAMEL_SNAKE = re.compile(r"[0-9]+|[A-Z]+(?![a-z])|[A-Z][a-z]*|[a-z]+")


class PromptMode(str, Enum):
    INITIAL = "initial"
    RAG = "rag"
    ITERATIVE = "iterative"


class Placement(str, Enum):
    PREPEND = "prepend"
    APPEND = "append"


def count_tokens(text: str) -> int:
    """Heuristic token count: whitespace/punctuation/identifier subtokens.

    Deterministic stand-in for a model tokenizer. Monotone under
    concatenation: count(a + b) <= count(a) + count(b) + 1.
    """
    total = 0
    for piece in _TOKEN_RE.findall(text):
        if piece[0].isalnum():
            total += len(_CAMEL_SNAKE.findall(piece))
        else:
            total += 1
    return total


@dataclass
class PromptSpec:
    mode: PromptMode
    reference_block: list[str] = field(default_factory=list)  # commented ref lines
    code_context: str = ""  # retained (possibly truncated) context
    placement: Placement = Placement.PREPEND
    budget_tokens: int = DEFAULT_BUDGET_TOKENS
    token_count: int = 0
    text: str = ""

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "reference_block": self.reference_block,
            "code_context": self.code_context,
            "placement": self.placement.value,
            "budget_tokens": self.budget_tokens,
            "token_count": self.token_count,
            "text": self.text,
        }


def _assemble(block_lines: list[str], context: str, placement: Placement, comment_prefix: str) -> str:
    if not block_lines:
        return context
    block = "\n".join([comment_prefix + REFERENCE_HEADER] + block_lines)
    if placement is Placement.PREPEND:
        return block + "\n" + context
    if context and not context.endswith("\n"):
        return context + "\n" + block
    return context + block


def build_prompt(
    code_context: str,
    refs: RetrievalResult | None,
    mode: PromptMode = PromptMode.INITIAL,
    placement: Placement = Placement.PREPEND,
    comment_prefix: str = "# ",
    budget: int = DEFAULT_BUDGET_TOKENS,
    token_counter: Callable[[str], int] = count_tokens,
) -> PromptSpec:
    """Assemble a prompt of the given mode, enforcing the token budget.

    ``refs`` must be empty (or None) exactly when ``mode`` is INITIAL. If
    the budget forces dropping every reference, the header goes too and the
    result is an initial-equivalent prompt.
    """
    if budget < 1:
        raise BudgetError(f"budget must be positive, got {budget}")
    has_refs = refs is not None and len(refs) > 0
    if mode is PromptMode.INITIAL and has_refs:
        raise ValueError("initial prompts carry no references")
    if mode is not PromptMode.INITIAL and not has_refs:
        # Degenerate retrieval (empty index); fall through with no block.
        pass

    ref_lines = [comment_prefix + line for line in refs.rendered_lines()] if has_refs else []
    context = code_context

    text = _assemble(ref_lines, context, placement, comment_prefix)
    tokens = token_counter(text)

    # Drop lowest-similarity references first.
    while tokens > budget and ref_lines:
        ref_lines.pop()
        text = _assemble(ref_lines, context, placement, comment_prefix)
        tokens = token_counter(text)

    # Then truncate the context from the beginning, whole lines first.
    while tokens > budget and "\n" in context:
        context = context.split("\n", 1)[1]
        text = _assemble(ref_lines, context, placement, comment_prefix)
        tokens = token_counter(text)
    while tokens > budget and context:
        context = context[1:]
        text = _assemble(ref_lines, context, placement, comment_prefix)
        tokens = token_counter(text)

    if tokens > budget:
        raise BudgetError(
            f"budget of {budget} tokens cannot fit the reference header "
            f"({tokens} tokens remain)"
        )
    if not context and code_context:
        raise BudgetError(
            f"budget of {budget} tokens too small to retain any code context"
        )

    return PromptSpec(
        mode=mode,
        reference_block=ref_lines,
        code_context=context,
        placement=placement,
        budget_tokens=budget,
        token_count=tokens,
        text=text,
    )
