"""Task construction and scoring for grounded code completion.

Scoring operates on subtoken sequences: whitespace is dropped, punctuation
becomes single-character tokens, and identifiers are split at camelCase and
snake_case boundaries. The splitter is a deterministic, dependency-free
substitute for a learned BPE tokenizer; absolute edit distances differ from
what a model tokenizer would give, orderings are comparable.
"""

from __future__ import annotations

import ast
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .retrieval import extract_api_usages

_SUBTOKEN_RE = re.compile(r"[A-Za-z0-9]+|[^\w\s]|_")
_IDENTIFIER_PIECES = re.compile(r"[0-9]+|[A-Z]+(?![a-z])|[A-Z][a-z]*|[a-z]+")
_WS_RE = re.compile(r"\s+")


def subtokenize(text: str) -> list[str]:
    """Split code into subtokens; e.g. ``find_by_keyword`` ->
    ``['find', '_', 'by', '_', 'keyword']`` and ``x.score`` -> ``['x', '.', 'score']``.
    """
    tokens: list[str] = []
    for piece in _SUBTOKEN_RE.findall(text):
        if piece[0].isalnum():
            tokens.extend(_IDENTIFIER_PIECES.findall(piece))
        else:
            tokens.append(piece)
    return tokens


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Unit-cost insert/delete/substitute distance between two sequences."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        current = [i]
        for j, y in enumerate(b, start=1):
            current.append(
                min(
                    previous[j] + 1,
                    current[j - 1] + 1,
                    previous[j - 1] + (0 if x == y else 1),
                )
            )
        previous = current
    return previous[len(b)]


def edit_distance(pred: str, truth: str) -> int:
    """Levenshtein distance at the subtoken level."""
    return levenshtein(subtokenize(pred), subtokenize(truth))


def normalized_edit_similarity(pred: str, truth: str) -> float:
    """1 - ED / max(|pred tokens|, |truth tokens|); 1.0 when both are empty."""
    a = subtokenize(pred)
    b = subtokenize(truth)
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


def _normalized_usages(text: str) -> set[tuple[str, tuple[str, ...]]]:
    usages = set()
    for usage in extract_api_usages(text):
        args = tuple(_WS_RE.sub(" ", arg).strip() for arg in usage.args)
        usages.add((usage.path, args))
    return usages


def exact_api_match(pred: str, truth: str) -> tuple[int, int]:
    """(matched, total) over the distinct API usages of the ground truth.

    A truth usage counts as matched when the identical (path, whitespace-
    normalized argument texts) usage occurs anywhere in the prediction.
    Extra predicted calls do not penalize; this is recall.
    """
    truth_usages = _normalized_usages(truth)
    pred_usages = _normalized_usages(pred)
    matched = len(truth_usages & pred_usages)
    return matched, len(truth_usages)


@dataclass
class ScoreReport:
    edit_distance: int
    normalized_edit_similarity: float
    exact_api_matches: tuple[int, int]
    best_rank: int | None = None

    def to_dict(self) -> dict:
        return {
            "edit_distance": self.edit_distance,
            "normalized_edit_similarity": self.normalized_edit_similarity,
            "exact_api_matches": list(self.exact_api_matches),
            "best_rank": self.best_rank,
        }


def score_completion(pred: str, truth: str) -> ScoreReport:
    return ScoreReport(
        edit_distance=edit_distance(pred, truth),
        normalized_edit_similarity=normalized_edit_similarity(pred, truth),
        exact_api_matches=exact_api_match(pred, truth),
    )


def best_at_k(
    completions: Sequence[str],
    truth: str,
    metric: Callable[[str, str], float] = edit_distance,
    higher_is_better: bool = False,
) -> ScoreReport:
    """Score every completion and report the best one with its 1-based rank.

    Ties go to the lowest rank, matching a developer scanning a suggestion
    list top to bottom.
    """
    if not completions:
        raise ValueError("best_at_k needs at least one completion")
    best_rank = 1
    best_value = metric(completions[0], truth)
    for rank, completion in enumerate(completions[1:], start=2):
        value = metric(completion, truth)
        if (value > best_value) if higher_is_better else (value < best_value):
            best_value = value
            best_rank = rank
    report = score_completion(completions[best_rank - 1], truth)
    report.best_rank = best_rank
    return report


# ---------------------------------------------------------------------------
# Refinement outcome tallies


@dataclass
class RefinementCounters:
    passing: int = 0
    fixed_hallucinations: int = 0
    non_crashing_failures: int = 0


def tally_refinement_outcomes(records: Iterable[dict]) -> RefinementCounters:
    """Aggregate externally produced test outcomes; nothing is executed here.

    Each record carries ``initial_error`` (the message the artifact first
    crashed with, may be empty) and ``final_status`` in
    {"pass", "fail", "error"}.
    """
    from .loop import detect_hallucination_error

    counters = RefinementCounters()
    for record in records:
        final = record["final_status"]
        if final == "pass":
            counters.passing += 1
            if detect_hallucination_error(record.get("initial_error", "")):
                counters.fixed_hallucinations += 1
        elif final == "fail":
            counters.non_crashing_failures += 1
    return counters


def count_from_percentage(total: int, percent: float) -> int:
    """Integer count for a reported percentage, rounding half away from zero."""
    value = total * percent / 100.0
    return int(math.floor(value + 0.5)) if value >= 0 else -int(math.floor(-value + 0.5))


# ---------------------------------------------------------------------------
# Task construction


@dataclass
class CompletionTask:
    project_root: str
    file: str
    cursor: tuple[int, int]  # 1-based line, 0-based column
    prefix_context: str
    ground_truth: str
    removed_imports: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "project_root": self.project_root,
            "file": self.file,
            "cursor": list(self.cursor),
            "prefix_context": self.prefix_context,
            "ground_truth": self.ground_truth,
            "removed_imports": self.removed_imports,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CompletionTask":
        return cls(
            project_root=d["project_root"],
            file=d["file"],
            cursor=(d["cursor"][0], d["cursor"][1]),
            prefix_context=d["prefix_context"],
            ground_truth=d["ground_truth"],
            removed_imports=list(d.get("removed_imports", [])),
        )


@dataclass
class TaskSet:
    tasks: list[CompletionTask]
    diagnostics: list[str] = field(default_factory=list)


_SKIP_LINE_PREFIXES = ("def ", "class ", "@", "import ", "from ", "#")


def build_tasks(
    project_root: str | Path,
    count: int,
    reject: Callable[[CompletionTask], bool] | None = None,
) -> TaskSet:
    """Construct completion tasks by deleting API call lines from a project.

    For every candidate call site, the ground truth is the full line(s) of
    the call (all of them for multi-line calls) and the prefix context is
    everything before it with imports of the called API stripped out.
    Candidates rejected by ``reject`` (e.g. a model already predicts them
    exactly) are skipped and replaced until ``count`` tasks exist or the
    project runs out of call sites.
    """
    root = Path(project_root)
    tasks: list[CompletionTask] = []
    diagnostics: list[str] = []
    for path in sorted(root.rglob("*.py")):
        if len(tasks) >= count:
            break
        try:
            source = path.read_text()
            tree = ast.parse(source)
        except (SyntaxError, UnicodeDecodeError) as exc:
            diagnostics.append(f"{path}: skipped ({exc})")
            continue
        lines = source.splitlines()
        used_lines: set[int] = set()
        for node in ast.walk(tree):
            if len(tasks) >= count:
                break
            if not isinstance(node, ast.Call):
                continue
            start = node.lineno
            end = node.end_lineno or start
            if start in used_lines:
                continue
            header = lines[start - 1].strip()
            if any(header.startswith(p) for p in _SKIP_LINE_PREFIXES):
                continue
            if start <= 1:
                continue  # no preceding context to complete from
            task = _make_task(root, path, lines, tree, node, start, end)
            if reject is not None and reject(task):
                continue
            used_lines.update(range(start, end + 1))
            tasks.append(task)
    if len(tasks) < count:
        diagnostics.append(
            f"only {len(tasks)} of {count} requested tasks could be constructed"
        )
    return TaskSet(tasks=tasks, diagnostics=diagnostics)


def _call_path(func: ast.expr) -> str | None:
    parts: list[str] = []
    node = func
    while isinstance(node, ast.Attribute):
        parts.append(node.attr)
        node = node.value
    if isinstance(node, ast.Name):
        parts.append(node.id)
        return ".".join(reversed(parts))
    return None


def _imported_names(stmt: ast.stmt) -> set[str]:
    names: set[str] = set()
    if isinstance(stmt, ast.Import):
        for alias in stmt.names:
            names.add(alias.asname or alias.name.split(".")[0])
    elif isinstance(stmt, ast.ImportFrom):
        for alias in stmt.names:
            names.add(alias.asname or alias.name)
    return names


def _make_task(
    root: Path,
    path: Path,
    lines: list[str],
    tree: ast.Module,
    call: ast.Call,
    start: int,
    end: int,
) -> CompletionTask:
    ground_truth = "\n".join(lines[start - 1 : end])
    head = (_call_path(call.func) or "").split(".")[0]

    # Strip import statements whose imported names mention the called API.
    removed: list[str] = []
    removed_linenos: set[int] = set()
    if head:
        for stmt in tree.body:
            if isinstance(stmt, (ast.Import, ast.ImportFrom)) and head in _imported_names(stmt):
                for lineno in range(stmt.lineno, (stmt.end_lineno or stmt.lineno) + 1):
                    if lineno < start:
                        removed_linenos.add(lineno)
                        removed.append(lines[lineno - 1])
    prefix_lines = [
        line
        for lineno, line in enumerate(lines[: start - 1], start=1)
        if lineno not in removed_linenos
    ]
    return CompletionTask(
        project_root=str(root),
        file=str(path.relative_to(root)),
        cursor=(start, 0),
        prefix_context="\n".join(prefix_lines) + ("\n" if prefix_lines else ""),
        ground_truth=ground_truth,
        removed_imports=removed,
    )


# ---------------------------------------------------------------------------
# Diffable record serialization (one JSON object per line)


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    with open(path, "w") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
