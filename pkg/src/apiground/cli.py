"""Command-line front end: index a project, complete code, run an evaluation.

All data goes to stdout, all diagnostics to stderr; exit code 0 means no
operation-level error. Flags override the config file, which overrides the
built-in defaults. Secrets (LLM / embedder tokens) come from environment
variables only.
"""

from __future__ import annotations

import json
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import click
import numpy as np

from .embedding import SubtokenHashingEmbedder
from .errors import ApigroundError
from .evaluation import best_at_k, build_tasks, write_jsonl
from .index import DEFAULT_LINEAR_THRESHOLD
from .llm import CachingLlm, HttpLlm, ScriptedLlm
from .loop import LoopConfig, GenerationTrace, rank_completions, run_loop
from .persistence import content_digest, load_index, save_index
from .prompting import COMMENT_PREFIXES, Placement, PromptMode
from .references import ReferenceKind, extract_api_references, render_reference
from .retrieval import ReferenceCatalog

_LANGUAGE_EXTENSIONS = {"python": ("*.py",), "javascript": ("*.js",)}


@dataclass
class RunConfig:
    k: int = 3
    n: int = 20
    budget_tokens: int = 2048
    placement: str = "prepend"
    embedder: str = "subtoken"
    embedder_dim: int = 256
    llm_url: str | None = None
    mock: str | None = None
    cache: str | None = None
    linear_threshold: int = DEFAULT_LINEAR_THRESHOLD
    language: str = "python"
    workers: int = 1


def _load_config(path: str | None) -> RunConfig:
    config = RunConfig()
    if path:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        known = {f for f in RunConfig.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise click.ClickException(f"unknown config keys: {sorted(unknown)}")
        config = replace(config, **data)
    return config


def _apply_flags(config: RunConfig, **flags) -> RunConfig:
    overrides = {k: v for k, v in flags.items() if v is not None}
    return replace(config, **overrides)


def _make_embedder(config: RunConfig):
    if config.embedder != "subtoken":
        raise click.ClickException(
            f"unknown embedder {config.embedder!r}; remote embedders are configured "
            "programmatically (see README)"
        )
    return SubtokenHashingEmbedder(n_features=config.embedder_dim)


def _make_llm(config: RunConfig):
    if config.mock:
        llm = ScriptedLlm.from_file(config.mock)
    elif config.llm_url:
        llm = HttpLlm(config.llm_url)
    else:
        raise click.ClickException("either --mock FIXTURE or --llm-url URL is required")
    if config.cache:
        llm = CachingLlm(llm, path=config.cache)
    return llm


def _loop_config(config: RunConfig) -> LoopConfig:
    return LoopConfig(
        k=config.k,
        n=config.n,
        placement=Placement(config.placement),
        comment_prefix=COMMENT_PREFIXES[config.language],
        budget_tokens=config.budget_tokens,
    )


_shared_flags = [
    click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                 help="TOML config file; flags win over it."),
    click.option("--k", type=int, default=None, help="Iterative refinements (default 3)."),
    click.option("--n", type=int, default=None, help="References per prompt (default 20)."),
    click.option("--budget", "budget_tokens", type=int, default=None,
                 help="Prompt token budget (default 2048)."),
    click.option("--placement", type=click.Choice(["prepend", "append"]), default=None),
    click.option("--embedder", default=None, help="Embedder selection (default: subtoken)."),
    click.option("--llm-url", default=None, help="Completion service endpoint."),
    click.option("--mock", default=None, type=click.Path(exists=True),
                 help="Scripted mock LLM fixture file."),
    click.option("--cache", default=None, help="Response cache file path."),
    click.option("--language", type=click.Choice(["python", "javascript"]), default=None),
]


def _with_flags(command):
    for flag in reversed(_shared_flags):
        command = flag(command)
    return command


@click.group()
def main():
    """Ground LLM code generation in a project's real API surface."""


@main.command("index")
@click.argument("project_path", type=click.Path())
@click.option("-o", "--out", "out_path", required=True, help="Output base path for the index pair.")
@click.option("--language", type=click.Choice(["python", "javascript"]), default="python")
@click.option("--embedder-dim", type=int, default=256)
@click.option("--max-line-length", type=int, default=120)
def cmd_index(project_path, out_path, language, embedder_dim, max_line_length):
    """Pre-analyze PROJECT_PATH and persist its embedded API references."""
    root = Path(project_path)
    if not root.is_dir():
        raise click.ClickException(f"not a readable directory: {project_path}")
    started = time.perf_counter()
    files = []
    for pattern in _LANGUAGE_EXTENSIONS[language]:
        for path in sorted(root.rglob(pattern)):
            files.append((str(path.relative_to(root)), path.read_text()))
    result = extract_api_references(files, language)
    for diagnostic in result.diagnostics:
        click.echo(diagnostic, err=True)
    if not result.references:
        click.echo("warning: no API references found", err=True)

    embedder = SubtokenHashingEmbedder(n_features=embedder_dim)
    texts = [render_reference(r, max_line_length) for r in result.references]
    vectors = embedder.transform(texts) if texts else np.zeros((0, embedder_dim))
    digests = {path: content_digest(text) for path, text in files}
    save_index(out_path, result.references, vectors, embedder.embedder_id, digests)

    elapsed = time.perf_counter() - started
    counts = {kind.value: 0 for kind in ReferenceKind}
    for ref in result.references:
        counts[ref.kind.value] += 1
    click.echo(json.dumps({"references": counts, "elapsed_seconds": round(elapsed, 3)}))


@main.command("complete")
@click.argument("index_path", type=click.Path())
@click.argument("context_file", type=click.Path(exists=True))
@click.option("--verbose", is_flag=True, help="Also print the full generation trace.")
@_with_flags
def cmd_complete(index_path, context_file, verbose, config_path, **flags):
    """Run the grounded completion loop over CONTEXT_FILE."""
    config = _apply_flags(_load_config(config_path), **flags)
    try:
        manifest, vectors = load_index(index_path)
    except FileNotFoundError as exc:
        raise click.ClickException(str(exc))
    embedder = _make_embedder(config)
    try:
        catalog = ReferenceCatalog.from_saved(
            manifest, vectors, embedder, linear_threshold=config.linear_threshold
        )
    except ApigroundError as exc:
        raise click.ClickException(str(exc))
    llm = _make_llm(config)
    code_context = Path(context_file).read_text()
    trace = run_loop(code_context, catalog, llm, _loop_config(config))
    output = {"completions": rank_completions(trace)}
    if verbose:
        output["trace"] = trace.to_dict()
    click.echo(json.dumps(output, indent=2))


def _step_completions(trace: GenerationTrace, mode: PromptMode) -> list[str]:
    return [c for step in trace.steps if step.prompt_mode is mode for c in step.completions]


@main.command("eval")
@click.argument("project_path", type=click.Path(exists=True))
@click.option("--tasks", "task_count", type=int, default=50, help="Number of tasks to build.")
@click.option("--out", "out_path", default=None, help="Write per-task reports (JSONL) here.")
@click.option("--workers", type=int, default=None, help="Parallel tasks (default 1).")
@click.option("--verbose", is_flag=True)
@_with_flags
def cmd_eval(project_path, task_count, out_path, workers, verbose, config_path, **flags):
    """Build completion tasks from PROJECT_PATH, run the loop, report metrics."""
    config = _apply_flags(_load_config(config_path), **flags)
    if workers is not None:
        config = replace(config, workers=workers)
    task_set = build_tasks(project_path, task_count)
    for diagnostic in task_set.diagnostics:
        click.echo(diagnostic, err=True)
    if not task_set.tasks:
        click.echo(json.dumps({"tasks": 0, "rows": {}}))
        return

    embedder = _make_embedder(config)
    files = [
        (str(p.relative_to(project_path)), p.read_text())
        for p in sorted(Path(project_path).rglob("*.py"))
    ]
    refs = extract_api_references(files, "python").references
    catalog = ReferenceCatalog(refs, embedder, linear_threshold=config.linear_threshold)
    llm = _make_llm(config)
    loop_config = _loop_config(config)

    def evaluate(task):
        trace = run_loop(task.prefix_context, catalog, llm, loop_config)
        row_reports = {}
        for mode in PromptMode:
            completions = _step_completions(trace, mode)
            if completions:
                row_reports[mode.value] = best_at_k(completions, task.ground_truth)
        return task, row_reports

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(evaluate, task_set.tasks))
    else:
        results = [evaluate(task) for task in task_set.tasks]

    records = []
    for task, row_reports in results:
        records.append(
            {
                "file": task.file,
                "cursor": list(task.cursor),
                "reports": {mode: r.to_dict() for mode, r in row_reports.items()},
            }
        )
    if out_path:
        write_jsonl(out_path, records)

    rows = {}
    for mode in PromptMode:
        reports = [
            row_reports[mode.value]
            for _, row_reports in results
            if mode.value in row_reports
        ]
        if not reports:
            continue
        matched = sum(r.exact_api_matches[0] for r in reports)
        total = sum(r.exact_api_matches[1] for r in reports)
        rows[mode.value] = {
            "tasks": len(reports),
            "mean_edit_distance": round(statistics.mean(r.edit_distance for r in reports), 3),
            "mean_edit_similarity": round(
                statistics.mean(r.normalized_edit_similarity for r in reports), 3
            ),
            "api_recall": round(matched / total, 3) if total else None,
        }
    output = {"tasks": len(task_set.tasks), "rows": rows}
    if verbose:
        output["reports"] = records
    click.echo(json.dumps(output, indent=2))


if __name__ == "__main__":
    sys.exit(main())
