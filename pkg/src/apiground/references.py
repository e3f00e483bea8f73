"""Extraction of a project's API surface as one-line renderable references.

Supported languages: Python (parsed with the stdlib ``ast`` module) and
JavaScript (a static line/brace scanner; no module loading ever happens).
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

DEFAULT_MAX_LINE_LENGTH = 120

_JS_KEYWORDS = {
    "if", "for", "while", "switch", "catch", "return", "function",
    "new", "typeof", "delete", "do", "else", "try", "finally",
}


class ReferenceKind(str, Enum):
    FUNCTION = "function"
    CLASS = "class"
    ATTRIBUTE = "attribute"


@dataclass(frozen=True)
class Param:
    name: str
    annotation: str | None = None
    default: str | None = None


@dataclass(frozen=True)
class ApiReference:
    """One project symbol, renderable as a single line of pseudo-source."""

    kind: ReferenceKind
    qualified_name: str
    params: tuple[Param, ...] = ()
    return_annotation: str | None = None
    parent_classes: tuple[str, ...] = ()
    docstring: str | None = None
    source_file: str = ""

    def __post_init__(self):
        if not self.qualified_name or any(c.isspace() for c in self.qualified_name):
            raise ValueError(f"invalid qualified name: {self.qualified_name!r}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "qualified_name": self.qualified_name,
            "params": [
                {"name": p.name, "annotation": p.annotation, "default": p.default}
                for p in self.params
            ],
            "return_annotation": self.return_annotation,
            "parent_classes": list(self.parent_classes),
            "docstring": self.docstring,
            "source_file": self.source_file,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ApiReference":
        return cls(
            kind=ReferenceKind(d["kind"]),
            qualified_name=d["qualified_name"],
            params=tuple(
                Param(p["name"], p.get("annotation"), p.get("default"))
                for p in d.get("params", [])
            ),
            return_annotation=d.get("return_annotation"),
            parent_classes=tuple(d.get("parent_classes", [])),
            docstring=d.get("docstring"),
            source_file=d.get("source_file", ""),
        )


@dataclass
class ExtractionResult:
    references: list[ApiReference]
    diagnostics: list[str] = field(default_factory=list)


def render_reference(ref: ApiReference, max_line_length: int = DEFAULT_MAX_LINE_LENGTH) -> str:
    """Render a reference as one line that resembles real code.

    Function references carry their signature and, when available, the first
    docstring line as a trailing comment. The line is hard-truncated at
    ``max_line_length`` characters (mid-word truncation is intentional).
    """
    if ref.kind is ReferenceKind.CLASS:
        line = f"class {ref.qualified_name}({', '.join(ref.parent_classes)})"
    elif ref.kind is ReferenceKind.ATTRIBUTE:
        line = ref.qualified_name
    else:
        parts = []
        for p in ref.params:
            text = p.name
            if p.annotation:
                text += f": {p.annotation}"
            if p.default is not None:
                text += f" = {p.default}"
            parts.append(text)
        line = f"{ref.qualified_name}({', '.join(parts)})"
        if ref.return_annotation:
            line += f" -> {ref.return_annotation}"
    if ref.docstring:
        first = ref.docstring.strip().splitlines()[0] if ref.docstring.strip() else ""
        if first:
            line += f" # {first}"
    line = line.replace("\n", " ")
    return line[:max_line_length]


def extract_api_references(
    files: Iterable[tuple[str, str]], language: str
) -> ExtractionResult:
    """Extract function, class, and constructor-attribute references.

    ``files`` is an iterable of (relative path, source text). Unparseable
    files are skipped with a diagnostic; the extraction still succeeds.
    Results are deduplicated by (kind, qualified name), keeping the first
    occurrence in path-sorted file order, so the output does not depend on
    input ordering.
    """
    if language not in ("python", "javascript"):
        raise ValueError(f"unsupported language: {language!r}")
    extract = _extract_python if language == "python" else _extract_javascript

    result = ExtractionResult(references=[])
    seen: set[tuple[ReferenceKind, str]] = set()
    for path, source in sorted(files, key=lambda f: f[0]):
        try:
            refs = extract(path, source)
        except SyntaxError as exc:
            result.diagnostics.append(f"{path}: skipped unparseable file ({exc.msg})")
            continue
        for ref in refs:
            key = (ref.kind, ref.qualified_name)
            if key not in seen:
                seen.add(key)
                result.references.append(ref)
    return result


# ---------------------------------------------------------------------------
# Python extraction


def _extract_python(path: str, source: str) -> list[ApiReference]:
    tree = ast.parse(source)
    refs: list[ApiReference] = []
    _walk_python(tree.body, [], path, refs)
    return refs


def _walk_python(body: Sequence[ast.stmt], scope: list[str], path: str, out: list[ApiReference]):
    for node in body:
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            qname = ".".join(scope + [node.name])
            out.append(
                ApiReference(
                    kind=ReferenceKind.FUNCTION,
                    qualified_name=qname,
                    params=_python_params(node.args),
                    return_annotation=_unparse(node.returns),
                    docstring=ast.get_docstring(node),
                    source_file=path,
                )
            )
            if scope and node.name == "__init__":
                _constructor_attributes(node, scope, path, out)
            _walk_python(node.body, scope + [node.name], path, out)
        elif isinstance(node, ast.ClassDef):
            qname = ".".join(scope + [node.name])
            out.append(
                ApiReference(
                    kind=ReferenceKind.CLASS,
                    qualified_name=qname,
                    parent_classes=tuple(_unparse(b) for b in node.bases),
                    docstring=ast.get_docstring(node),
                    source_file=path,
                )
            )
            _walk_python(node.body, scope + [node.name], path, out)


def _python_params(args: ast.arguments) -> tuple[Param, ...]:
    params: list[Param] = []
    positional = list(args.posonlyargs) + list(args.args)
    defaults: list[ast.expr | None] = [None] * (len(positional) - len(args.defaults))
    defaults += list(args.defaults)
    for arg, default in zip(positional, defaults):
        params.append(Param(arg.arg, _unparse(arg.annotation), _unparse(default)))
    if args.vararg:
        params.append(Param("*" + args.vararg.arg, _unparse(args.vararg.annotation)))
    for arg, default in zip(args.kwonlyargs, args.kw_defaults):
        params.append(Param(arg.arg, _unparse(arg.annotation), _unparse(default)))
    if args.kwarg:
        params.append(Param("**" + args.kwarg.arg, _unparse(args.kwarg.annotation)))
    return tuple(params)


def _constructor_attributes(init: ast.FunctionDef, scope: list[str], path: str, out: list[ApiReference]):
    # Attribute references come only from `self.<name> = ...` inside __init__.
    self_name = init.args.args[0].arg if init.args.args else "self"
    for node in ast.walk(init):
        targets: list[ast.expr] = []
        if isinstance(node, ast.Assign):
            targets = node.targets
        elif isinstance(node, (ast.AnnAssign, ast.AugAssign)):
            targets = [node.target]
        for target in targets:
            if (
                isinstance(target, ast.Attribute)
                and isinstance(target.value, ast.Name)
                and target.value.id == self_name
            ):
                out.append(
                    ApiReference(
                        kind=ReferenceKind.ATTRIBUTE,
                        qualified_name=".".join(scope + [target.attr]),
                        source_file=path,
                    )
                )


def _unparse(node: ast.expr | None) -> str | None:
    return None if node is None else ast.unparse(node)


# ---------------------------------------------------------------------------
# JavaScript extraction (static, line oriented)

_JS_FUNC_DECL = re.compile(r"^\s*(?:async\s+)?function\s*\*?\s*([A-Za-z_$][\w$]*)\s*\(([^)]*)\)")
_JS_CLASS_DECL = re.compile(r"^\s*class\s+([A-Za-z_$][\w$]*)(?:\s+extends\s+([A-Za-z_$][\w$.]*))?\s*\{?")
_JS_METHOD = re.compile(r"^\s*(?:static\s+)?(?:async\s+)?\*?\s*([A-Za-z_$][\w$]*)\s*\(([^)]*)\)\s*\{")
_JS_PROTO = re.compile(
    r"^\s*([A-Za-z_$][\w$.]*)\.prototype\.([A-Za-z_$][\w$]*)\s*=\s*"
    r"(?:async\s+)?(?:function\s*\*?\s*\(([^)]*)\)|\(([^)]*)\)\s*=>)"
)
_JS_ARROW = re.compile(
    r"^\s*(?:const|let|var)\s+([A-Za-z_$][\w$]*)\s*=\s*(?:async\s+)?"
    r"(?:function\s*\*?\s*\(([^)]*)\)|\(([^)]*)\)\s*=>)"
)
_JS_THIS_ASSIGN = re.compile(r"this\.([A-Za-z_$][\w$]*)\s*=[^=]")


def _extract_javascript(path: str, source: str) -> list[ApiReference]:
    refs: list[ApiReference] = []
    class_name: str | None = None
    class_depth = 0
    in_constructor = False
    constructor_depth = 0
    depth = 0

    for raw in source.splitlines():
        line = raw
        stripped = line.strip()
        if stripped.startswith("//"):
            continue

        if class_name is None:
            m = _JS_CLASS_DECL.match(line)
            if m:
                class_name = m.group(1)
                class_depth = depth
                parents = (m.group(2),) if m.group(2) else ()
                refs.append(
                    ApiReference(
                        kind=ReferenceKind.CLASS,
                        qualified_name=class_name,
                        parent_classes=parents,
                        source_file=path,
                    )
                )
                depth += line.count("{") - line.count("}")
                continue
            m = _JS_FUNC_DECL.match(line)
            if m:
                refs.append(
                    ApiReference(
                        kind=ReferenceKind.FUNCTION,
                        qualified_name=m.group(1),
                        params=_js_params(m.group(2)),
                        source_file=path,
                    )
                )
            else:
                m = _JS_PROTO.match(line)
                if m:
                    param_text = m.group(3) if m.group(3) is not None else m.group(4)
                    refs.append(
                        ApiReference(
                            kind=ReferenceKind.FUNCTION,
                            qualified_name=f"{m.group(1)}.prototype.{m.group(2)}",
                            params=_js_params(param_text or ""),
                            source_file=path,
                        )
                    )
                else:
                    m = _JS_ARROW.match(line)
                    if m:
                        param_text = m.group(2) if m.group(2) is not None else m.group(3)
                        refs.append(
                            ApiReference(
                                kind=ReferenceKind.FUNCTION,
                                qualified_name=m.group(1),
                                params=_js_params(param_text or ""),
                                source_file=path,
                            )
                        )
        else:
            m = _JS_METHOD.match(line)
            if m and m.group(1) not in _JS_KEYWORDS and depth == class_depth + 1:
                method = m.group(1)
                refs.append(
                    ApiReference(
                        kind=ReferenceKind.FUNCTION,
                        qualified_name=f"{class_name}.{method}",
                        params=_js_params(m.group(2)),
                        source_file=path,
                    )
                )
                if method == "constructor":
                    in_constructor = True
                    constructor_depth = depth
            if in_constructor:
                for attr in _JS_THIS_ASSIGN.findall(line):
                    refs.append(
                        ApiReference(
                            kind=ReferenceKind.ATTRIBUTE,
                            qualified_name=f"{class_name}.{attr}",
                            source_file=path,
                        )
                    )

        depth += line.count("{") - line.count("}")
        if class_name is not None and depth <= class_depth:
            class_name = None
        if in_constructor and depth <= constructor_depth:
            in_constructor = False
    return refs


def _js_params(text: str) -> tuple[Param, ...]:
    params = []
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            continue
        if "=" in piece:
            name, default = piece.split("=", 1)
            params.append(Param(name.strip(), default=default.strip()))
        else:
            params.append(Param(piece))
    return tuple(params)
