"""A small brace-matching outline scanner for Java sources.

Good enough to find class, nested-class and method headers; it does not try to
be a Java parser.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

_CLASS = re.compile(r"\b(class|interface|enum|record)\s+([A-Za-z_$][\w$]*)")
_METHOD = re.compile(r"([A-Za-z_$][\w$]*)\s*\([^()]*(?:\([^()]*\)[^()]*)*\)\s*(throws\s+[\w$.,\s<>]+)?$")
_ANNOTATION = re.compile(r"@[\w$.]+(\s*\((?:[^()]|\([^()]*\))*\))?")
_NOT_METHODS = {"if", "for", "while", "switch", "catch", "synchronized", "try", "else", "do",
                "return", "new", "throw", "super", "this"}


def mask_java(text: str) -> str:
    """Blank out comments and string/char literals, preserving offsets and newlines."""
    out = list(text)
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if text.startswith("//", i):
            j = text.find("\n", i)
            j = n if j < 0 else j
            for k in range(i, j):
                out[k] = " "
            i = j
        elif text.startswith("/*", i):
            j = text.find("*/", i + 2)
            j = n if j < 0 else j + 2
            for k in range(i, j):
                if out[k] != "\n":
                    out[k] = " "
            i = j
        elif text.startswith('"""', i):
            j = text.find('"""', i + 3)
            j = n if j < 0 else j + 3
            for k in range(i + 3, max(i + 3, j - 3)):
                if out[k] != "\n":
                    out[k] = " "
            i = j
        elif c in "\"'":
            j = i + 1
            while j < n and text[j] != c and text[j] != "\n":
                j += 2 if text[j] == "\\" else 1
            for k in range(i + 1, min(j, n)):
                out[k] = " "
            i = j + 1
        else:
            i += 1
    return "".join(out)


@dataclass
class JavaDecl:
    kind: str  # "class" or "method"
    name: str
    header: str
    depth: int
    children: list["JavaDecl"] = field(default_factory=list)


def _clean_header(raw: str) -> str:
    raw = _ANNOTATION.sub(" ", raw)
    return " ".join(raw.split())


def _classify(header: str) -> tuple[str, str] | None:
    m = _CLASS.search(header)
    if m and "(" not in header[: m.start()] and "=" not in header:
        return "class", m.group(2)
    if "=" in header or "->" in header:
        return None
    m = _METHOD.search(header)
    if m and m.group(1) not in _NOT_METHODS:
        return "method", m.group(1)
    return None


def outline(text: str) -> list[JavaDecl]:
    """Top-level type declarations with their member classes and methods."""
    masked = mask_java(text)
    roots: list[JavaDecl] = []
    stack: list[JavaDecl | None] = []
    seg = 0
    for i, c in enumerate(masked):
        if c not in "{};":
            continue
        parent = stack[-1] if stack else None
        in_type_body = not stack or (parent is not None and parent.kind == "class")
        if c == "{":
            decl = None
            if in_type_body:
                header = _clean_header(masked[seg:i])
                kind = _classify(header)
                if kind:
                    decl = JavaDecl(kind[0], kind[1], header, len(stack))
                    (parent.children if parent else roots).append(decl)
            stack.append(decl)
        elif c == "}":
            if stack:
                stack.pop()
        elif c == ";" and parent is not None and parent.kind == "class":
            header = _clean_header(masked[seg:i])
            kind = _classify(header)
            if kind and kind[0] == "method":
                parent.children.append(JavaDecl("method", kind[1], header, len(stack)))
        seg = i + 1
    return roots
