"""Rendering of retrieved snippets above unfinished code, and the inverse split."""
from __future__ import annotations

import re
from typing import Sequence

_HEADER = re.compile(r"^(#|//) --- (.*) ---$")


def comment_prefix(path: str | None) -> str:
    return "//" if path and path.endswith(".java") else "#"


def frame_snippet(origin_path: str, text: str, prefix: str = "#") -> str:
    body = "\n".join(f"{prefix} {ln}" if ln else prefix for ln in text.split("\n"))
    return f"{prefix} --- {origin_path} ---\n{body}\n"


def render(framed: Sequence[str], code: str) -> str:
    """Framed snippet blocks, each followed by a blank line, then the code."""
    return "".join(f + "\n" for f in framed) + code


def split_prompt(prompt: str) -> tuple[list[str], str]:
    """Recover (snippet lines, code) from a prompt built by :func:`render`."""
    lines = prompt.split("\n")
    snippet_lines: list[str] = []
    i = 0
    while i < len(lines):
        m = _HEADER.match(lines[i])
        if not m:
            break
        prefix = m.group(1)
        i += 1
        while i < len(lines) and lines[i] and (lines[i] == prefix or lines[i].startswith(prefix + " ")):
            snippet_lines.append(lines[i][len(prefix) + 1:])
            i += 1
        if i < len(lines) and lines[i] == "":
            i += 1
    return snippet_lines, "\n".join(lines[i:])
