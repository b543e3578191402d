"""Split-Aggregate chunking of source files into base snippets."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from ..errors import InvalidInputError, InvalidParameterError

DEFAULT_MAX_LINES = 15


class SnippetKind(str, Enum):
    BASE = "base"
    DEPENDENCY = "dependency"


@dataclass(frozen=True)
class SourceFile:
    path: str
    lines: tuple[str, ...]
    raw: str | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.path:
            raise InvalidInputError("SourceFile.path must be non-empty")
        object.__setattr__(self, "lines", tuple(self.lines))

    @classmethod
    def from_text(cls, path: str, text: str) -> "SourceFile":
        return cls(path, tuple(text.splitlines()), text)

    @property
    def text(self) -> str:
        return "\n".join(self.lines)

    @property
    def content(self) -> str:
        """The file exactly as read, when known."""
        return self.raw if self.raw is not None else self.text + "\n"


@dataclass(frozen=True)
class MiniBlock:
    start_line: int
    end_line: int
    lines: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.lines)


@dataclass(frozen=True)
class Snippet:
    id: str
    kind: SnippetKind
    origin_path: str
    text: str
    span: tuple[int, int] | None = None

    def __post_init__(self):
        if not self.text:
            raise InvalidInputError(f"snippet {self.id!r} has empty text")

    @property
    def lines(self) -> list[str]:
        return self.text.split("\n")

    @property
    def line_count(self) -> int:
        return self.text.count("\n") + 1

    def to_record(self) -> dict:
        start, end = self.span if self.span is not None else (None, None)
        return {
            "id": self.id,
            "kind": self.kind.value,
            "origin_path": self.origin_path,
            "start_line": start,
            "end_line": end,
            "text": self.text,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Snippet":
        span = None
        if rec.get("start_line") is not None:
            span = (int(rec["start_line"]), int(rec["end_line"]))
        return cls(rec["id"], SnippetKind(rec["kind"]), rec["origin_path"], rec["text"], span)


def is_blank(line: str) -> bool:
    return not line.strip()


def split_into_miniblocks(file: SourceFile) -> list[MiniBlock]:
    """Maximal runs of non-blank lines, in file order."""
    blocks = []
    start = None
    for i, line in enumerate(file.lines):
        if is_blank(line):
            if start is not None:
                blocks.append(MiniBlock(start, i - 1, file.lines[start:i]))
                start = None
        elif start is None:
            start = i
    if start is not None:
        blocks.append(MiniBlock(start, len(file.lines) - 1, file.lines[start:]))
    return blocks


def _hard_split(block: MiniBlock, max_lines: int) -> list[MiniBlock]:
    if len(block) <= max_lines:
        return [block]
    out = []
    for off in range(0, len(block), max_lines):
        chunk = block.lines[off:off + max_lines]
        out.append(MiniBlock(block.start_line + off, block.start_line + off + len(chunk) - 1, chunk))
    return out


def aggregate_blocks(blocks: Sequence[MiniBlock], max_lines: int = DEFAULT_MAX_LINES,
                     path: str = "<memory>") -> list[Snippet]:
    """Greedily pack consecutive blocks into snippets of at most ``max_lines`` lines.

    A block that is itself longer than ``max_lines`` is cut into consecutive
    chunks first, so every returned snippet respects the bound.
    """
    if max_lines < 1:
        raise InvalidParameterError(f"max_lines must be >= 1, got {max_lines}")
    pieces = [p for b in blocks for p in _hard_split(b, max_lines)]
    groups: list[list[MiniBlock]] = []
    size = 0
    for piece in pieces:
        if groups and size + len(piece) <= max_lines:
            groups[-1].append(piece)
            size += len(piece)
        else:
            groups.append([piece])
            size = len(piece)
    snippets = []
    for group in groups:
        start, end = group[0].start_line, group[-1].end_line
        text = "\n".join(line for b in group for line in b.lines)
        snippets.append(Snippet(f"{path}:{start}-{end}", SnippetKind.BASE, path, text, (start, end)))
    return snippets


def base_snippets(file: SourceFile, max_lines: int = DEFAULT_MAX_LINES) -> list[Snippet]:
    return aggregate_blocks(split_into_miniblocks(file), max_lines, path=file.path)


def write_corpus_jsonl(snippets: Iterable[Snippet], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in snippets:
            fh.write(json.dumps(s.to_record(), ensure_ascii=False) + "\n")


def read_corpus_jsonl(path: str | Path) -> list[Snippet]:
    with open(path, encoding="utf-8") as fh:
        return [Snippet.from_record(json.loads(line)) for line in fh if line.strip()]
