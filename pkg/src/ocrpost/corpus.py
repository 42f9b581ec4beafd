"""Corpus loading and tokenization.

Documents are plain Unicode text keyed by a stable id. All offsets anywhere
in this package are codepoint indices (never bytes), so multi-byte letters
behave as single characters.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .errors import ValidationError

# Maximal runs of non-whitespace codepoints. \S tracks the same Unicode
# whitespace set as str.isspace(), which covers NBSP and friends found in
# historical scans. No case folding, no punctuation stripping: case and
# punctuation carry recognition-error signal.
_TOKEN_RE = re.compile(r"\S+")


@dataclass(frozen=True)
class Document:
    """A single text document. Line endings are normalized to \\n at load
    time; the text is otherwise stored as-is."""

    id: str
    text: str


@dataclass(frozen=True)
class Token:
    """A whitespace-delimited token with [start, end) codepoint offsets into
    its source text."""

    text: str
    start: int
    end: int


@dataclass(frozen=True)
class Corpus:
    """An immutable, id-sorted collection of documents."""

    documents: tuple[Document, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for doc in self.documents:
            if not doc.id:
                raise ValidationError("document id must be non-empty")
            if doc.id in seen:
                raise ValidationError(f"duplicate document id: {doc.id!r}")
            seen.add(doc.id)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def __len__(self) -> int:
        return len(self.documents)

    def get(self, doc_id: str) -> Document:
        for doc in self.documents:
            if doc.id == doc_id:
                return doc
        raise KeyError(doc_id)


def _normalize_newlines(text: str) -> str:
    return text.replace("\r\n", "\n").replace("\r", "\n")


def _decode_utf8(raw: bytes, source: str) -> str:
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ValidationError(
            f"{source}: invalid UTF-8 at byte offset {exc.start}"
        ) from exc


def _load_directory(root: Path) -> list[Document]:
    docs = []
    for path in sorted(root.rglob("*.txt")):
        doc_id = path.relative_to(root).as_posix()
        text = _decode_utf8(path.read_bytes(), str(path))
        docs.append(Document(id=doc_id, text=_normalize_newlines(text)))
    return docs


def _load_jsonl(path: Path) -> list[Document]:
    docs = []
    raw = _decode_utf8(path.read_bytes(), str(path))
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if not isinstance(record, dict) or "id" not in record or "text" not in record:
            raise ValidationError(
                f"{path}:{lineno}: expected an object with 'id' and 'text' keys"
            )
        docs.append(
            Document(id=str(record["id"]), text=_normalize_newlines(str(record["text"])))
        )
    return docs


def load_corpus(path: str | Path) -> Corpus:
    """Load a corpus from a directory of .txt files or a JSON-lines file.

    Directory loads use the relative file path as the document id; JSONL
    records must carry {"id": ..., "text": ...}. Ids are sorted
    lexicographically and must be unique.
    """
    path = Path(path)
    if path.is_dir():
        docs = _load_directory(path)
    elif path.is_file():
        docs = _load_jsonl(path)
    else:
        raise FileNotFoundError(f"no such file or directory: {path}")
    docs.sort(key=lambda d: d.id)
    return Corpus(documents=tuple(docs))


def tokenize(text: str) -> list[Token]:
    """Split text into maximal runs of non-whitespace codepoints.

    Joining the token texts with the removed whitespace reconstructs the
    input exactly; only whitespace runs are lost when joining with single
    spaces.
    """
    return [Token(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def token_texts(text: str) -> list[str]:
    """Token surface forms only, for callers that do not need offsets."""
    return _TOKEN_RE.findall(text)
