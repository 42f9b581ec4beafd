"""Levenshtein distance and micro-averaged CER/WER evaluation."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from .corpus import token_texts
from .errors import ValidationError


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Minimum number of single-element insertions, deletions, and
    substitutions (unit costs) transforming a into b.

    Works on strings (codepoint level) and on token sequences alike.
    """
    if a == b:
        return 0
    # Keep the inner loop over the shorter sequence.
    if len(b) > len(a):
        a, b = b, a
    m = len(b)
    if m == 0:
        return len(a)
    prev = list(range(m + 1))
    cur = [0] * (m + 1)
    for i, ca in enumerate(a, start=1):
        cur[0] = i
        for j in range(1, m + 1):
            cost = 0 if ca == b[j - 1] else 1
            cur[j] = min(prev[j - 1] + cost, prev[j] + 1, cur[j - 1] + 1)
        prev, cur = cur, prev
    return prev[m]


def within_distance(a: Sequence, b: Sequence, limit: int) -> bool:
    """True iff edit_distance(a, b) <= limit, using a banded computation.

    Cheap pre-check plus an Ukkonen band of width 2*limit+1; used by word
    grouping where most candidate pairs are far apart.
    """
    if limit < 0:
        return False
    n, m = len(a), len(b)
    if abs(n - m) > limit:
        return False
    if limit == 0:
        return a == b
    big = limit + 1
    prev = [j if j <= limit else big for j in range(m + 1)]
    for i in range(1, n + 1):
        lo = max(1, i - limit)
        hi = min(m, i + limit)
        cur = [big] * (m + 1)
        cur[0] = i if i <= limit else big
        row_min = cur[0] if lo == 1 else big
        for j in range(lo, hi + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            v = prev[j - 1] + cost
            if prev[j] + 1 < v:
                v = prev[j] + 1
            if cur[j - 1] + 1 < v:
                v = cur[j - 1] + 1
            if v < big:
                cur[j] = v
                if v < row_min:
                    row_min = v
        if row_min > limit:
            return False
        prev = cur
    return prev[m] <= limit


@dataclass(frozen=True)
class EvalReport:
    """Micro-averaged character and word error rates with the underlying
    counts, so reports from parallel shards can be merged additively."""

    cer: float
    wer: float
    char_edits: int
    char_ref_total: int
    word_edits: int
    word_ref_total: int
    pair_count: int

    @classmethod
    def from_counts(
        cls,
        char_edits: int,
        char_ref_total: int,
        word_edits: int,
        word_ref_total: int,
        pair_count: int,
    ) -> "EvalReport":
        return cls(
            cer=char_edits / char_ref_total if char_ref_total else 0.0,
            wer=word_edits / word_ref_total if word_ref_total else 0.0,
            char_edits=char_edits,
            char_ref_total=char_ref_total,
            word_edits=word_edits,
            word_ref_total=word_ref_total,
            pair_count=pair_count,
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "cer": self.cer,
                "wer": self.wer,
                "char_edits": self.char_edits,
                "char_ref_total": self.char_ref_total,
                "word_edits": self.word_edits,
                "word_ref_total": self.word_ref_total,
                "pair_count": self.pair_count,
            },
            sort_keys=True,
        )

    def format_table(self) -> str:
        rows = [
            ("pairs", str(self.pair_count)),
            ("CER", f"{self.cer:.4f}  ({self.char_edits}/{self.char_ref_total})"),
            ("WER", f"{self.wer:.4f}  ({self.word_edits}/{self.word_ref_total})"),
        ]
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def evaluate(hypotheses: Sequence[str], references: Sequence[str]) -> EvalReport:
    """Micro-averaged CER/WER: total edits over total reference length.

    Character edits are codepoint-level Levenshtein; word edits are
    Levenshtein over whitespace token sequences compared for exact equality.
    """
    if len(hypotheses) != len(references):
        raise ValidationError(
            f"hypothesis/reference count mismatch: {len(hypotheses)} vs {len(references)}"
        )
    char_edits = char_total = word_edits = word_total = 0
    for hyp, ref in zip(hypotheses, references):
        char_edits += edit_distance(hyp, ref)
        char_total += len(ref)
        hyp_words = token_texts(hyp)
        ref_words = token_texts(ref)
        word_edits += edit_distance(hyp_words, ref_words)
        word_total += len(ref_words)
    return EvalReport.from_counts(
        char_edits, char_total, word_edits, word_total, len(hypotheses)
    )
