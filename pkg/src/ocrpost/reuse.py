"""Repeated-span detection across a corpus via seeded local alignment.

The detector hashes every seed_len-character n-gram, buckets identical
n-grams across documents, extends each seed hit left and right with greedy
x-drop extension on the hit diagonal, merges overlapping extensions, and
rescores each merged region with an exact local alignment so reported
scores match what a quadratic-DP oracle computes on the span texts.
Single-linkage clustering then turns pairs into reuse clusters.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numba import njit, types
from numba.typed import Dict as NumbaDict

from .corpus import Corpus
from .errors import ValidationError

_HASH_BASE = 1099511628211  # FNV-ish odd multiplier; hashes wrap mod 2**64


@dataclass(frozen=True)
class Span:
    """A contiguous region of one document, with its text materialized so
    downstream stages never need the corpus again."""

    doc_id: str
    start: int
    end: int
    text: str

    def __post_init__(self) -> None:
        if not (0 <= self.start < self.end):
            raise ValidationError(f"invalid span bounds [{self.start}, {self.end})")
        if len(self.text) != self.end - self.start:
            raise ValidationError("span text does not match its bounds")

    def __len__(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class AlignParams:
    """Tunables for detection and clustering. The defaults tolerate roughly
    10-15% character noise; every value is configurable and none is
    canonical."""

    seed_len: int = 10
    match: int = 1
    mismatch: int = -1
    gap: int = -1  # linear
    x_drop: int = 10
    min_span_len: int = 80
    min_score: int = 40
    overlap_merge: float = 0.5

    def __post_init__(self) -> None:
        if self.seed_len < 4:
            raise ValidationError("seed_len must be >= 4")
        if not 0.0 < self.overlap_merge <= 1.0:
            raise ValidationError("overlap_merge must be in (0, 1]")
        if self.min_score <= 0:
            raise ValidationError("min_score must be positive")
        if self.min_span_len < 1:
            raise ValidationError("min_span_len must be >= 1")
        if self.x_drop <= 0:
            raise ValidationError("x_drop must be positive")


@dataclass(frozen=True)
class ReuseCluster:
    id: int
    spans: tuple[Span, ...]

    def __post_init__(self) -> None:
        if len(self.spans) < 2:
            raise ValidationError("a reuse cluster needs at least two spans")


Pair = tuple[Span, Span, int]


def _codepoints(text: str) -> np.ndarray:
    return np.frombuffer(text.encode("utf-32-le"), dtype=np.int32)


def _rolling_hashes(arr: np.ndarray, seed_len: int) -> np.ndarray:
    """Polynomial hash of every seed_len window, wrapping mod 2**64."""
    n = arr.shape[0]
    count = n - seed_len + 1
    if count <= 0:
        return np.empty(0, dtype=np.uint64)
    powers = []
    p = 1
    for _ in range(seed_len):
        powers.append(p)
        p = (p * _HASH_BASE) % (1 << 64)
    out = np.zeros(count, dtype=np.uint64)
    a = arr.astype(np.uint64)
    for k in range(seed_len):
        out += a[k : k + count] * np.uint64(powers[seed_len - 1 - k])
    return out


@njit(cache=True)
def _extend_hits(
    hashes, docs, gpos, doc_lo, doc_hi, text, match, mismatch, x_drop, memo
):
    """Greedy gapless x-drop extension of every seed hit.

    Extension from any anchor inside an already-found extent on the same
    (doc1, doc2, diagonal) reproduces that extent exactly — the running
    score along a fixed diagonal is a shifted prefix sum, so the peak and
    the x-drop cutoff are anchor-independent — which makes the memo skip an
    exact optimization, not an approximation.
    Returns one (d1, d2, diag, lo, hi) row per distinct extension, where
    lo/hi are global offsets into doc1 and diag maps them into doc2.
    """
    n = hashes.shape[0]
    cap = 1024
    out = np.empty((cap, 5), np.int64)
    cnt = 0
    i = 0
    while i < n:
        j = i + 1
        h = hashes[i]
        while j < n and hashes[j] == h:
            j += 1
        for a in range(i, j):
            d1 = docs[a]
            p1 = gpos[a]
            for b in range(a + 1, j):
                d2 = docs[b]
                p2 = gpos[b]
                diag = p2 - p1
                key = (d1, d2, diag)
                if key in memo:
                    known = memo[key]
                    if known[0] <= p1 < known[1]:
                        continue
                e1 = doc_hi[d1]
                e2 = doc_hi[d2]
                s = 0
                best = 0
                hi = p1
                k = 0
                while p1 + k < e1 and p2 + k < e2:
                    if text[p1 + k] == text[p2 + k]:
                        s += match
                    else:
                        s += mismatch
                    if s > best:
                        best = s
                        hi = p1 + k + 1
                    elif best - s > x_drop:
                        break
                    k += 1
                b1 = doc_lo[d1]
                b2 = doc_lo[d2]
                s = 0
                best = 0
                lo = p1
                k = 1
                while p1 - k >= b1 and p2 - k >= b2:
                    if text[p1 - k] == text[p2 - k]:
                        s += match
                    else:
                        s += mismatch
                    if s > best:
                        best = s
                        lo = p1 - k
                    elif best - s > x_drop:
                        break
                    k += 1
                memo[key] = (lo, hi)
                if cnt == cap:
                    cap *= 2
                    grown = np.empty((cap, 5), np.int64)
                    grown[:cnt] = out[:cnt]
                    out = grown
                out[cnt, 0] = d1
                out[cnt, 1] = d2
                out[cnt, 2] = diag
                out[cnt, 3] = lo
                out[cnt, 4] = hi
                cnt += 1
        i = j
    return out[:cnt]


@njit(cache=True)
def _local_alignment_score(a, b, match, mismatch, gap):
    """Exact Smith-Waterman score with linear gap penalty."""
    n = a.shape[0]
    m = b.shape[0]
    prev = np.zeros(m + 1, np.int64)
    cur = np.zeros(m + 1, np.int64)
    best = 0
    for i in range(1, n + 1):
        ai = a[i - 1]
        cur[0] = 0
        for j in range(1, m + 1):
            s = match if ai == b[j - 1] else mismatch
            v = prev[j - 1] + s
            if prev[j] + gap > v:
                v = prev[j] + gap
            if cur[j - 1] + gap > v:
                v = cur[j - 1] + gap
            if v < 0:
                v = 0
            cur[j] = v
            if v > best:
                best = v
        prev, cur = cur, prev
    return best


def _merge_intervals(intervals: list[tuple[int, int]]) -> list[tuple[int, int]]:
    intervals.sort()
    merged = [intervals[0]]
    for lo, hi in intervals[1:]:
        last_lo, last_hi = merged[-1]
        if lo < last_hi:  # strict overlap; adjacent regions stay separate
            merged[-1] = (last_lo, max(last_hi, hi))
        else:
            merged.append((lo, hi))
    return merged


def detect_pairs(corpus: Corpus, params: AlignParams = AlignParams()) -> list[Pair]:
    """Find repeated (possibly noisy) span pairs across the corpus.

    A hit of a (doc, offset) against itself is excluded; hits between
    distinct offsets of the same document are kept. Reported scores are
    exact local-alignment scores of the span texts. Output is sorted by
    (doc_id1, start1, doc_id2, start2) and is independent of document
    insertion order.
    """
    if len(corpus) == 0:
        raise ValidationError("detect_pairs requires a non-empty corpus")
    docs = sorted(corpus, key=lambda d: d.id)
    arrays = [_codepoints(d.text) for d in docs]

    doc_lo = np.zeros(len(docs), dtype=np.int64)
    doc_hi = np.zeros(len(docs), dtype=np.int64)
    offset = 0
    hash_parts = []
    doc_parts = []
    pos_parts = []
    for di, arr in enumerate(arrays):
        doc_lo[di] = offset
        doc_hi[di] = offset + arr.shape[0]
        hashes = _rolling_hashes(arr, params.seed_len)
        if hashes.shape[0]:
            hash_parts.append(hashes)
            doc_parts.append(np.full(hashes.shape[0], di, dtype=np.int64))
            pos_parts.append(np.arange(offset, offset + hashes.shape[0], dtype=np.int64))
        offset += arr.shape[0]
    if not hash_parts:
        return []
    text_all = np.concatenate(arrays) if arrays else np.empty(0, np.int32)
    hash_all = np.concatenate(hash_parts)
    doc_all = np.concatenate(doc_parts)
    pos_all = np.concatenate(pos_parts)
    # Canonical processing order: by hash, then (doc, pos).
    order = np.lexsort((pos_all, doc_all, hash_all))

    memo = NumbaDict.empty(
        key_type=types.UniTuple(types.int64, 3),
        value_type=types.UniTuple(types.int64, 2),
    )
    extents = _extend_hits(
        hash_all[order],
        doc_all[order],
        pos_all[order],
        doc_lo,
        doc_hi,
        text_all,
        params.match,
        params.mismatch,
        params.x_drop,
        memo,
    )

    by_key: dict[tuple[int, int, int], list[tuple[int, int]]] = defaultdict(list)
    for d1, d2, diag, lo, hi in extents:
        by_key[(int(d1), int(d2), int(diag))].append((int(lo), int(hi)))

    pairs: list[Pair] = []
    for (d1, d2, diag), intervals in by_key.items():
        for lo, hi in _merge_intervals(intervals):
            if hi - lo < params.min_span_len:
                continue
            a = text_all[lo:hi]
            b = text_all[lo + diag : hi + diag]
            score = int(
                _local_alignment_score(a, b, params.match, params.mismatch, params.gap)
            )
            if score < params.min_score:
                continue
            s1 = _make_span(docs[d1], lo - int(doc_lo[d1]), hi - int(doc_lo[d1]))
            s2 = _make_span(
                docs[d2], lo + diag - int(doc_lo[d2]), hi + diag - int(doc_lo[d2])
            )
            pairs.append((s1, s2, score))
    pairs.sort(
        key=lambda p: (p[0].doc_id, p[0].start, p[1].doc_id, p[1].start, p[0].end, p[1].end)
    )
    return pairs


def _make_span(doc, start: int, end: int) -> Span:
    return Span(doc_id=doc.id, start=start, end=end, text=doc.text[start:end])


class _UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # Smaller root wins, keeping components order-stable.
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def _stitch(a: Span, b: Span) -> Span:
    """Union of two overlapping same-document spans; their texts are slices
    of the same document, so the overlap region is identical in both."""
    if b.start < a.start:
        a, b = b, a
    if b.end <= a.end:
        return a
    return Span(
        doc_id=a.doc_id,
        start=a.start,
        end=b.end,
        text=a.text + b.text[a.end - b.start :],
    )


def _overlap_qualifies(a: Span, b: Span, overlap_merge: float) -> bool:
    lo = max(a.start, b.start)
    hi = min(a.end, b.end)
    if hi <= lo:
        return False
    return hi - lo >= overlap_merge * min(len(a), len(b))


def _merge_same_doc(spans: list[Span], overlap_merge: float) -> list[Span]:
    """Fixpoint merge of same-document spans overlapping by at least
    overlap_merge of the shorter span. Any qualifying pair is merged, not
    just sort-adjacent ones, so the no-heavy-overlap invariant holds on
    exit."""
    spans = sorted(spans, key=lambda s: (s.doc_id, s.start, s.end))
    changed = True
    while changed:
        changed = False
        for i in range(len(spans)):
            a = spans[i]
            for j in range(i + 1, len(spans)):
                b = spans[j]
                if b.doc_id != a.doc_id or b.start >= a.end:
                    break
                if _overlap_qualifies(a, b, overlap_merge):
                    merged = _stitch(a, b)
                    del spans[j]
                    spans[i] = merged
                    spans.sort(key=lambda s: (s.doc_id, s.start, s.end))
                    changed = True
                    break
            if changed:
                break
    return spans


def cluster_spans(
    pairs: Sequence[Pair], params: AlignParams = AlignParams()
) -> list[ReuseCluster]:
    """Single-linkage transitive closure over detected pairs.

    Spans are linked when they appear together in a pair or when they are
    same-document spans overlapping by at least overlap_merge of the
    shorter one; overlapping same-document spans within a cluster are
    merged into their union. Clusters (and spans within them) come out in
    (doc_id, start) order; degenerate clusters that collapse to a single
    span are dropped.
    """
    if not pairs:
        return []
    index: dict[tuple[str, int, int], int] = {}
    spans: list[Span] = []
    for s1, s2, _score in pairs:
        for s in (s1, s2):
            key = (s.doc_id, s.start, s.end)
            if key not in index:
                index[key] = len(spans)
                spans.append(s)
    uf = _UnionFind(len(spans))
    for s1, s2, _score in pairs:
        uf.union(index[(s1.doc_id, s1.start, s1.end)], index[(s2.doc_id, s2.start, s2.end)])
    # Same-document overlap links, over the original spans.
    by_doc: dict[str, list[int]] = defaultdict(list)
    for i, span in enumerate(spans):
        by_doc[span.doc_id].append(i)
    for doc_spans in by_doc.values():
        doc_spans.sort(key=lambda i: (spans[i].start, spans[i].end))
        for ai in range(len(doc_spans)):
            a = spans[doc_spans[ai]]
            for bi in range(ai + 1, len(doc_spans)):
                b = spans[doc_spans[bi]]
                if b.start >= a.end:
                    break
                if _overlap_qualifies(a, b, params.overlap_merge):
                    uf.union(doc_spans[ai], doc_spans[bi])

    components: dict[int, list[Span]] = defaultdict(list)
    for i, span in enumerate(spans):
        components[uf.find(i)].append(span)

    merged_clusters = []
    for members in components.values():
        merged = _merge_same_doc(members, params.overlap_merge)
        if len(merged) >= 2:
            merged_clusters.append(sorted(merged, key=lambda s: (s.doc_id, s.start, s.end)))
    merged_clusters.sort(key=lambda ms: (ms[0].doc_id, ms[0].start))
    return [
        ReuseCluster(id=i, spans=tuple(ms)) for i, ms in enumerate(merged_clusters)
    ]


def filter_clusters(
    clusters: Iterable[ReuseCluster], min_size: int = 20
) -> list[ReuseCluster]:
    """Keep clusters with at least min_size spans, order preserved."""
    if min_size < 2:
        raise ValidationError("min_size must be >= 2")
    return [c for c in clusters if len(c.spans) >= min_size]


def write_pairs(pairs: Iterable[Pair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s1, s2, score in pairs:
            record = {
                "doc1": s1.doc_id,
                "start1": s1.start,
                "end1": s1.end,
                "text1": s1.text,
                "doc2": s2.doc_id,
                "start2": s2.start,
                "end2": s2.end,
                "text2": s2.text,
                "score": score,
            }
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def read_pairs(path: str | Path) -> list[Pair]:
    pairs: list[Pair] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                r = json.loads(line)
                pairs.append(
                    (
                        Span(r["doc1"], r["start1"], r["end1"], r["text1"]),
                        Span(r["doc2"], r["start2"], r["end2"], r["text2"]),
                        int(r["score"]),
                    )
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValidationError(f"{path}:{lineno}: bad pair record: {exc}") from exc
    return pairs


def write_clusters(clusters: Iterable[ReuseCluster], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for cluster in clusters:
            record = {
                "cluster_id": cluster.id,
                "spans": [
                    {"doc": s.doc_id, "start": s.start, "end": s.end, "text": s.text}
                    for s in cluster.spans
                ],
            }
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def read_clusters(path: str | Path) -> list[ReuseCluster]:
    clusters = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                r = json.loads(line)
                spans = tuple(
                    Span(s["doc"], s["start"], s["end"], s["text"]) for s in r["spans"]
                )
                clusters.append(ReuseCluster(id=int(r["cluster_id"]), spans=spans))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValidationError(
                    f"{path}:{lineno}: bad cluster record: {exc}"
                ) from exc
    return clusters
