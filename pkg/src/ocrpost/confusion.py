"""Consensus calling and character confusion estimation.

Within a reuse cluster, similar words are grouped, a representative word is
voted per group (most common character at each position), and every variant
is aligned against the representative. Substitution columns, identity
included, accumulate into a per-character replacement count matrix.
"""

from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import token_texts
from .errors import ValidationError
from .metrics import within_distance
from .reuse import ReuseCluster


@dataclass(frozen=True)
class WordGroup:
    """A consensus word plus the observed variants it was voted from.

    support counts the distinct cluster spans that contributed at least one
    variant occurrence.
    """

    representative: str
    variants: tuple[tuple[str, int], ...]
    support: int


@dataclass(frozen=True)
class ConfusionModel:
    """Per-character replacement counts: counts[clean][observed].

    Counts, not probabilities, are stored so models from separate runs can
    be merged by addition. Rows normalize on demand; characters never seen
    as clean characters have no row and fall back to identity at noise time.
    """

    counts: Mapping[str, Mapping[str, float]]
    _rows: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def alphabet(self) -> tuple[str, ...]:
        chars = set(self.counts)
        for row in self.counts.values():
            chars.update(row)
        return tuple(sorted(chars))

    @property
    def row_totals(self) -> dict[str, float]:
        return {c: sum(row.values()) for c, row in self.counts.items()}

    @property
    def avg_cer(self) -> float:
        total = off = 0.0
        for c, row in self.counts.items():
            for obs, n in row.items():
                total += n
                if obs != c:
                    off += n
        return off / total if total else 0.0

    def row_distribution(self, clean_char: str) -> dict[str, float]:
        """Normalized replacement distribution for one clean character.

        Empty dict when the character was never observed as a clean
        character.
        """
        cached = self._rows.get(clean_char)
        if cached is not None:
            return cached
        row = self.counts.get(clean_char)
        if not row:
            dist: dict[str, float] = {}
        else:
            total = sum(row.values())
            dist = {obs: n / total for obs, n in row.items() if n > 0}
        self._rows[clean_char] = dist
        return dist

    def merge(self, other: "ConfusionModel") -> "ConfusionModel":
        merged: dict[str, Counter] = defaultdict(Counter)
        for model in (self, other):
            for c, row in model.counts.items():
                merged[c].update(row)
        return ConfusionModel(counts={c: dict(row) for c, row in merged.items()})

    def to_dict(self) -> dict:
        return {
            "alphabet": list(self.alphabet),
            "counts": {c: dict(sorted(row.items())) for c, row in sorted(self.counts.items())},
            "avg_cer": self.avg_cer,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True, indent=0),
            encoding="utf-8",
        )

    @classmethod
    def from_dict(cls, data: Mapping) -> "ConfusionModel":
        if "counts" not in data:
            raise ValidationError("confusion model JSON must have a 'counts' key")
        counts = {
            str(c): {str(obs): n for obs, n in row.items()}
            for c, row in data["counts"].items()
        }
        return cls(counts=counts)

    @classmethod
    def load(cls, path: str | Path) -> "ConfusionModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def average_cer(model: ConfusionModel) -> float:
    """Off-diagonal mass over total mass; 0 for an empty model."""
    return model.avg_cer


def positional_consensus(variants: Sequence[tuple[str, int]]) -> str:
    """Vote the representative word from (variant, count) pairs.

    Voting happens over variants of the modal length (count-weighted,
    length ties break small); each position takes the count-weighted
    majority character, character ties break to the smallest codepoint.
    """
    if not variants:
        raise ValidationError("positional_consensus requires at least one variant")
    length_weight: Counter = Counter()
    for word, count in variants:
        length_weight[len(word)] += count
    modal_len = min(
        (length for length in length_weight),
        key=lambda length: (-length_weight[length], length),
    )
    result = []
    for i in range(modal_len):
        votes: Counter = Counter()
        for word, count in variants:
            if len(word) == modal_len:
                votes[word[i]] += count
        result.append(min(votes, key=lambda ch: (-votes[ch], ch)))
    return "".join(result)


def char_substitutions(variant: str, representative: str) -> list[tuple[str, str]]:
    """(clean_char, observed_char) pairs from a minimum-edit global alignment
    of the variant (observed) against the representative (clean).

    One pair per aligned match or substitution column, identity pairs
    included; insertion and deletion columns contribute nothing. Traceback
    ties prefer substitution over insertion (extra observed char) over
    deletion (lost clean char), maximizing one-to-one evidence.
    """
    n, m = len(variant), len(representative)
    # Full DP table; words are short.
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        dist[i][0] = i
    for j in range(m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        vi = variant[i - 1]
        row = dist[i]
        prev = dist[i - 1]
        for j in range(1, m + 1):
            cost = 0 if vi == representative[j - 1] else 1
            row[j] = min(prev[j - 1] + cost, prev[j] + 1, row[j - 1] + 1)
    pairs = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            cost = 0 if variant[i - 1] == representative[j - 1] else 1
            if dist[i - 1][j - 1] + cost == dist[i][j]:
                pairs.append((representative[j - 1], variant[i - 1]))
                i -= 1
                j -= 1
                continue
        if i > 0 and dist[i - 1][j] + 1 == dist[i][j]:
            i -= 1  # insertion: observed char with no clean counterpart
            continue
        j -= 1  # deletion: clean char lost by the OCR
    pairs.reverse()
    return pairs


def group_words(
    cluster: ReuseCluster,
    dist_threshold: float = 0.25,
    support_fraction: float = 0.5,
) -> list[WordGroup]:
    """Group similar words across the spans of one cluster.

    Word types are processed by descending frequency in the cluster; each
    still-ungrouped type becomes a pivot and absorbs every ungrouped type
    within a length-relative edit distance, ceil(dist_threshold * max(len)).
    A group is emitted only when it draws variants from at least
    support_fraction of the cluster's spans, which operationalizes "common
    in the cluster". Each word type belongs to at most one group.
    """
    span_tokens = [token_texts(span.text) for span in cluster.spans]
    freq: Counter = Counter()
    for tokens in span_tokens:
        freq.update(tokens)
    # Spans that contain each word type, for the support count.
    spans_with: dict[str, set[int]] = defaultdict(set)
    for idx, tokens in enumerate(span_tokens):
        for word in tokens:
            spans_with[word].add(idx)

    types = sorted(freq, key=lambda w: (-freq[w], w))
    n_types = len(types)
    lengths = np.array([len(w) for w in types], dtype=np.int32)
    # Hashed character-count signatures: every edit changes the multiset L1
    # by at most 2, so dist(a, b) >= L1(sig_a, sig_b) / 2 and the vectorized
    # bound rejects the vast majority of pairs without running the DP.
    sig = np.zeros((n_types, 64), dtype=np.int32)
    for ti, word in enumerate(types):
        for ch in word:
            sig[ti, ord(ch) & 63] += 1

    grouped = np.zeros(n_types, dtype=bool)
    min_support = support_fraction * len(cluster.spans)
    groups = []
    for pi, pivot in enumerate(types):
        if grouped[pi]:
            continue
        grouped[pi] = True
        members = [pivot]
        lp = lengths[pi]
        cand = np.flatnonzero(~grouped)
        if cand.size:
            limits = np.ceil(
                dist_threshold * np.maximum(lengths[cand], lp)
            ).astype(np.int32)
            l1 = np.abs(sig[cand] - sig[pi]).sum(axis=1)
            feasible = cand[
                (np.abs(lengths[cand] - lp) <= limits) & (l1 <= 2 * limits)
            ]
            for wi in feasible:
                word = types[wi]
                limit = math.ceil(dist_threshold * max(len(word), int(lp)))
                if within_distance(word, pivot, limit):
                    grouped[wi] = True
                    members.append(word)
        support_spans: set[int] = set()
        for word in members:
            support_spans |= spans_with[word]
        if len(support_spans) < min_support:
            continue
        variants = tuple(
            sorted(((w, freq[w]) for w in members), key=lambda wc: (-wc[1], wc[0]))
        )
        groups.append(
            WordGroup(
                representative=positional_consensus(variants),
                variants=variants,
                support=len(support_spans),
            )
        )
    return groups


def _count_cluster(
    cluster: ReuseCluster, dist_threshold: float, support_fraction: float
) -> dict[str, Counter]:
    counts: dict[str, Counter] = defaultdict(Counter)
    for group in group_words(cluster, dist_threshold, support_fraction):
        for word, count in group.variants:
            for clean, observed in char_substitutions(word, group.representative):
                counts[clean][observed] += count
    return counts


def estimate_confusion(
    clusters: Iterable[ReuseCluster],
    dist_threshold: float = 0.25,
    support_fraction: float = 0.5,
    workers: int = 1,
) -> ConfusionModel:
    """Accumulate the replacement distribution over all clusters.

    Every variant occurrence (weighted by count) is aligned against its
    group representative; every match/substitution column increments the
    counts. Per-cluster counting is order-independent, so the worker count
    cannot change the result.
    """
    clusters = list(clusters)
    total: dict[str, Counter] = defaultdict(Counter)
    if workers > 1 and len(clusters) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            partials = pool.map(
                _count_cluster,
                clusters,
                [dist_threshold] * len(clusters),
                [support_fraction] * len(clusters),
                chunksize=max(1, len(clusters) // (workers * 4)),
            )
            for partial in partials:
                for clean, row in partial.items():
                    total[clean].update(row)
    else:
        for cluster in clusters:
            for clean, row in _count_cluster(
                cluster, dist_threshold, support_fraction
            ).items():
                total[clean].update(row)
    return ConfusionModel(counts={c: dict(row) for c, row in total.items()})


def uniform_confusion(alphabet: Iterable[str], rate: float) -> ConfusionModel:
    """A synthetic model whose every row keeps 1-rate identity mass and
    spreads rate evenly over the rest of the alphabet.

    Useful as the matched-rate baseline when comparing against an estimated
    model; average_cer equals rate exactly.
    """
    chars = sorted(set(alphabet))
    if not 0.0 <= rate <= 1.0:
        raise ValidationError(f"rate must be in [0, 1], got {rate}")
    if len(chars) < 2 and rate > 0:
        raise ValidationError("uniform confusion needs at least two characters")
    counts: dict[str, dict[str, float]] = {}
    for c in chars:
        row = {o: rate / (len(chars) - 1) for o in chars if o != c}
        row[c] = 1.0 - rate
        counts[c] = row
    return ConfusionModel(counts=counts)
