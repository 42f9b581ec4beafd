"""Noisy-channel token correction.

Combines the estimated confusion matrix (channel, read clean -> observed)
with a character n-gram language model (source) and decodes the best
same-length clean string by beam search with hypothesis recombination.
With a beam at least as wide as the number of language-model contexts the
search is exact Viterbi decoding.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .confusion import ConfusionModel
from .corpus import Corpus, token_texts
from .errors import ValidationError

# Padding/end marker for LM contexts. Tokens are whitespace-delimited and
# never contain NUL in any sane corpus.
BOUNDARY = "\x00"

_NEG_INF = float("-inf")


@dataclass(frozen=True)
class CharLM:
    """Additively smoothed character n-gram model over tokens.

    Each token is padded with order-1 boundary symbols in front and one
    behind, so token starts, interiors, and ends are all modeled.
    """

    order: int
    k: float
    counts: dict[str, dict[str, int]]
    context_totals: dict[str, int]
    alphabet: tuple[str, ...]

    def log_prob(self, context: str, char: str) -> float:
        row = self.counts.get(context)
        count = row.get(char, 0) if row else 0
        total = self.context_totals.get(context, 0)
        numerator = count + self.k
        denominator = total + self.k * len(self.alphabet)
        if numerator <= 0.0 or denominator <= 0.0:
            return _NEG_INF
        return math.log(numerator) - math.log(denominator)

    def score_token(self, token: str) -> float:
        """Log probability of a full token, end boundary included."""
        padded = BOUNDARY * (self.order - 1) + token + BOUNDARY
        score = 0.0
        for i in range(len(token) + 1):
            score += self.log_prob(padded[i : i + self.order - 1], padded[i + self.order - 1])
        return score

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "k": self.k,
            "alphabet": list(self.alphabet),
            "counts": {ctx: dict(sorted(row.items())) for ctx, row in sorted(self.counts.items())},
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True),
            encoding="utf-8",
        )

    @classmethod
    def from_dict(cls, data: dict) -> "CharLM":
        counts = {str(ctx): {str(c): int(n) for c, n in row.items()} for ctx, row in data["counts"].items()}
        return cls(
            order=int(data["order"]),
            k=float(data["k"]),
            counts=counts,
            context_totals={ctx: sum(row.values()) for ctx, row in counts.items()},
            alphabet=tuple(data["alphabet"]),
        )

    @classmethod
    def load(cls, path: str | Path) -> "CharLM":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def train_lm(corpus: Corpus, order: int = 3, k: float = 0.1) -> CharLM:
    """Count all order-grams of every token, padded with boundaries."""
    if order < 2:
        raise ValidationError("LM order must be >= 2")
    if k < 0:
        raise ValidationError("smoothing constant k must be >= 0")
    counts: dict[str, dict[str, int]] = defaultdict(lambda: defaultdict(int))
    chars: set[str] = {BOUNDARY}
    n_tokens = 0
    for doc in corpus:
        for token in token_texts(doc.text):
            n_tokens += 1
            chars.update(token)
            padded = BOUNDARY * (order - 1) + token + BOUNDARY
            for i in range(len(token) + 1):
                counts[padded[i : i + order - 1]][padded[i + order - 1]] += 1
    if n_tokens == 0:
        raise ValidationError("cannot train a language model on an empty corpus")
    plain_counts = {ctx: dict(row) for ctx, row in counts.items()}
    return CharLM(
        order=order,
        k=k,
        counts=plain_counts,
        context_totals={ctx: sum(row.values()) for ctx, row in plain_counts.items()},
        alphabet=tuple(sorted(chars)),
    )


@dataclass(frozen=True)
class DecoderParams:
    beam_width: int = 16
    lam: float = 0.5  # channel weight; 1-lam weights the language model
    candidate_floor: float = 1e-6

    def __post_init__(self) -> None:
        if self.beam_width < 1:
            raise ValidationError("beam_width must be >= 1")
        if not 0.0 <= self.lam <= 1.0:
            raise ValidationError("lambda must be in [0, 1]")
        if self.candidate_floor <= 0:
            raise ValidationError("candidate_floor must be positive")


class ChannelModel:
    """Inverted view of a confusion model: for an observed character, the
    clean characters that can emit it with probability above the floor.

    Build once and reuse across tokens; inverting rows per call would
    dominate bulk decoding.
    """

    def __init__(self, model: ConfusionModel, candidate_floor: float = 1e-6) -> None:
        self.candidate_floor = candidate_floor
        self._candidates: dict[str, list[tuple[str, float]]] = defaultdict(list)
        for clean in sorted(model.counts):
            for observed, p in sorted(model.row_distribution(clean).items()):
                if p >= candidate_floor:
                    self._candidates[observed].append((clean, math.log(p)))

    def candidates(self, observed: str) -> list[tuple[str, float]]:
        """(clean_char, channel log-prob) candidates for one observed char.
        Characters no clean character can emit pass through unchanged at
        channel probability 1."""
        found = self._candidates.get(observed)
        if not found:
            return [(observed, 0.0)]
        return found


def _as_channel(model: ConfusionModel | ChannelModel, floor: float) -> ChannelModel:
    if isinstance(model, ChannelModel):
        return model
    return ChannelModel(model, floor)


def decode_token(
    noisy: str,
    model: ConfusionModel | ChannelModel,
    lm: CharLM,
    params: DecoderParams = DecoderParams(),
) -> tuple[str, float]:
    """Best same-length clean string and its interpolated score.

    Maximizes lam * log P(noisy | s) + (1 - lam) * log P(s) over strings s
    of the same codepoint length. Hypotheses sharing an LM context are
    recombined, so a beam of at least |alphabet|^(order-1) performs exact
    Viterbi decoding. Ties break to the lexicographically smaller string.
    """
    channel = _as_channel(model, params.candidate_floor)
    lam = params.lam
    start_ctx = BOUNDARY * (lm.order - 1)
    # context -> (score, string); recombination keeps the best per context.
    beam: dict[str, tuple[float, str]] = {start_ctx: (0.0, "")}
    for observed in noisy:
        expansions: dict[str, tuple[float, str]] = {}
        for ctx, (score, prefix) in beam.items():
            for clean_char, channel_lp in channel.candidates(observed):
                total = score
                if lam > 0.0:
                    total += lam * channel_lp
                if lam < 1.0:
                    total += (1.0 - lam) * lm.log_prob(ctx, clean_char)
                candidate = prefix + clean_char
                next_ctx = (ctx + clean_char)[1:]
                incumbent = expansions.get(next_ctx)
                if (
                    incumbent is None
                    or total > incumbent[0]
                    or (total == incumbent[0] and candidate < incumbent[1])
                ):
                    expansions[next_ctx] = (total, candidate)
        if not expansions:
            raise ValidationError("decoder beam emptied; candidate_floor too high")
        survivors = sorted(
            expansions.items(), key=lambda item: (-item[1][0], item[1][1])
        )[: params.beam_width]
        beam = dict(survivors)
    best_score = _NEG_INF
    best_string = ""
    for ctx, (score, prefix) in beam.items():
        total = score
        if lam < 1.0:
            total += (1.0 - lam) * lm.log_prob(ctx, BOUNDARY)
        if total > best_score or (total == best_score and prefix < best_string):
            best_score = total
            best_string = prefix
    return best_string, best_score


def correct_token(
    noisy: str,
    model: ConfusionModel | ChannelModel,
    lm: CharLM,
    params: DecoderParams = DecoderParams(),
) -> str:
    return decode_token(noisy, model, lm, params)[0]


def correct_tokens(
    tokens: Sequence[str],
    model: ConfusionModel,
    lm: CharLM,
    params: DecoderParams = DecoderParams(),
) -> list[str]:
    """Bulk decoding with the channel inversion shared across tokens."""
    channel = ChannelModel(model, params.candidate_floor)
    return [correct_token(tok, channel, lm, params) for tok in tokens]


def score_correction(
    noisy: str,
    clean: str,
    model: ConfusionModel | ChannelModel,
    lm: CharLM,
    params: DecoderParams = DecoderParams(),
) -> float:
    """Recompute the decoder objective for a given clean candidate,
    independently of the search. Candidates outside the channel floor score
    -inf, mirroring what the decoder could ever have proposed."""
    if len(noisy) != len(clean):
        raise ValidationError("channel scoring needs equal-length strings")
    channel = _as_channel(model, params.candidate_floor)
    lam = params.lam
    score = 0.0
    ctx = BOUNDARY * (lm.order - 1)
    for observed, clean_char in zip(noisy, clean):
        channel_lp = None
        for cand, lp in channel.candidates(observed):
            if cand == clean_char:
                channel_lp = lp
                break
        if channel_lp is None:
            return _NEG_INF
        if lam > 0.0:
            score += lam * channel_lp
        if lam < 1.0:
            score += (1.0 - lam) * lm.log_prob(ctx, clean_char)
        ctx = (ctx + clean_char)[1:]
    if lam < 1.0:
        score += (1.0 - lam) * lm.log_prob(ctx, BOUNDARY)
    return score
