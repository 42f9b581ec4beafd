"""Synthetic noise generation and parallel dataset export.

Two regimes: uniform replacement at a fixed rate by a random character from
a replacement set, and realistic replacement where every character is drawn
from its estimated confusion row (identity included, so no separate rate
applies). Both are one-to-one, so noisy and clean strings always have equal
length.
"""

from __future__ import annotations

import hashlib
import string
from bisect import bisect_right
from dataclasses import dataclass
from itertools import accumulate
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .confusion import ConfusionModel
from .corpus import Corpus, token_texts
from .errors import ValidationError

UNIFORM = "uniform"
REALISTIC = "realistic"

# The conventional uniform-noise pool: ASCII letters and digits.
ASCII_REPLACEMENTS = string.ascii_lowercase + string.ascii_uppercase + string.digits


@dataclass(frozen=True)
class NoiseSpec:
    """What noise to generate. rate and replacement_set apply to the
    uniform kind only; realistic noise needs a ConfusionModel at call time
    and carries its own per-character identity probabilities."""

    kind: str
    rate: Optional[float] = None
    replacement_set: str = ASCII_REPLACEMENTS
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in (UNIFORM, REALISTIC):
            raise ValidationError(f"unknown noise kind: {self.kind!r}")
        if self.rate is not None and not 0.0 <= self.rate <= 1.0:
            raise ValidationError(f"rate must be in [0, 1], got {self.rate}")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "rate": self.rate,
            "replacement_set": self.replacement_set,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class ParallelPair:
    noisy: str
    clean: str

    def __post_init__(self) -> None:
        if len(self.noisy) != len(self.clean):
            raise ValidationError("noisy/clean codepoint lengths must match")


@dataclass(frozen=True)
class ParallelDataset:
    pairs: tuple[ParallelPair, ...]

    def __iter__(self) -> Iterator[ParallelPair]:
        return iter(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)


def apply_uniform(
    word: str, rate: float, replacement_set: str, rng: np.random.Generator
) -> str:
    """Replace each codepoint independently with probability rate by a
    uniform draw from replacement_set.

    The draw may coincide with the original character, so the effective
    substitution rate is slightly below the nominal one; tests and
    matched-rate comparisons must use the effective rate.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValidationError(f"rate must be in [0, 1], got {rate}")
    if rate > 0 and not replacement_set:
        raise ValidationError("replacement_set must be non-empty when rate > 0")
    if not word or rate == 0.0:
        return word
    mask = rng.random(len(word)) < rate
    hits = int(mask.sum())
    if hits == 0:
        return word
    draws = rng.integers(0, len(replacement_set), hits)
    chars = list(word)
    for pos, draw in zip(np.flatnonzero(mask), draws):
        chars[pos] = replacement_set[draw]
    return "".join(chars)


class _RowSampler:
    """Cumulative-distribution sampler over the normalized rows of a
    confusion model. Characters without a row map to themselves."""

    def __init__(self, model: ConfusionModel) -> None:
        self._rows: dict[str, tuple[list[str], list[float]]] = {}
        for clean in model.counts:
            dist = model.row_distribution(clean)
            if not dist:
                continue
            chars = sorted(dist)
            cum = list(accumulate(dist[c] for c in chars))
            cum[-1] = 1.0  # guard against float drift at the top end
            self._rows[clean] = (chars, cum)

    def apply(self, word: str, rng: np.random.Generator) -> str:
        if not word:
            return word
        draws = rng.random(len(word))
        out = []
        for ch, u in zip(word, draws):
            row = self._rows.get(ch)
            if row is None:
                out.append(ch)
            else:
                chars, cum = row
                out.append(chars[bisect_right(cum, u)])
        return "".join(out)


def apply_realistic(word: str, model: ConfusionModel, rng: np.random.Generator) -> str:
    """Replace each codepoint by a draw from its normalized confusion row;
    one uniform variate is consumed per codepoint whether or not the model
    knows the character."""
    return _RowSampler(model).apply(word, rng)


def record_rng(seed: int, index: int) -> np.random.Generator:
    """Deterministic per-record generator derived from (seed, index), so
    generation order and parallelism cannot change the output."""
    return np.random.default_rng([seed, index])


def synthesize(
    corpus: Corpus, spec: NoiseSpec, model: Optional[ConfusionModel] = None
) -> ParallelDataset:
    """Tokenize the corpus and emit one noisy/clean pair per token, in
    corpus order.

    Uniform noise takes its rate from the spec, falling back to the model's
    average character error rate when a model is supplied; realistic noise
    requires the model.
    """
    if spec.kind == REALISTIC:
        if model is None:
            raise ValidationError("realistic noise requires a confusion model")
        sampler = _RowSampler(model)
        rate = None
    else:
        rate = spec.rate
        if rate is None:
            if model is None:
                raise ValidationError(
                    "uniform noise needs an explicit rate or a model to derive it from"
                )
            rate = model.avg_cer
        sampler = None

    pairs = []
    index = 0
    for doc in corpus:
        for clean in token_texts(doc.text):
            rng = record_rng(spec.seed, index)
            if sampler is not None:
                noisy = sampler.apply(clean, rng)
            else:
                noisy = apply_uniform(clean, rate, spec.replacement_set, rng)
            pairs.append(ParallelPair(noisy=noisy, clean=clean))
            index += 1
    return ParallelDataset(pairs=tuple(pairs))


PLAIN = "plain"
CHAR_SPACED = "char_spaced"


def _check_exportable(token: str) -> None:
    if "\t" in token or "\n" in token:
        raise ValidationError("tokens must not contain tab or newline characters")


def export_dataset(
    dataset: ParallelDataset, format: str, path: str | Path
) -> list[Path]:
    """Write the dataset; returns the paths written.

    plain: one file of noisy<TAB>clean lines. char_spaced: two parallel
    files, <path>.src (noisy) and <path>.tgt (clean), each line the token's
    codepoints separated by single spaces — the conventional input for
    character-level sequence models.
    """
    path = Path(path)
    if format == PLAIN:
        with open(path, "w", encoding="utf-8") as fh:
            for pair in dataset:
                _check_exportable(pair.noisy)
                _check_exportable(pair.clean)
                fh.write(f"{pair.noisy}\t{pair.clean}\n")
        return [path]
    if format == CHAR_SPACED:
        src = path.with_name(path.name + ".src")
        tgt = path.with_name(path.name + ".tgt")
        with open(src, "w", encoding="utf-8") as fs, open(tgt, "w", encoding="utf-8") as ft:
            for pair in dataset:
                _check_exportable(pair.noisy)
                _check_exportable(pair.clean)
                fs.write(" ".join(pair.noisy) + "\n")
                ft.write(" ".join(pair.clean) + "\n")
        return [src, tgt]
    raise ValidationError(f"unknown dataset format: {format!r}")


def read_plain(path: str | Path) -> ParallelDataset:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValidationError(f"{path}:{lineno}: expected noisy<TAB>clean")
            pairs.append(ParallelPair(noisy=parts[0], clean=parts[1]))
    return ParallelDataset(pairs=tuple(pairs))


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
