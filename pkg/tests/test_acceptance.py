"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s`. The round-trip fixture
(200 clusters of 25 noised copies) is built once per session; noise is
injected by an independent sampler in this module, never by the package's
own noise code, so recovery is checked across genuinely separate paths.
"""

import itertools
import time

import numpy as np
import pytest

from ocrpost.cli import main
from ocrpost.confusion import estimate_confusion, group_words, uniform_confusion
from ocrpost.confusion import ConfusionModel
from ocrpost.corpus import Corpus, Document, token_texts
from ocrpost.corrector import DecoderParams, correct_tokens, decode_token, train_lm
from ocrpost.metrics import edit_distance, evaluate
from ocrpost.noise import NoiseSpec, UNIFORM, apply_realistic, synthesize
from ocrpost.reuse import cluster_spans, detect_pairs, filter_clusters

from .oracles import naive_edit_distance, viterbi_decode

ALPHABET = "abcdefghijklmnopqrstuvwxyzäöåé"  # 30 characters
CHAR_TO_IDX = {c: i for i, c in enumerate(ALPHABET)}


def build_true_model(rng):
    """Ground-truth confusion: 92% identity, 8% spread over 3 confusables."""
    n = len(ALPHABET)
    probs = np.zeros((n, n))
    for i in range(n):
        probs[i, i] = 0.92
        others = [j for j in range(n) if j != i]
        for j, mass in zip(rng.choice(others, size=3, replace=False), (0.05, 0.02, 0.01)):
            probs[i, j] = mass
    counts = {
        ALPHABET[i]: {ALPHABET[j]: probs[i, j] for j in range(n) if probs[i, j] > 0}
        for i in range(n)
    }
    return probs, ConfusionModel(counts=counts)


def make_vocab(rng, size=2500):
    vocab: set[str] = set()
    while len(vocab) < size:
        for length in rng.choice([9, 11, 13], size=size - len(vocab)):
            vocab.add("".join(ALPHABET[k] for k in rng.integers(0, 30, length)))
    return sorted(vocab)


def inject_noise(text, cum_rows, rng):
    """Independent noiser used to build the fixture (not ocrpost.noise)."""
    idx = np.array([CHAR_TO_IDX.get(ch, -1) for ch in text])
    out = list(text)
    mask = idx >= 0
    draws = rng.random(int(mask.sum()))
    choices = (draws[:, None] > cum_rows[idx[mask]]).sum(axis=1)
    for pos, choice in zip(np.flatnonzero(mask), choices):
        out[pos] = ALPHABET[choice]
    return "".join(out)


@pytest.fixture(scope="module")
def bundle():
    """Ground-truth model, noised corpus, and the recovered model."""
    rng = np.random.default_rng(20260808)
    probs, true_model = build_true_model(rng)
    cum_rows = np.cumsum(probs, axis=1)
    vocab = make_vocab(rng)
    train_passages = [" ".join(rng.choice(vocab, size=40)) for _ in range(200)]
    test_passages = [" ".join(rng.choice(vocab, size=40)) for _ in range(50)]

    docs = [
        Document(f"c{cid:03d}_v{v:02d}.txt", inject_noise(passage, cum_rows, rng))
        for cid, passage in enumerate(train_passages)
        for v in range(25)
    ]
    corpus = Corpus(tuple(docs))

    started = time.time()
    pairs = detect_pairs(corpus)
    clusters = filter_clusters(cluster_spans(pairs), 20)
    recovered = estimate_confusion(clusters)
    elapsed = time.time() - started

    return {
        "probs": probs,
        "true_model": true_model,
        "cum_rows": cum_rows,
        "train_passages": train_passages,
        "test_passages": test_passages,
        "clusters": clusters,
        "recovered": recovered,
        "pipeline_seconds": elapsed,
    }


def test_confusion_round_trip(bundle):
    recovered = bundle["recovered"]
    probs = bundle["probs"]
    assert len(bundle["clusters"]) == 200
    checked = 0
    worst = 0.0
    for i, char in enumerate(ALPHABET):
        if recovered.row_totals.get(char, 0) < 500:
            continue
        checked += 1
        rec = recovered.row_distribution(char)
        true_row = {ALPHABET[j]: probs[i, j] for j in range(30) if probs[i, j] > 0}
        domain = set(rec) | set(true_row)
        l1 = sum(abs(rec.get(c, 0.0) - true_row.get(c, 0.0)) for c in domain)
        worst = max(worst, l1)
        assert l1 < 0.05, (char, l1)
    assert checked > 0
    cer_error = abs(recovered.avg_cer - 0.08)
    assert cer_error < 0.01
    print(
        f"\nACCEPTANCE PASS: confusion round-trip — {checked} rows, "
        f"worst L1 {worst:.4f} < 0.05, |avg_cer-0.08| = {cer_error:.4f} < 0.01, "
        f"detect->cluster->estimate in {bundle['pipeline_seconds']:.1f}s"
    )


def test_consensus_recovery(bundle):
    total = good = 0
    for cluster, passage in zip(bundle["clusters"], bundle["train_passages"]):
        clean_words = set(token_texts(passage))
        for group in group_words(cluster):
            total += 1
            good += group.representative in clean_words
    assert total > 0
    rate = good / total
    assert rate >= 0.99
    print(
        f"\nACCEPTANCE PASS: consensus recovery — {good}/{total} "
        f"representatives correct ({rate:.2%} >= 99%)"
    )


def test_edit_distance_oracle_equivalence():
    strings = [
        "".join(chars)
        for n in range(8)
        for chars in itertools.product("abc", repeat=n)
    ]
    rng = np.random.default_rng(3279)
    count = 100_000
    left = rng.integers(0, len(strings), count)
    right = rng.integers(0, len(strings), count)
    mismatches = 0
    for i, j in zip(left, right):
        a, b = strings[i], strings[j]
        if edit_distance(a, b) != naive_edit_distance(a, b):
            mismatches += 1
    assert mismatches == 0
    print(
        f"\nACCEPTANCE PASS: edit-distance oracle — {count} random pairs "
        f"(strings len<=7 over abc), zero mismatches"
    )


def test_table_noise_vectors():
    assert edit_distance("tirkonkvlln", "kirkonkylän") == 3
    assert edit_distance("kzrkonkblän", "kirkonkylän") == 2
    from ocrpost.confusion import char_substitutions

    pairs = char_substitutions("tirkonkvlln", "kirkonkylän")
    non_identity = {p for p in pairs if p[0] != p[1]}
    assert non_identity == {("k", "t"), ("y", "v"), ("ä", "l")}
    print(
        "\nACCEPTANCE PASS: noise-example vectors — distances 3 and 2, "
        "substitutions {(k,t),(y,v),(ä,l)}"
    )


def test_noise_statistics(bundle):
    true_model = bundle["true_model"]
    probs = bundle["probs"]
    # At least 1e5 characters of clean text.
    clean_text = " ".join(bundle["train_passages"] + bundle["test_passages"])
    assert len(clean_text) >= 100_000

    # Realistic noise reproduces each confusion row.
    rng = np.random.default_rng(5150)
    noisy = apply_realistic(clean_text, true_model, rng)
    observed: dict[str, dict[str, int]] = {}
    for clean_char, noisy_char in zip(clean_text, noisy):
        if clean_char == " ":
            continue
        row = observed.setdefault(clean_char, {})
        row[noisy_char] = row.get(noisy_char, 0) + 1
    checked = 0
    for char, row in observed.items():
        total = sum(row.values())
        if total < 500:
            continue
        checked += 1
        i = CHAR_TO_IDX[char]
        domain = set(row) | {ALPHABET[j] for j in range(30) if probs[i, j] > 0}
        l1 = sum(
            abs(row.get(c, 0) / total - probs[i, CHAR_TO_IDX[c]]) for c in domain
        )
        assert l1 < 0.05, (char, l1)
    assert checked > 0

    # Uniform synthesis at the model-derived rate hits the effective rate.
    corpus = Corpus((Document("clean", clean_text),))
    dataset = synthesize(corpus, NoiseSpec(kind=UNIFORM, seed=99), model=true_model)
    rate = true_model.avg_cer
    from ocrpost.noise import ASCII_REPLACEMENTS

    flips = changed = 0
    expected = 0.0
    for pair in dataset:
        for a, b in zip(pair.clean, pair.noisy):
            flips += 1
            changed += a != b
            inside = 1 / len(ASCII_REPLACEMENTS) if a in ASCII_REPLACEMENTS else 0.0
            expected += rate * (1 - inside)
    empirical = changed / flips
    effective = expected / flips
    assert abs(empirical - effective) < 0.01
    print(
        f"\nACCEPTANCE PASS: noise statistics — {checked} realistic rows within "
        f"L1 0.05 over {len(clean_text)} chars; uniform CER {empirical:.4f} vs "
        f"effective {effective:.4f} (|diff| < 0.01)"
    )


def test_correction_trend_realistic_beats_uniform(bundle):
    recovered = bundle["recovered"]
    lm_corpus = Corpus(
        tuple(
            Document(f"p{i:03d}", text)
            for i, text in enumerate(
                bundle["train_passages"] + bundle["test_passages"]
            )
        )
    )
    lm = train_lm(lm_corpus, order=3, k=0.1)

    test_rng = np.random.default_rng(777)
    clean_tokens: list[str] = []
    noisy_tokens: list[str] = []
    for passage in bundle["test_passages"]:
        noisy = inject_noise(passage, bundle["cum_rows"], test_rng)
        clean_tokens.extend(token_texts(passage))
        noisy_tokens.extend(token_texts(noisy))

    wer_ocr = evaluate(noisy_tokens, clean_tokens).wer
    hyp_real = correct_tokens(noisy_tokens, recovered, lm)
    wer_real = evaluate(hyp_real, clean_tokens).wer
    matched_uniform = uniform_confusion(ALPHABET, recovered.avg_cer)
    hyp_uni = correct_tokens(noisy_tokens, matched_uniform, lm)
    wer_uni = evaluate(hyp_uni, clean_tokens).wer

    assert wer_real < wer_uni, (wer_real, wer_uni)
    assert wer_uni < wer_ocr, (wer_uni, wer_ocr)
    print(
        f"\nACCEPTANCE PASS: correction trend — WER realistic {wer_real:.4f} < "
        f"uniform {wer_uni:.4f} < uncorrected {wer_ocr:.4f}"
    )


def test_exact_decoding_matches_viterbi():
    rng = np.random.default_rng(4242)
    alphabet = "abcde"
    counts = {}
    for c in alphabet:
        row = {c: int(rng.integers(50, 90))}
        for other in alphabet:
            if other != c and rng.random() < 0.7:
                row[other] = int(rng.integers(1, 25))
        counts[c] = row
    model = ConfusionModel(counts=counts)
    vocab = [
        "".join(rng.choice(list(alphabet), size=rng.integers(2, 8)))
        for _ in range(12)
    ]
    lm = train_lm(
        Corpus((Document("t", " ".join(rng.choice(vocab, size=120))),)),
        order=3,
        k=0.1,
    )
    width = len(lm.alphabet) ** (lm.order - 1)
    params = DecoderParams(beam_width=width)
    mismatches = 0
    for _ in range(1000):
        token = "".join(rng.choice(list(alphabet), size=rng.integers(1, 9)))
        decoded, score = decode_token(token, model, lm, params)
        oracle_string, oracle_score = viterbi_decode(token, model, lm, params.lam)
        if decoded != oracle_string or abs(score - oracle_score) > 1e-9:
            mismatches += 1
    assert mismatches == 0
    print(
        f"\nACCEPTANCE PASS: exact decoding — beam {width} matches the "
        f"exhaustive Viterbi oracle on 1000 tokens, zero mismatches"
    )


def test_pipeline_determinism_across_workers(tmp_path):
    rng = np.random.default_rng(31337)
    corpus_dir = tmp_path / "corpus"
    corpus_dir.mkdir()
    for cid in range(6):
        passage = " ".join(rng.choice(make_vocab(rng, 300), size=25))
        for v in range(21):
            chars = list(passage)
            for i in np.flatnonzero(rng.random(len(chars)) < 0.08):
                if chars[i] != " ":
                    chars[i] = ALPHABET[int(rng.integers(0, 30))]
            (corpus_dir / f"c{cid}_v{v:02d}.txt").write_text(
                "".join(chars), encoding="utf-8"
            )
    snapshots = []
    for name, workers in (("run1", "1"), ("run2", "4")):
        out_dir = tmp_path / name
        code = main(
            [
                "pipeline",
                "--corpus",
                str(corpus_dir),
                "--out-dir",
                str(out_dir),
                "--seed",
                "555",
                "--kind",
                "realistic",
                "--workers",
                workers,
            ]
        )
        assert code == 0
        snapshots.append(
            {p.name: p.read_bytes() for p in sorted(out_dir.iterdir()) if p.is_file()}
        )
    assert snapshots[0].keys() == snapshots[1].keys()
    for filename in snapshots[0]:
        assert snapshots[0][filename] == snapshots[1][filename], filename
    artifacts = ", ".join(sorted(snapshots[0]))
    print(
        f"\nACCEPTANCE PASS: pipeline determinism — workers 1 vs 4 produced "
        f"byte-identical {artifacts}"
    )
