"""Command-line entry point exposing the pipeline as subcommands.

Every output file gets a sibling <name>.manifest.json recording input
hashes, the resolved configuration, the seed, and the tool version, so any
artifact can be traced to exactly what produced it. Outputs are
byte-deterministic for a fixed seed regardless of worker count.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Optional

from . import __version__
from .confusion import ConfusionModel, estimate_confusion
from .corpus import Corpus, load_corpus
from .corrector import CharLM, DecoderParams, correct_tokens, train_lm
from .errors import ValidationError
from .metrics import evaluate
from .noise import (
    CHAR_SPACED,
    PLAIN,
    REALISTIC,
    UNIFORM,
    NoiseSpec,
    export_dataset,
    file_sha256,
    synthesize,
)
from .reuse import (
    AlignParams,
    cluster_spans,
    detect_pairs,
    filter_clusters,
    read_clusters,
    read_pairs,
    write_clusters,
    write_pairs,
)

log = logging.getLogger("ocrpost")

_CONFIG_SECTIONS = {
    "align": set(AlignParams.__dataclass_fields__),
    "grouping": {"dist_threshold", "support_fraction", "min_cluster_size"},
    "noise": {"kind", "rate", "replacement_set"},
    "decoder": {"beam_width", "lam", "candidate_floor"},
    "paths": {"corpus", "clean_corpus", "out_dir"},
}
_CONFIG_SCALARS = {"seed", "workers", "lm_order", "lm_k"}


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is exit 1 for
    anything the user got wrong and 2 only for I/O failures."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise SystemExit_(message)


class SystemExit_(SystemExit):
    def __init__(self, message: str) -> None:
        print(f"error: {message}", file=sys.stderr)
        super().__init__(1)


def load_config(path: Optional[str]) -> dict:
    """Read and validate the JSON config file; unknown keys are rejected so
    typos cannot silently fall back to defaults."""
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object")
    for key, value in data.items():
        if key in _CONFIG_SCALARS:
            continue
        if key not in _CONFIG_SECTIONS:
            raise ValidationError(f"unknown config key: {key!r}")
        if not isinstance(value, dict):
            raise ValidationError(f"config section {key!r} must be an object")
        unknown = set(value) - _CONFIG_SECTIONS[key]
        if unknown:
            raise ValidationError(
                f"unknown config keys in {key!r}: {', '.join(sorted(unknown))}"
            )
    return data


def _merged(section: dict, flag_values: dict) -> dict:
    out = dict(section)
    for key, value in flag_values.items():
        if value is not None:
            out[key] = value
    return out


def _align_params(args, config: dict) -> AlignParams:
    merged = _merged(
        config.get("align", {}),
        {
            "seed_len": args.seed_len,
            "x_drop": args.x_drop,
            "min_span_len": args.min_span_len,
            "min_score": args.min_score,
            "overlap_merge": args.overlap_merge,
        },
    )
    return AlignParams(**merged)


def _grouping(args, config: dict) -> dict:
    return _merged(
        config.get("grouping", {}),
        {
            "dist_threshold": getattr(args, "dist_threshold", None),
            "support_fraction": getattr(args, "support_fraction", None),
            "min_cluster_size": getattr(args, "min_cluster_size", None),
        },
    )


def corpus_sha256(corpus: Corpus) -> str:
    digest = hashlib.sha256()
    for doc in corpus:
        digest.update(doc.id.encode("utf-8"))
        digest.update(b"\x00")
        digest.update(doc.text.encode("utf-8"))
        digest.update(b"\x01")
    return digest.hexdigest()


def write_manifest(
    output: Path,
    subcommand: str,
    config: dict,
    inputs: dict[str, str],
    seed: Optional[int] = None,
    pair_count: Optional[int] = None,
) -> None:
    manifest = {
        "tool": "ocrpost",
        "version": __version__,
        "subcommand": subcommand,
        "seed": seed,
        "config": config,
        "inputs": inputs,
        "output": output.name,
    }
    if pair_count is not None:
        manifest["pair_count"] = pair_count
    Path(str(output) + ".manifest.json").write_text(
        json.dumps(manifest, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )


def _log_config(subcommand: str, config: dict) -> None:
    log.info("%s config: %s", subcommand, json.dumps(config, sort_keys=True, default=str))


def cmd_detect(args) -> int:
    config = load_config(args.config)
    params = _align_params(args, config)
    resolved = {"align": asdict(params)}
    _log_config("detect", resolved)
    corpus = load_corpus(args.corpus)
    pairs = detect_pairs(corpus, params)
    out = Path(args.out)
    write_pairs(pairs, out)
    write_manifest(out, "detect", resolved, {"corpus": corpus_sha256(corpus)})
    log.info("wrote %d pairs to %s", len(pairs), out)
    return 0


def cmd_cluster(args) -> int:
    config = load_config(args.config)
    params = _align_params(args, config)
    resolved = {"align": asdict(params)}
    _log_config("cluster", resolved)
    pairs = read_pairs(args.pairs)
    clusters = cluster_spans(pairs, params)
    out = Path(args.out)
    write_clusters(clusters, out)
    write_manifest(out, "cluster", resolved, {"pairs": file_sha256(args.pairs)})
    log.info("wrote %d clusters to %s", len(clusters), out)
    return 0


def cmd_estimate(args) -> int:
    config = load_config(args.config)
    grouping = _grouping(args, config)
    min_size = grouping.get("min_cluster_size", 20)
    dist_threshold = grouping.get("dist_threshold", 0.25)
    support_fraction = grouping.get("support_fraction", 0.5)
    workers = args.workers or config.get("workers", 1)
    resolved = {
        "grouping": {
            "min_cluster_size": min_size,
            "dist_threshold": dist_threshold,
            "support_fraction": support_fraction,
        }
    }
    _log_config("estimate", {**resolved, "workers": workers})
    clusters = filter_clusters(read_clusters(args.clusters), min_size)
    model = estimate_confusion(clusters, dist_threshold, support_fraction, workers)
    if not model.counts:
        log.warning("no word groups survived filtering; model is empty, avg_cer=0")
    out = Path(args.out)
    model.save(out)
    write_manifest(out, "estimate", resolved, {"clusters": file_sha256(args.clusters)})
    log.info("estimated model over %d clusters, avg_cer=%.4f", len(clusters), model.avg_cer)
    return 0


def cmd_synth(args) -> int:
    config = load_config(args.config)
    noise_cfg = _merged(
        config.get("noise", {}),
        {"kind": args.kind, "rate": args.rate, "replacement_set": args.replacement_set},
    )
    spec_kwargs = {"kind": noise_cfg.get("kind", REALISTIC), "seed": args.seed}
    if noise_cfg.get("rate") is not None:
        spec_kwargs["rate"] = noise_cfg["rate"]
    if noise_cfg.get("replacement_set") is not None:
        spec_kwargs["replacement_set"] = noise_cfg["replacement_set"]
    spec = NoiseSpec(**spec_kwargs)
    resolved = {"noise": spec.to_dict(), "format": args.format}
    _log_config("synth", resolved)
    if spec.kind == REALISTIC and not args.model:
        raise ValidationError("--model is required for realistic noise")
    model = ConfusionModel.load(args.model) if args.model else None
    corpus = load_corpus(args.corpus)
    dataset = synthesize(corpus, spec, model)
    out = Path(args.out)
    written = export_dataset(dataset, args.format, out)
    inputs = {"corpus": corpus_sha256(corpus)}
    if args.model:
        inputs["model"] = file_sha256(args.model)
    for path in written:
        write_manifest(
            path, "synth", resolved, inputs, seed=args.seed, pair_count=len(dataset)
        )
    log.info("wrote %d pairs to %s", len(dataset), ", ".join(str(p) for p in written))
    return 0


def cmd_train_lm(args) -> int:
    config = load_config(args.config)
    order = args.order or config.get("lm_order", 3)
    k = args.k if args.k is not None else config.get("lm_k", 0.1)
    resolved = {"lm_order": order, "lm_k": k}
    _log_config("train-lm", resolved)
    corpus = load_corpus(args.corpus)
    lm = train_lm(corpus, order=order, k=k)
    out = Path(args.out)
    lm.save(out)
    write_manifest(out, "train-lm", resolved, {"corpus": corpus_sha256(corpus)})
    log.info("trained order-%d LM over %d contexts", order, len(lm.counts))
    return 0


def cmd_correct(args) -> int:
    config = load_config(args.config)
    decoder_cfg = _merged(
        config.get("decoder", {}),
        {
            "beam_width": args.beam_width,
            "lam": args.lam,
            "candidate_floor": args.candidate_floor,
        },
    )
    params = DecoderParams(**decoder_cfg)
    resolved = {"decoder": asdict(params)}
    _log_config("correct", resolved)
    model = ConfusionModel.load(args.model)
    lm = CharLM.load(args.lm)
    tokens = Path(args.infile).read_text(encoding="utf-8").splitlines()
    corrected = correct_tokens(tokens, model, lm, params)
    out = Path(args.out)
    out.write_text("\n".join(corrected) + ("\n" if corrected else ""), encoding="utf-8")
    write_manifest(
        out,
        "correct",
        resolved,
        {
            "model": file_sha256(args.model),
            "lm": file_sha256(args.lm),
            "input": file_sha256(args.infile),
        },
    )
    log.info("corrected %d tokens", len(tokens))
    return 0


def cmd_evaluate(args) -> int:
    if args.tsv:
        hyps = []
        refs = []
        for lineno, line in enumerate(
            Path(args.tsv).read_text(encoding="utf-8").splitlines(), start=1
        ):
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValidationError(f"{args.tsv}:{lineno}: expected hyp<TAB>ref")
            hyps.append(parts[0])
            refs.append(parts[1])
    else:
        if not args.hyp or not args.ref:
            raise ValidationError("evaluate needs either --tsv or both --hyp and --ref")
        hyps = Path(args.hyp).read_text(encoding="utf-8").splitlines()
        refs = Path(args.ref).read_text(encoding="utf-8").splitlines()
    report = evaluate(hyps, refs)
    print(report.format_table(), file=sys.stderr)
    if args.out:
        out = Path(args.out)
        out.write_text(report.to_json() + "\n", encoding="utf-8")
        inputs = (
            {"tsv": file_sha256(args.tsv)}
            if args.tsv
            else {"hyp": file_sha256(args.hyp), "ref": file_sha256(args.ref)}
        )
        write_manifest(out, "evaluate", {}, inputs)
    else:
        print(report.to_json())
    return 0


def cmd_pipeline(args) -> int:
    config = load_config(args.config)
    params = _align_params(args, config)
    grouping = _grouping(args, config)
    min_size = grouping.get("min_cluster_size", 20)
    dist_threshold = grouping.get("dist_threshold", 0.25)
    support_fraction = grouping.get("support_fraction", 0.5)
    noise_cfg = _merged(config.get("noise", {}), {"kind": args.kind, "rate": args.rate})
    kind = noise_cfg.get("kind", REALISTIC)
    workers = args.workers or config.get("workers", 1)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    corpus = load_corpus(args.corpus)
    clean_corpus = load_corpus(args.clean_corpus) if args.clean_corpus else corpus

    resolved = {
        "align": asdict(params),
        "grouping": {
            "min_cluster_size": min_size,
            "dist_threshold": dist_threshold,
            "support_fraction": support_fraction,
        },
    }
    _log_config("pipeline", {**resolved, "workers": workers})

    pairs = detect_pairs(corpus, params)
    pairs_path = out_dir / "pairs.jsonl"
    write_pairs(pairs, pairs_path)
    write_manifest(pairs_path, "pipeline", resolved, {"corpus": corpus_sha256(corpus)}, args.seed)

    clusters = cluster_spans(pairs, params)
    clusters_path = out_dir / "clusters.jsonl"
    write_clusters(clusters, clusters_path)
    write_manifest(
        clusters_path, "pipeline", resolved, {"pairs": file_sha256(pairs_path)}, args.seed
    )

    kept = filter_clusters(clusters, min_size)
    model = estimate_confusion(kept, dist_threshold, support_fraction, workers)
    model_path = out_dir / "model.json"
    model.save(model_path)
    write_manifest(
        model_path, "pipeline", resolved, {"clusters": file_sha256(clusters_path)}, args.seed
    )

    spec_kwargs = {"kind": kind, "seed": args.seed}
    if noise_cfg.get("rate") is not None:
        spec_kwargs["rate"] = noise_cfg["rate"]
    if noise_cfg.get("replacement_set") is not None:
        spec_kwargs["replacement_set"] = noise_cfg["replacement_set"]
    spec = NoiseSpec(**spec_kwargs)
    dataset = synthesize(clean_corpus, spec, model)
    dataset_path = out_dir / "dataset.tsv"
    written = export_dataset(dataset, PLAIN, dataset_path)
    noise_resolved = {**resolved, "noise": spec.to_dict()}
    for path in written:
        write_manifest(
            path,
            "pipeline",
            noise_resolved,
            {"model": file_sha256(model_path), "clean_corpus": corpus_sha256(clean_corpus)},
            args.seed,
            pair_count=len(dataset),
        )
    log.info(
        "pipeline: %d pairs, %d clusters (%d kept), avg_cer=%.4f, %d dataset pairs",
        len(pairs),
        len(clusters),
        len(kept),
        model.avg_cer,
        len(dataset),
    )
    return 0


def _add_align_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed-len", type=int, default=None)
    p.add_argument("--x-drop", type=int, default=None)
    p.add_argument("--min-span-len", type=int, default=None)
    p.add_argument("--min-score", type=int, default=None)
    p.add_argument("--overlap-merge", type=float, default=None)


def _add_grouping_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--min-cluster-size", type=int, default=None)
    p.add_argument("--dist-threshold", type=float, default=None)
    p.add_argument("--support-fraction", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ocrpost", description=__doc__)
    parser.add_argument("--version", action="version", version=f"ocrpost {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="find repeated span pairs in a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    _add_align_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("cluster", help="cluster detected pairs")
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    _add_align_flags(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("estimate", help="estimate the confusion model from clusters")
    p.add_argument("--clusters", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--workers", type=int, default=None)
    _add_grouping_flags(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("synth", help="synthesize a noisy/clean parallel dataset")
    p.add_argument("--kind", choices=[UNIFORM, REALISTIC], default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--replacement-set", default=None)
    p.add_argument("--format", choices=[PLAIN, CHAR_SPACED], default=PLAIN)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train-lm", help="train a character n-gram language model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--k", type=float, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_train_lm)

    p = sub.add_parser("correct", help="correct tokens with the channel decoder")
    p.add_argument("--model", required=True)
    p.add_argument("--lm", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--beam-width", type=int, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--candidate-floor", type=float, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("evaluate", help="micro-averaged CER/WER report")
    p.add_argument("--hyp", default=None)
    p.add_argument("--ref", default=None)
    p.add_argument("--tsv", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="detect -> cluster -> estimate -> synth")
    p.add_argument("--corpus", required=True)
    p.add_argument("--clean-corpus", default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--kind", choices=[UNIFORM, REALISTIC], default=None)
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--config", default=None)
    _add_align_flags(p)
    _add_grouping_flags(p)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit_ as exc:
        return exc.code if isinstance(exc.code, int) else 1
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
