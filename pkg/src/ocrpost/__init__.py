"""ocrpost: estimate OCR character error distributions from repeated text
spans in a corpus, synthesize realistic training noise, and correct/evaluate
noisy tokens."""

from .confusion import (
    ConfusionModel,
    WordGroup,
    average_cer,
    char_substitutions,
    estimate_confusion,
    group_words,
    positional_consensus,
    uniform_confusion,
)
from .corpus import Corpus, Document, Token, load_corpus, tokenize
from .corrector import (
    BOUNDARY,
    CharLM,
    ChannelModel,
    DecoderParams,
    correct_token,
    correct_tokens,
    decode_token,
    score_correction,
    train_lm,
)
from .errors import ValidationError
from .metrics import EvalReport, edit_distance, evaluate
from .noise import (
    ASCII_REPLACEMENTS,
    CHAR_SPACED,
    PLAIN,
    REALISTIC,
    UNIFORM,
    NoiseSpec,
    ParallelDataset,
    ParallelPair,
    apply_realistic,
    apply_uniform,
    export_dataset,
    synthesize,
)
from .reuse import (
    AlignParams,
    ReuseCluster,
    Span,
    cluster_spans,
    detect_pairs,
    filter_clusters,
    read_clusters,
    write_clusters,
)

__version__ = "0.1.0"

__all__ = [
    "ASCII_REPLACEMENTS",
    "AlignParams",
    "BOUNDARY",
    "CHAR_SPACED",
    "CharLM",
    "ChannelModel",
    "ConfusionModel",
    "Corpus",
    "DecoderParams",
    "Document",
    "EvalReport",
    "NoiseSpec",
    "PLAIN",
    "ParallelDataset",
    "ParallelPair",
    "REALISTIC",
    "ReuseCluster",
    "Span",
    "Token",
    "UNIFORM",
    "ValidationError",
    "WordGroup",
    "apply_realistic",
    "apply_uniform",
    "average_cer",
    "char_substitutions",
    "cluster_spans",
    "correct_token",
    "correct_tokens",
    "decode_token",
    "detect_pairs",
    "edit_distance",
    "estimate_confusion",
    "evaluate",
    "export_dataset",
    "filter_clusters",
    "group_words",
    "load_corpus",
    "positional_consensus",
    "read_clusters",
    "score_correction",
    "synthesize",
    "tokenize",
    "train_lm",
    "uniform_confusion",
    "write_clusters",
]
