"""Closed-book question generation: ROUGE, data rules, model decoding and the cbqg CLI."""

from ._cbqg import (
    ConfigError,
    DataError,
    IoError,
    Model,
    RougeScore,
    __version__,
    filter_pairs,
    gumbel_from_uniform,
    gumbel_softmax,
    normalize_text,
    nt_xent,
    rouge_l,
    rouge_lsum,
    rouge_n,
    rouge_tokenize,
    run_cli,
    split_dataset,
    split_sentences,
    word_tokenize,
)

__all__ = [
    "ConfigError",
    "DataError",
    "IoError",
    "Model",
    "RougeScore",
    "__version__",
    "filter_pairs",
    "gumbel_from_uniform",
    "gumbel_softmax",
    "normalize_text",
    "nt_xent",
    "rouge_l",
    "rouge_lsum",
    "rouge_n",
    "rouge_tokenize",
    "run_cli",
    "split_dataset",
    "split_sentences",
    "word_tokenize",
]
