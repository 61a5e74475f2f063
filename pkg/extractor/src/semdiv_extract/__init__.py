"""Transformer embedding extraction for response corpora."""

from .extract import (
    DataError,
    ExtractConfig,
    ExtractResult,
    embed_responses,
    extract,
    main,
    read_corpus,
    write_semb,
)

__all__ = [
    "DataError",
    "ExtractConfig",
    "ExtractResult",
    "embed_responses",
    "extract",
    "main",
    "read_corpus",
    "write_semb",
]
