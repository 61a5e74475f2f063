"""Embed corpus responses with a causal language model.

Reads a JSONL corpus of generated responses, runs each response through
a transformer, pools the last hidden layer into one fixed-size vector,
and writes the vectors as a binary SEMB file plus a JSON sidecar that
records the settings used. The SEMB file is the hand-off point to the
analysis tooling; nothing else is shared between the two packages.

Exit codes match the analysis CLI: 0 on success, 1 for usage problems,
2 for data problems (missing corpus, unavailable model).
"""

from __future__ import annotations

import argparse
import json
import os
import struct
import sys
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

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

MAGIC = b"SEMB"
HEADER = struct.Struct("<IQQ")
VERSION = 1

DEFAULT_MODEL = "microsoft/DialoGPT-large"
POOLINGS = ("mean_last_layer", "last_token")


class DataError(Exception):
    """Raised when the corpus or the model cannot be used."""


@dataclass(frozen=True)
class ExtractConfig:
    """Settings for one extraction run."""

    model_name: str = DEFAULT_MODEL
    pooling: str = "mean_last_layer"
    batch_size: int = 16
    max_tokens: int = 128
    device: str = "cpu"

    def __post_init__(self) -> None:
        if self.pooling not in POOLINGS:
            raise ValueError(f"unknown pooling {self.pooling!r}, expected one of {POOLINGS}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class ExtractResult:
    """Summary of a finished extraction."""

    rows: int
    dims: int
    truncated: int


def read_corpus(path: str) -> tuple[list[str], list[str]]:
    """Return (ids, responses) from a JSONL corpus, in file order.

    Each line must be an object with a non-empty "response" string. An
    "id" field is optional; missing ids default to the record index.
    """
    if not os.path.isfile(path):
        raise DataError(f"no such corpus file: {path}")
    ids: list[str] = []
    responses: list[str] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(record, dict) or "response" not in record:
                raise DataError(f"{path}:{lineno}: expected an object with a 'response' field")
            response = record["response"]
            if not isinstance(response, str) or not response.strip():
                raise DataError(f"{path}:{lineno}: empty response")
            rid = str(record.get("id", len(ids)))
            if rid in seen:
                raise DataError(f"{path}:{lineno}: duplicate id {rid!r}")
            seen.add(rid)
            ids.append(rid)
            responses.append(response)
    if not responses:
        raise DataError(f"corpus {path} has no records")
    return ids, responses


def _load_model(config: ExtractConfig):
    """Load tokenizer and model, returning (tokenizer, model, device)."""
    import torch
    from transformers import AutoModel, AutoTokenizer
    from transformers.utils import logging as hf_logging

    hf_logging.set_verbosity_error()
    hf_logging.disable_progress_bar()
    try:
        tokenizer = AutoTokenizer.from_pretrained(config.model_name)
        model = AutoModel.from_pretrained(config.model_name)
    except (OSError, ValueError) as exc:
        raise DataError(f"model {config.model_name!r} is unavailable: {exc}") from None
    if tokenizer.pad_token is None:
        # Causal models often ship without a pad token; reuse EOS, whose
        # padded positions are masked out of the pooling anyway.
        if tokenizer.eos_token is not None:
            tokenizer.pad_token = tokenizer.eos_token
        else:
            tokenizer.add_special_tokens({"pad_token": "[PAD]"})
            model.resize_token_embeddings(len(tokenizer))
    try:
        device = torch.device(config.device)
        model.to(device)
    except (RuntimeError, ValueError) as exc:
        raise DataError(f"cannot use device {config.device!r}: {exc}") from None
    model.eval()
    return tokenizer, model, device


def embed_responses(responses: Sequence[str], config: ExtractConfig) -> tuple[np.ndarray, int]:
    """Embed each response, returning (matrix, truncated_count).

    The matrix is float32 with one row per response, rows in input
    order. Identical responses are embedded once and share their row
    bitwise. truncated_count is the number of responses longer than
    config.max_tokens after tokenization.
    """
    import torch

    tokenizer, model, device = _load_model(config)

    # Deduplicate so repeated responses come out of the same forward
    # pass, which keeps their rows identical to the last bit.
    first_index: dict[str, int] = {}
    for text in responses:
        first_index.setdefault(text, len(first_index))
    unique = list(first_index)

    lengths = [len(ids) for ids in tokenizer(list(unique), truncation=False)["input_ids"]]
    over = {text for text, n in zip(unique, lengths) if n > config.max_tokens}
    truncated = sum(1 for text in responses if text in over)

    blocks: list[np.ndarray] = []
    with torch.no_grad():
        for start in range(0, len(unique), config.batch_size):
            batch = unique[start : start + config.batch_size]
            enc = tokenizer(
                batch,
                padding=True,
                truncation=True,
                max_length=config.max_tokens,
                return_tensors="pt",
            )
            enc = {key: value.to(device) for key, value in enc.items()}
            try:
                hidden = model(**enc).last_hidden_state
            except (MemoryError, RuntimeError) as exc:
                oom = isinstance(exc, (MemoryError, torch.OutOfMemoryError))
                if not oom and "memory" not in str(exc).lower():
                    raise
                raise RuntimeError(
                    f"out of memory on a batch of {len(batch)} responses; "
                    "retry with a smaller --batch-size"
                ) from exc
            mask = enc["attention_mask"]
            counts = mask.sum(dim=1)
            if int(counts.min()) == 0:
                bad = start + int(counts.argmin())
                raise DataError(f"response {bad} tokenized to zero tokens")
            if config.pooling == "mean_last_layer":
                weights = mask.unsqueeze(-1).to(hidden.dtype)
                pooled = (hidden * weights).sum(dim=1) / weights.sum(dim=1)
            else:
                rows = torch.arange(hidden.shape[0], device=hidden.device)
                pooled = hidden[rows, counts - 1]
            blocks.append(pooled.cpu().numpy().astype(np.float32))
    matrix = np.concatenate(blocks, axis=0)
    order = [first_index[text] for text in responses]
    return matrix[order], truncated


def write_semb(path: str, matrix: np.ndarray) -> None:
    """Write a float32 matrix in the binary SEMB layout, atomically."""
    data = np.ascontiguousarray(matrix, dtype="<f4")
    if data.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {data.shape}")
    bad = np.argwhere(~np.isfinite(data))
    if bad.size:
        row, col = (int(v) for v in bad[0])
        raise DataError(f"non-finite embedding at row {row}, column {col}")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(HEADER.pack(VERSION, data.shape[0], data.shape[1]))
        fh.write(data.tobytes())
    os.replace(tmp, path)


def extract(corpus_path: str, out_path: str, config: ExtractConfig | None = None) -> ExtractResult:
    """Embed every corpus response and write out_path plus a sidecar.

    The sidecar at out_path + ".meta.json" records the model, pooling,
    and limits the vectors were produced with, so downstream runs can
    tell embeddings from different settings apart.
    """
    if config is None:
        config = ExtractConfig()
    ids, responses = read_corpus(corpus_path)
    matrix, truncated = embed_responses(responses, config)
    if matrix.shape[0] != len(ids):
        raise RuntimeError(f"embedded {matrix.shape[0]} rows for {len(ids)} records")
    write_semb(out_path, matrix)
    meta = dict(
        asdict(config),
        rows=int(matrix.shape[0]),
        dims=int(matrix.shape[1]),
        truncated=truncated,
    )
    meta_path = f"{out_path}.meta.json"
    tmp = f"{meta_path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, meta_path)
    return ExtractResult(rows=meta["rows"], dims=meta["dims"], truncated=truncated)


class _UsageError(Exception):
    """A problem with how the command was invoked (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="semdiv-extract",
        description="Embed a JSONL response corpus into a binary SEMB file.",
    )
    parser.add_argument("corpus_path", help="JSONL corpus of generated responses")
    parser.add_argument("out_path", help="destination embedding file")
    parser.add_argument("--model", default=DEFAULT_MODEL,
                        help=f"model name or local path (default {DEFAULT_MODEL})")
    parser.add_argument("--pooling", choices=POOLINGS, default="mean_last_layer",
                        help="how to pool hidden states (default mean_last_layer)")
    parser.add_argument("--batch-size", type=int, default=16,
                        help="responses per forward pass (default 16)")
    parser.add_argument("--max-tokens", type=int, default=128,
                        help="truncate responses to this many tokens (default 128)")
    parser.add_argument("--device", default="cpu", help="torch device (default cpu)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.batch_size < 1:
            raise _UsageError("--batch-size must be >= 1")
        if args.max_tokens < 1:
            raise _UsageError("--max-tokens must be >= 1")
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return exc.code if isinstance(exc.code, int) else 0
    config = ExtractConfig(
        model_name=args.model,
        pooling=args.pooling,
        batch_size=args.batch_size,
        max_tokens=args.max_tokens,
        device=args.device,
    )
    try:
        result = extract(args.corpus_path, args.out_path, config)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    if result.truncated:
        print(
            f"truncated {result.truncated} of {result.rows} responses "
            f"to {config.max_tokens} tokens",
            file=sys.stderr,
        )
    print(f"wrote {result.rows} x {result.dims} embeddings to {args.out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
