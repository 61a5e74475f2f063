"""Corpus and embedding file I/O.

Readers and writers for the three on-disk formats the toolkit exchanges with
the outside world:

* response corpora as JSONL (one object per line) or TSV with an
  ``id<TAB>context<TAB>response`` header,
* embedding matrices in the SEMB binary format (with a plain-text fallback
  of whitespace-separated floats),
* plus the shared tokenizer and n-gram extraction used by every lexical
  metric.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "ResponseRecord",
    "ResponseCorpus",
    "TokenSequence",
    "EmbeddingMatrix",
    "load_responses",
    "write_responses",
    "tokenize",
    "extract_ngrams",
    "read_embeddings",
    "write_embeddings",
    "atomic_write_bytes",
    "atomic_write_text",
]

_SEMB_MAGIC = b"SEMB"
_SEMB_VERSION = 1
_SEMB_HEADER = struct.Struct("<IQQ")  # version, rows, dims

_TSV_HEADER = "id\tcontext\tresponse"


def atomic_write_bytes(path: str | os.PathLike[str], data: bytes) -> None:
    """Write ``data`` to ``path`` via a temp file and rename, so readers
    never observe a half-written file."""
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent or Path("."), prefix=target.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, target)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def atomic_write_text(path: str | os.PathLike[str], text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


@dataclass(frozen=True)
class ResponseRecord:
    """One (context, response) pair; ``context`` is None for unconditioned
    responses."""

    id: str
    context: str | None
    response: str


@dataclass(frozen=True)
class ResponseCorpus:
    """An ordered, immutable collection of response records."""

    records: tuple[ResponseRecord, ...]
    source_path: str = "<memory>"

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ResponseRecord]:
        return iter(self.records)

    def responses(self) -> list[str]:
        return [r.response for r in self.records]


@dataclass(frozen=True)
class TokenSequence:
    """Tokens of a single text, in order. Tokens are never empty strings."""

    tokens: tuple[str, ...]

    def __post_init__(self) -> None:
        if any(not t for t in self.tokens):
            raise ValueError("token sequences may not contain empty tokens")

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)

    def __getitem__(self, i: int) -> str:
        return self.tokens[i]


@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    """A dense (rows x dims) float32 matrix of vector representations.

    All values are finite; the underlying array is marked read-only.
    Equality is bitwise on the payload, so a write/read round trip compares
    equal.
    """

    data: np.ndarray
    ids: tuple[str, ...] | None = field(default=None)

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise ValueError(f"embedding matrix must be 2-D, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise ValueError(f"non-finite embedding value at row {bad[0]}, column {bad[1]}")
        if self.ids is not None and len(self.ids) != arr.shape[0]:
            raise ValueError("ids length does not match number of rows")
        if arr.flags.writeable:
            arr = arr.copy()
            arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def rows(self) -> int:
        return int(self.data.shape[0])

    @property
    def dims(self) -> int:
        return int(self.data.shape[1])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingMatrix):
            return NotImplemented
        return (
            self.data.shape == other.data.shape
            and self.data.tobytes() == other.data.tobytes()
            and self.ids == other.ids
        )

    __hash__ = None  # type: ignore[assignment]


def tokenize(text: str) -> TokenSequence:
    """Lowercase ``text``, split on whitespace, and split punctuation
    characters (Unicode category P*) into standalone tokens.

    >>> list(tokenize("Hello, world!"))
    ['hello', ',', 'world', '!']
    """
    tokens: list[str] = []
    for chunk in text.lower().split():
        start = 0
        for i, ch in enumerate(chunk):
            if unicodedata.category(ch).startswith("P"):
                if i > start:
                    tokens.append(chunk[start:i])
                tokens.append(ch)
                start = i + 1
        if start < len(chunk):
            tokens.append(chunk[start:])
    return TokenSequence(tuple(tokens))


def extract_ngrams(tokens: TokenSequence | Sequence[str], n: int) -> Counter[str]:
    """Multiset of order-``n`` n-grams, each rendered as tokens joined by a
    single space. A sequence shorter than ``n`` yields an empty counter."""
    if n < 1:
        raise ValueError(f"n-gram order must be >= 1, got {n}")
    toks = list(tokens)
    return Counter(" ".join(toks[i : i + n]) for i in range(len(toks) - n + 1))


# ---------------------------------------------------------------------------
# response corpora


def load_responses(path: str | os.PathLike[str], format: str = "jsonl") -> ResponseCorpus:
    """Load a response corpus from ``path``.

    ``format`` is "jsonl" ({"id"?, "context"?, "response"} per line) or
    "tsv" (header ``id<TAB>context<TAB>response``). Records keep file order;
    ids are auto-assigned as "0", "1", ... where absent. Malformed lines,
    duplicate ids, and empty responses raise DataError naming the line or
    ids at fault.
    """
    if format not in ("jsonl", "tsv"):
        raise ValueError(f"unknown corpus format: {format!r} (expected 'jsonl' or 'tsv')")
    p = Path(path)
    if not p.is_file():
        raise DataError(f"no such corpus file: {p}")
    records = _parse_jsonl(p) if format == "jsonl" else _parse_tsv(p)

    seen: set[str] = set()
    duplicates: list[str] = []
    empties: list[str] = []
    for rec in records:
        if rec.id in seen:
            duplicates.append(rec.id)
        seen.add(rec.id)
        if not rec.response.strip():
            empties.append(rec.id)
    problems = []
    if duplicates:
        problems.append(f"duplicate ids: {sorted(set(duplicates))}")
    if empties:
        problems.append(f"empty responses for ids: {empties}")
    if problems:
        raise DataError(f"{p}: " + "; ".join(problems))
    return ResponseCorpus(tuple(records), source_path=str(p))


def _parse_jsonl(p: Path) -> list[ResponseRecord]:
    records: list[ResponseRecord] = []
    with open(p, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{p}:{lineno}: invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise DataError(f"{p}:{lineno}: expected a JSON object, got {type(obj).__name__}")
            if "response" not in obj:
                raise DataError(f"{p}:{lineno}: missing required field 'response'")
            response = obj["response"]
            if not isinstance(response, str):
                raise DataError(f"{p}:{lineno}: 'response' must be a string")
            rec_id = obj.get("id")
            if rec_id is not None and not isinstance(rec_id, str):
                raise DataError(f"{p}:{lineno}: 'id' must be a string")
            context = obj.get("context")
            if context is not None and not isinstance(context, str):
                raise DataError(f"{p}:{lineno}: 'context' must be a string")
            if not rec_id:
                rec_id = str(len(records))
            records.append(ResponseRecord(id=rec_id, context=context or None, response=response))
    return records


def _parse_tsv(p: Path) -> list[ResponseRecord]:
    records: list[ResponseRecord] = []
    with open(p, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\r\n")
        if header != _TSV_HEADER:
            raise DataError(f"{p}:1: expected header {_TSV_HEADER!r}, got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\r\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise DataError(f"{p}:{lineno}: expected 3 tab-separated fields, got {len(fields)}")
            rec_id, context, response = fields
            if not rec_id:
                rec_id = str(len(records))
            records.append(ResponseRecord(id=rec_id, context=context or None, response=response))
    return records


def write_responses(corpus: ResponseCorpus, path: str | os.PathLike[str], format: str = "jsonl") -> None:
    """Write ``corpus`` to ``path`` in the given format. TSV refuses fields
    containing tabs or newlines since they cannot round trip."""
    if format == "jsonl":
        lines = []
        for rec in corpus:
            obj: dict[str, str] = {"id": rec.id}
            if rec.context is not None:
                obj["context"] = rec.context
            obj["response"] = rec.response
            lines.append(json.dumps(obj, ensure_ascii=False))
        atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))
    elif format == "tsv":
        lines = [_TSV_HEADER]
        for rec in corpus:
            for name, value in (("id", rec.id), ("context", rec.context or ""), ("response", rec.response)):
                if "\t" in value or "\n" in value or "\r" in value:
                    raise ValueError(f"record {rec.id!r}: {name} contains a tab or newline, not representable in TSV")
            lines.append(f"{rec.id}\t{rec.context or ''}\t{rec.response}")
        atomic_write_text(path, "\n".join(lines) + "\n")
    else:
        raise ValueError(f"unknown corpus format: {format!r} (expected 'jsonl' or 'tsv')")


# ---------------------------------------------------------------------------
# embedding matrices


def read_embeddings(path: str | os.PathLike[str]) -> EmbeddingMatrix:
    """Read an embedding matrix.

    Files starting with the ``SEMB`` magic are parsed as binary: magic,
    u32 version (must be 1), u64 rows, u64 dims, then rows*dims float32
    values, all little-endian. Anything else is treated as plain text with
    one whitespace-separated row of floats per line.
    """
    p = Path(path)
    if not p.is_file():
        raise DataError(f"no such embedding file: {p}")
    buf = p.read_bytes()
    if buf[:4] == _SEMB_MAGIC:
        return _parse_semb(p, buf)
    return _parse_text_embeddings(p, buf)


def _parse_semb(p: Path, buf: bytes) -> EmbeddingMatrix:
    header_size = 4 + _SEMB_HEADER.size
    if len(buf) < header_size:
        raise DataError(f"{p}: truncated SEMB header ({len(buf)} bytes)")
    version, rows, dims = _SEMB_HEADER.unpack_from(buf, 4)
    if version != _SEMB_VERSION:
        raise DataError(f"{p}: unsupported SEMB version {version} (expected {_SEMB_VERSION})")
    expected = header_size + rows * dims * 4
    if len(buf) != expected:
        raise DataError(
            f"{p}: payload size mismatch for {rows}x{dims} float32 matrix: "
            f"expected {expected} bytes, file has {len(buf)}"
        )
    data = np.frombuffer(buf, dtype="<f4", count=rows * dims, offset=header_size)
    data = data.reshape(rows, dims)
    finite = np.isfinite(data)
    if not finite.all():
        bad = np.argwhere(~finite)[0]
        raise DataError(f"{p}: non-finite value at row {bad[0]}, column {bad[1]}")
    return EmbeddingMatrix(data)


def _parse_text_embeddings(p: Path, buf: bytes) -> EmbeddingMatrix:
    try:
        text = buf.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DataError(f"{p}: not a SEMB file (bad magic) and not UTF-8 text") from exc
    rows: list[list[float]] = []
    width: int | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        try:
            values = [float(v) for v in parts]
        except ValueError as exc:
            raise DataError(f"{p}:{lineno}: unparseable float: {exc}") from exc
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise DataError(f"{p}:{lineno}: expected {width} columns, got {len(values)}")
        rows.append(values)
    if not rows:
        raise DataError(f"{p}: empty embedding text file")
    data = np.array(rows, dtype=np.float32)
    finite = np.isfinite(data)
    if not finite.all():
        bad = np.argwhere(~finite)[0]
        raise DataError(f"{p}: non-finite value at row {bad[0]}, column {bad[1]}")
    return EmbeddingMatrix(data)


def write_embeddings(matrix: EmbeddingMatrix | np.ndarray, path: str | os.PathLike[str]) -> None:
    """Write ``matrix`` in the SEMB binary format (atomic replace)."""
    if isinstance(matrix, EmbeddingMatrix):
        data = matrix.data
    else:
        data = np.asarray(matrix, dtype=np.float32)
        if data.ndim != 2:
            raise ValueError(f"embedding matrix must be 2-D, got shape {data.shape}")
        if not np.isfinite(data).all():
            raise ValueError("refusing to write non-finite embedding values")
    rows, dims = data.shape
    payload = _SEMB_MAGIC + _SEMB_HEADER.pack(_SEMB_VERSION, rows, dims)
    payload += np.ascontiguousarray(data, dtype="<f4").tobytes()
    atomic_write_bytes(path, payload)
