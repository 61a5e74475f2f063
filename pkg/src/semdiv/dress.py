"""Focal training weights over cluster frequencies.

Each training response is down-weighted by how crowded its semantic cluster
is: w = (1 - p)^gamma where p is the empirical probability of the
response's cluster. Rare clusters keep weight near 1, dominant clusters
collapse toward 0, and gamma controls how hard the head is suppressed.
Optionally, generated responses that land in "head" clusters are flagged
for negative training with weight -1.
"""

from __future__ import annotations

import json
import os
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .clustering import ClusterAssignment, SemanticDistribution
from .corpus_io import ResponseCorpus, atomic_write_text
from .errors import DataError

__all__ = [
    "WeightEntry",
    "WeightTable",
    "HeadClusters",
    "focal_weight",
    "compute_weights",
    "head_clusters",
    "apply_nt_flags",
    "renormalized_weights",
    "write_weight_table",
    "read_weight_table",
]

_MIN_POSITIVE = sys.float_info.min


@dataclass(frozen=True)
class WeightEntry:
    """One training example's weight: its id, assigned cluster, the weight
    itself, and whether it is a negative-training entry."""

    id: str
    cluster: int
    weight: float
    nt: bool = False

    def __post_init__(self) -> None:
        if self.cluster < 0:
            raise ValueError(f"cluster index must be >= 0, got {self.cluster}")
        if self.nt:
            if self.weight != -1.0:
                raise ValueError(f"negative-training entries must weigh -1, got {self.weight}")
        elif not 0.0 < self.weight <= 1.0:
            raise ValueError(f"weight must lie in (0, 1], got {self.weight}")


@dataclass(frozen=True)
class WeightTable:
    """Weights for a whole corpus, in corpus order."""

    entries: tuple[WeightEntry, ...]
    gamma: float
    k: int

    def __post_init__(self) -> None:
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if any(e.cluster >= self.k for e in self.entries):
            raise ValueError(f"entry cluster index out of range for k={self.k}")

    def __len__(self) -> int:
        return len(self.entries)

    def weights(self) -> np.ndarray:
        return np.array([e.weight for e in self.entries], dtype=np.float64)


@dataclass(frozen=True)
class HeadClusters:
    """The cluster indices considered dominant under some policy."""

    clusters: frozenset[int]
    policy: str

    def __post_init__(self) -> None:
        if self.policy not in ("above_uniform", "top_m"):
            raise ValueError(f"unknown head policy: {self.policy!r}")
        if any(c < 0 for c in self.clusters):
            raise ValueError("cluster indices must be >= 0")


def focal_weight(p: float, gamma: float) -> float:
    """(1 - p)^gamma for p in [0, 1] and gamma >= 0.

    p = 0 gives 1.0 for any gamma; gamma = 0 gives 1.0 for any p.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {p}")
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    return (1.0 - p) ** gamma


def compute_weights(
    corpus: ResponseCorpus,
    labels: ClusterAssignment | Sequence[int] | np.ndarray,
    dist: SemanticDistribution,
    gamma: float = 30.0,
) -> WeightTable:
    """Focal weight for every record in ``corpus``, keyed by the record's
    cluster probability under ``dist``.

    A weight that underflows to zero (cluster probability at or near 1 with
    a large gamma) is clamped to the smallest positive float so the
    monotone ordering over clusters survives; a warning reports how many
    entries were clamped.
    """
    lab = labels.labels if isinstance(labels, ClusterAssignment) else np.asarray(labels, dtype=np.int64)
    if lab.ndim != 1 or lab.size != len(corpus):
        raise ValueError(f"got {lab.size} labels for {len(corpus)} records")
    if lab.size and (lab.min() < 0 or lab.max() >= dist.k):
        raise ValueError(f"labels must lie in [0, {dist.k})")

    probs = dist.probs
    clamped = 0
    entries = []
    for record, cluster in zip(corpus, lab.tolist()):
        w = focal_weight(float(probs[cluster]), gamma)
        if w < _MIN_POSITIVE:
            w = _MIN_POSITIVE
            clamped += 1
        entries.append(WeightEntry(id=record.id, cluster=cluster, weight=w))
    if clamped:
        warnings.warn(
            f"{clamped} focal weight(s) underflowed to 0 and were clamped to "
            f"the smallest positive float ({_MIN_POSITIVE:.3e})",
            RuntimeWarning,
            stacklevel=2,
        )
    return WeightTable(entries=tuple(entries), gamma=gamma, k=dist.k)


def head_clusters(
    dist: SemanticDistribution,
    policy: str = "above_uniform",
    m: int | None = None,
) -> HeadClusters:
    """Pick the dominant clusters of ``dist``.

    "above_uniform" takes every cluster with probability strictly greater
    than 1/k; "top_m" takes the ``m`` most probable clusters, breaking
    probability ties toward the lower index.
    """
    probs = dist.probs
    if policy == "above_uniform":
        if m is not None:
            raise ValueError("m only applies to the top_m policy")
        chosen = np.flatnonzero(probs > 1.0 / dist.k)
    elif policy == "top_m":
        if m is None:
            raise ValueError("the top_m policy requires m")
        if not 1 <= m <= dist.k:
            raise ValueError(f"m must lie in [1, k={dist.k}], got {m}")
        order = np.argsort(-probs, kind="stable")
        chosen = order[:m]
    else:
        raise ValueError(f"unknown head policy: {policy!r}")
    return HeadClusters(clusters=frozenset(int(c) for c in chosen), policy=policy)


def apply_nt_flags(
    weights: WeightTable,
    generated_labels: ClusterAssignment | Sequence[int] | np.ndarray,
    heads: HeadClusters,
) -> WeightTable:
    """Mark entries whose generated response fell in a head cluster for
    negative training.

    ``generated_labels`` aligns one-to-one with the table. A flagged entry
    describes the generated sample: its cluster becomes the generated
    label and its weight -1. Other entries pass through unchanged.
    """
    gen = (
        generated_labels.labels
        if isinstance(generated_labels, ClusterAssignment)
        else np.asarray(generated_labels, dtype=np.int64)
    )
    if gen.ndim != 1 or gen.size != len(weights.entries):
        raise ValueError(f"got {gen.size} generated labels for {len(weights.entries)} entries")
    if gen.size and (gen.min() < 0 or gen.max() >= weights.k):
        raise ValueError(f"generated labels must lie in [0, {weights.k})")

    entries = []
    for entry, label in zip(weights.entries, gen.tolist()):
        if label in heads.clusters:
            entries.append(WeightEntry(id=entry.id, cluster=label, weight=-1.0, nt=True))
        else:
            entries.append(entry)
    return WeightTable(entries=tuple(entries), gamma=weights.gamma, k=weights.k)


def renormalized_weights(weights: WeightTable) -> np.ndarray:
    """Positive weights rescaled to mean 1 (negative-training entries are
    left untouched). Useful when a downstream trainer expects the batch
    loss scale of unweighted training."""
    values = weights.weights()
    positive = values > 0
    if positive.any():
        values[positive] /= values[positive].mean()
    return values


def write_weight_table(weights: WeightTable, path: str | os.PathLike[str], renormalize: bool = False) -> None:
    """Write the table as JSONL, one entry per line in corpus order.

    Floats are rendered with 17 significant digits so a read-back
    reproduces every weight bit for bit. With ``renormalize``, positive
    weights are rescaled to mean 1 in the serialized file only; the table
    itself is never mutated.
    """
    values = renormalized_weights(weights) if renormalize else weights.weights()
    lines = []
    for e, value in zip(weights.entries, values.tolist()):
        lines.append(
            '{"id": %s, "cluster": %d, "weight": %s, "nt": %s}'
            % (json.dumps(e.id, ensure_ascii=False), e.cluster, format(value, ".17g"), "true" if e.nt else "false")
        )
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_weight_table(path: str | os.PathLike[str], gamma: float = 0.0, k: int | None = None) -> WeightTable:
    """Read a JSONL weight table written by write_weight_table.

    The file does not store gamma or k, so callers may pass them; k
    defaults to one past the largest cluster index found.
    """
    p = Path(path)
    if not p.is_file():
        raise DataError(f"no such weight file: {p}")
    entries = []
    with open(p, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{p}:{lineno}: invalid JSON: {exc.msg}") from exc
            try:
                entry = WeightEntry(
                    id=obj["id"], cluster=obj["cluster"], weight=obj["weight"], nt=obj["nt"]
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{p}:{lineno}: bad weight entry: {exc}") from exc
            entries.append(entry)
    if not entries:
        raise DataError(f"{p}: empty weight file")
    if k is None:
        k = max(e.cluster for e in entries) + 1
    return WeightTable(entries=tuple(entries), gamma=gamma, k=k)
