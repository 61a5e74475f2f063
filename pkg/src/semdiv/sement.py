"""Cluster-entropy diversity score.

A response set is scored by the Shannon entropy (natural log) of its
empirical cluster distribution: 0 when every response lands in one cluster,
ln k when responses spread uniformly over all k clusters. The normalized
variant divides by ln k so scores computed at different k can be compared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .clustering import SemanticDistribution

__all__ = ["SemEntScore", "sem_ent", "compare_sement"]


@dataclass(frozen=True)
class SemEntScore:
    """Entropy of a cluster distribution, with its k and the ln-k
    normalized value."""

    value: float
    k: int
    normalized: float

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        limit = math.log(self.k) if self.k > 1 else 0.0
        if not 0.0 <= self.value <= limit + 1e-9:
            raise ValueError(f"entropy {self.value} outside [0, ln {self.k}]")
        if not 0.0 <= self.normalized <= 1.0:
            raise ValueError(f"normalized entropy {self.normalized} outside [0, 1]")


def sem_ent(dist: SemanticDistribution) -> SemEntScore:
    """Shannon entropy (nats) of ``dist``.

    Zero-probability clusters contribute nothing; summation uses math.fsum
    so the result is independent of cluster order, which also makes the
    score invariant under permutations of the cluster indexing.
    """
    probs = dist.probs
    terms = [-(p * math.log(p)) for p in probs.tolist() if p > 0.0]
    value = max(0.0, math.fsum(terms))
    k = dist.k
    if k == 1:
        normalized = 0.0
    else:
        normalized = min(max(value / math.log(k), 0.0), 1.0)
    return SemEntScore(value=value, k=k, normalized=normalized)


def compare_sement(a: SemEntScore, b: SemEntScore) -> int:
    """Order two scores: raw entropy when both use the same k, normalized
    entropy otherwise. Returns -1, 0, or 1."""
    if a.k == b.k:
        x, y = a.value, b.value
    else:
        x, y = a.normalized, b.normalized
    return (x > y) - (x < y)
