"""Surface-level diversity metrics over response corpora.

Three families, all computed on pooled n-grams across every response:

* Dist-n: distinct n-grams divided by total n-grams,
* Ent-n: Shannon entropy (base 2) of the pooled n-gram frequency
  distribution,
* low-frequency rate: fraction of generated unigram tokens that are rare in
  a reference training corpus.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

from .corpus_io import ResponseCorpus, extract_ngrams, tokenize

Corpus = ResponseCorpus | Iterable[str]

__all__ = [
    "VocabCounts",
    "LexicalReport",
    "build_vocab_counts",
    "dist_n",
    "ent_n",
    "low_frequency",
    "lexical_report",
]


@dataclass(frozen=True)
class VocabCounts:
    """Unigram token counts for a (typically training) corpus."""

    counts: Mapping[str, int]
    total: int

    def __post_init__(self) -> None:
        if any(c < 0 for c in self.counts.values()):
            raise ValueError("token counts must be non-negative")
        if self.total != sum(self.counts.values()):
            raise ValueError("total does not match the sum of counts")


@dataclass(frozen=True)
class LexicalReport:
    """Per-order Dist-n and Ent-n values plus an optional low-frequency
    rate (None when no reference counts were supplied)."""

    dist: Mapping[int, float]
    ent: Mapping[int, float]
    lf: float | None

    def __post_init__(self) -> None:
        for n, v in self.dist.items():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"dist-{n} out of [0, 1]: {v}")
        for n, v in self.ent.items():
            if v < 0.0:
                raise ValueError(f"ent-{n} negative: {v}")
        if self.lf is not None and not 0.0 <= self.lf <= 1.0:
            raise ValueError(f"low-frequency rate out of [0, 1]: {self.lf}")


def _iter_texts(corpus: Corpus) -> Iterable[str]:
    """Yield response text from either a ResponseCorpus or raw strings."""
    for item in corpus:
        yield item if isinstance(item, str) else item.response


def build_vocab_counts(corpus: Corpus) -> VocabCounts:
    """Pool unigram token counts over every response in ``corpus``."""
    counts: Counter[str] = Counter()
    for text in _iter_texts(corpus):
        counts.update(tokenize(text))
    return VocabCounts(counts=dict(counts), total=sum(counts.values()))


def _pooled_ngrams(corpus: Corpus, n: int) -> Counter[str]:
    pooled: Counter[str] = Counter()
    for text in _iter_texts(corpus):
        pooled.update(extract_ngrams(tokenize(text), n))
    return pooled


def dist_n(corpus: Corpus, n: int) -> float:
    """Distinct pooled n-grams over total pooled n-grams; 0.0 when the
    corpus yields no n-grams at all."""
    pooled = _pooled_ngrams(corpus, n)
    total = sum(pooled.values())
    if total == 0:
        return 0.0
    return len(pooled) / total


def ent_n(corpus: Corpus, n: int) -> float:
    """Base-2 Shannon entropy of the pooled n-gram frequency distribution.

    Uses math.fsum so the result does not depend on summation order; a
    corpus with no n-grams scores 0.0.
    """
    pooled = _pooled_ngrams(corpus, n)
    total = sum(pooled.values())
    if total == 0:
        return 0.0
    terms = [-(c / total) * math.log2(c / total) for c in pooled.values()]
    return max(0.0, math.fsum(terms))


def low_frequency(
    generated: Corpus,
    train_counts: VocabCounts | Mapping[str, int],
    threshold: int = 100,
) -> float:
    """Fraction of generated unigram tokens whose count in ``train_counts``
    is strictly below ``threshold`` (absent tokens count as 0). Returns 0.0
    for a corpus with no tokens."""
    if threshold < 1:
        raise ValueError(f"threshold must be >= 1, got {threshold}")
    counts = train_counts.counts if isinstance(train_counts, VocabCounts) else train_counts
    rare = 0
    total = 0
    for text in _iter_texts(generated):
        for token in tokenize(text):
            total += 1
            if counts.get(token, 0) < threshold:
                rare += 1
    if total == 0:
        return 0.0
    return rare / total


def lexical_report(
    corpus: Corpus,
    ns: tuple[int, ...] = (1, 2, 3),
    train_counts: VocabCounts | Mapping[str, int] | None = None,
    threshold: int = 100,
) -> LexicalReport:
    """Compute Dist-n and Ent-n for each order in ``ns``, plus the
    low-frequency rate when reference counts are given."""
    if not ns:
        raise ValueError("ns must list at least one n-gram order")
    if len(set(ns)) != len(ns):
        raise ValueError(f"duplicate n-gram orders in {ns}")
    if not isinstance(corpus, ResponseCorpus):
        corpus = list(corpus)
    dist = {n: dist_n(corpus, n) for n in ns}
    ent = {n: ent_n(corpus, n) for n in ns}
    lf = None if train_counts is None else low_frequency(corpus, train_counts, threshold)
    return LexicalReport(dist=dist, ent=ent, lf=lf)
