import math
from collections import Counter

import numpy as np
import pytest

from semdiv import (
    build_vocab_counts,
    dist_n,
    ent_n,
    lexical_report,
    low_frequency,
    tokenize,
)


def _naive_dist_n(responses, n):
    """Independent route: pool n-grams with plain loops and sets."""
    seen = set()
    total = 0
    for text in responses:
        toks = list(tokenize(text))
        for i in range(len(toks) - n + 1):
            gram = tuple(toks[i : i + n])
            seen.add(gram)
            total += 1
    return len(seen) / total if total else 0.0


def _naive_ent_n(responses, n):
    counts = Counter()
    for text in responses:
        toks = list(tokenize(text))
        for i in range(len(toks) - n + 1):
            counts[tuple(toks[i : i + n])] += 1
    total = sum(counts.values())
    if not total:
        return 0.0
    return -sum((c / total) * math.log2(c / total) for c in counts.values())


class TestDistN:
    def test_two_response_unigram_fixture(self):
        # "a b" and "a c" pool to 4 unigram slots, 3 distinct
        assert dist_n(["a b", "a c"], 1) == 0.75

    def test_trigram_all_unique(self):
        assert dist_n(["a b c", "a b d"], 3) == 1.0

    def test_too_short_for_bigrams(self):
        assert dist_n(["x"], 2) == 0.0

    def test_empty_corpus(self):
        assert dist_n([], 1) == 0.0

    def test_pooled_across_responses(self):
        # same response twice: distinct unchanged, total doubles
        assert dist_n(["a b", "a b"], 1) == 0.5

    def test_matches_naive_route_random_corpora(self):
        rng = np.random.default_rng(7)
        vocab = ["cat", "dog", "sat", "mat", "the", "on"]
        for _ in range(50):
            corpus = [
                " ".join(rng.choice(vocab, size=rng.integers(1, 9)))
                for _ in range(rng.integers(1, 6))
            ]
            for n in (1, 2, 3):
                assert dist_n(corpus, n) == _naive_dist_n(corpus, n)

    def test_unity_iff_all_unique(self):
        rng = np.random.default_rng(13)
        vocab = [f"w{i}" for i in range(12)]
        for _ in range(100):
            corpus = [
                " ".join(rng.choice(vocab, size=rng.integers(2, 7)))
                for _ in range(rng.integers(1, 4))
            ]
            grams = Counter()
            for text in corpus:
                toks = list(tokenize(text))
                for i in range(len(toks) - 1):
                    grams[(toks[i], toks[i + 1])] += 1
            expect = 1.0 if grams and max(grams.values()) == 1 else dist_n(corpus, 2)
            assert dist_n(corpus, 2) == expect
            if grams and max(grams.values()) > 1:
                assert dist_n(corpus, 2) < 1.0


class TestEntN:
    def test_hand_fixture_half_quarter_quarter(self):
        # counts {a: 2, b: 1, c: 1} -> 1.5 bits
        assert ent_n(["a a b c"], 1) == 1.5

    def test_single_distinct_gram_is_zero(self):
        value = ent_n(["x x x"], 1)
        assert value == 0.0
        assert math.copysign(1.0, value) == 1.0  # never -0.0

    def test_empty_is_zero(self):
        assert ent_n([], 1) == 0.0

    def test_uniform_hits_log2(self):
        assert ent_n(["a b c d"], 1) == pytest.approx(2.0, abs=1e-12)

    def test_bounded_by_log2_distinct(self):
        rng = np.random.default_rng(3)
        vocab = ["a", "b", "c", "d", "e"]
        for _ in range(100):
            corpus = [
                " ".join(rng.choice(vocab, size=rng.integers(1, 10)))
                for _ in range(rng.integers(1, 5))
            ]
            pooled = Counter()
            for text in corpus:
                pooled.update(extracted for extracted in tokenize(text))
            if not pooled:
                continue
            assert ent_n(corpus, 1) <= math.log2(len(pooled)) + 1e-12

    def test_matches_naive_route(self):
        rng = np.random.default_rng(23)
        vocab = ["u", "v", "w", "x"]
        for _ in range(50):
            corpus = [
                " ".join(rng.choice(vocab, size=rng.integers(1, 8)))
                for _ in range(rng.integers(1, 5))
            ]
            for n in (1, 2):
                assert ent_n(corpus, n) == pytest.approx(
                    _naive_ent_n(corpus, n), abs=1e-12
                )

    def test_order_independent(self):
        corpus = ["a b c a", "b c c d", "d d a b"]
        assert ent_n(corpus, 1) == ent_n(list(reversed(corpus)), 1)


class TestLowFrequency:
    def test_hand_fixture_one_third(self):
        train = {"the": 500, "cat": 50}
        assert low_frequency(["the cat the"], train, threshold=100) == pytest.approx(
            1 / 3
        )

    def test_absent_token_counts_as_zero(self):
        assert low_frequency(["zzz"], {"a": 1000}, threshold=100) == 1.0

    def test_strict_inequality_at_threshold(self):
        train = {"a": 100, "b": 99}
        assert low_frequency(["a b"], train, threshold=100) == 0.5

    def test_empty_generated(self):
        assert low_frequency([], {"a": 1}, threshold=100) == 0.0

    def test_threshold_validation(self):
        with pytest.raises(ValueError):
            low_frequency(["a"], {}, threshold=0)

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(5)
        vocab = [f"t{i}" for i in range(8)]
        train = {w: int(rng.integers(0, 300)) for w in vocab}
        corpus = [" ".join(rng.choice(vocab, size=6)) for _ in range(4)]
        values = [
            low_frequency(corpus, train, threshold=t) for t in (1, 10, 50, 150, 400)
        ]
        assert all(a <= b for a, b in zip(values, values[1:]))

    def test_accepts_vocab_counts(self):
        counts = build_vocab_counts(["the cat sat"])
        assert low_frequency(["the dog"], counts, threshold=2) == 1.0


class TestBuildVocabCounts:
    def test_hand_fixture(self):
        counts = build_vocab_counts(["a a b"])
        assert dict(counts.counts) == {"a": 2, "b": 1}
        assert counts.total == 3

    def test_pools_across_responses(self):
        counts = build_vocab_counts(["a b", "b c"])
        assert dict(counts.counts) == {"a": 1, "b": 2, "c": 1}

    def test_empty(self):
        counts = build_vocab_counts([])
        assert counts.total == 0


class TestLexicalReport:
    def test_keys_track_requested_orders(self):
        report = lexical_report(["a b c", "b c d"], ns=(1, 2))
        assert set(report.dist) == {1, 2}
        assert set(report.ent) == {1, 2}

    def test_values_match_standalone_functions(self):
        corpus = ["the cat sat", "the dog sat", "a cat ran"]
        report = lexical_report(corpus, ns=(1, 2, 3))
        for n in (1, 2, 3):
            assert report.dist[n] == dist_n(corpus, n)
            assert report.ent[n] == ent_n(corpus, n)

    def test_lf_none_without_train_counts(self):
        assert lexical_report(["a"], ns=(1,)).lf is None

    def test_lf_present_with_train_counts(self):
        report = lexical_report(
            ["the cat the"], ns=(1,), train_counts={"the": 500, "cat": 50}
        )
        assert report.lf == pytest.approx(1 / 3)

    def test_duplicate_orders_rejected(self):
        with pytest.raises(ValueError):
            lexical_report(["a"], ns=(1, 1))
