"""Pairwise preference analysis.

Converts likert-scored A/B comparisons into win counts, fits Bradley-Terry
strengths by minorization-maximization, and correlates fitted strengths
(or any paired score vectors) with Pearson and Spearman coefficients,
including two-sided p-values from the t approximation.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import stdtr

from .errors import DataError

__all__ = [
    "PairwiseAnnotation",
    "OutcomeCounts",
    "BTScores",
    "CorrelationResult",
    "read_annotations",
    "likert_to_outcomes",
    "bt_fit",
    "bt_prob",
    "pearson",
    "spearman",
]


@dataclass(frozen=True)
class PairwiseAnnotation:
    """One likert judgment comparing item_a against item_b: 5 means a
    clear win for A, 1 a clear win for B, 3 a tie."""

    item_a: str
    item_b: str
    likert: int

    def __post_init__(self) -> None:
        if self.item_a == self.item_b:
            raise ValueError(f"an item cannot be compared with itself: {self.item_a!r}")
        if self.likert not in (1, 2, 3, 4, 5):
            raise ValueError(f"likert score must be an integer in 1..5, got {self.likert!r}")


@dataclass(frozen=True)
class OutcomeCounts:
    """Aggregated (possibly fractional) win counts per ordered item pair."""

    wins: dict[tuple[str, str], float]
    items: frozenset[str]

    def __post_init__(self) -> None:
        if any(c < 0 for c in self.wins.values()):
            raise ValueError("win counts must be non-negative")
        for a, b in self.wins:
            if a not in self.items or b not in self.items:
                raise ValueError(f"pair ({a!r}, {b!r}) references an unknown item")


@dataclass(frozen=True)
class BTScores:
    """Fitted Bradley-Terry log-strengths, centered to sum to zero."""

    theta: dict[str, float]
    iterations: int = 0
    converged: bool = True
    loglik_history: tuple[float, ...] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.theta and abs(math.fsum(self.theta.values())) > 1e-9:
            raise ValueError("theta must be centered to sum to zero")


@dataclass(frozen=True)
class CorrelationResult:
    """A correlation coefficient with its two-sided p-value and sample
    size."""

    coefficient: float
    p_value: float
    n: int

    def __post_init__(self) -> None:
        if not -1.0 <= self.coefficient <= 1.0:
            raise ValueError(f"coefficient {self.coefficient} outside [-1, 1]")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")
        if self.n < 3:
            raise ValueError(f"need n >= 3 for a defined p-value, got n={self.n}")


def read_annotations(path: str | os.PathLike[str]) -> list[PairwiseAnnotation]:
    """Read JSONL annotations with fields "a", "b", and "likert"."""
    p = Path(path)
    if not p.is_file():
        raise DataError(f"no such annotations file: {p}")
    annotations: list[PairwiseAnnotation] = []
    with open(p, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{p}:{lineno}: invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict) or not {"a", "b", "likert"} <= obj.keys():
                raise DataError(f"{p}:{lineno}: expected an object with fields 'a', 'b', 'likert'")
            a, b, likert = obj["a"], obj["b"], obj["likert"]
            if not isinstance(a, str) or not isinstance(b, str):
                raise DataError(f"{p}:{lineno}: 'a' and 'b' must be strings")
            if not isinstance(likert, int) or isinstance(likert, bool):
                raise DataError(f"{p}:{lineno}: 'likert' must be an integer")
            try:
                annotations.append(PairwiseAnnotation(item_a=a, item_b=b, likert=likert))
            except ValueError as exc:
                raise DataError(f"{p}:{lineno}: {exc}") from exc
    if not annotations:
        raise DataError(f"{p}: no annotations")
    return annotations


def likert_to_outcomes(annotations: Iterable[PairwiseAnnotation], ties: str = "half") -> OutcomeCounts:
    """Convert likert judgments to win counts: scores above 3 credit a win
    to item A, below 3 to item B. A score of exactly 3 either grants half
    a win to each side (ties="half") or is discarded (ties="drop")."""
    if ties not in ("half", "drop"):
        raise ValueError(f"ties must be 'half' or 'drop', got {ties!r}")
    wins: defaultdict[tuple[str, str], float] = defaultdict(float)
    items: set[str] = set()
    for ann in annotations:
        items.update((ann.item_a, ann.item_b))
        if ann.likert > 3:
            wins[(ann.item_a, ann.item_b)] += 1.0
        elif ann.likert < 3:
            wins[(ann.item_b, ann.item_a)] += 1.0
        elif ties == "half":
            wins[(ann.item_a, ann.item_b)] += 0.5
            wins[(ann.item_b, ann.item_a)] += 0.5
    return OutcomeCounts(wins=dict(wins), items=frozenset(items))


def _connected_components(n: int, adjacency: np.ndarray) -> list[list[int]]:
    seen = [False] * n
    components = []
    for start in range(n):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        comp = []
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in np.flatnonzero(adjacency[u]).tolist():
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        components.append(sorted(comp))
    return components


def bt_fit(
    outcomes: OutcomeCounts,
    max_iter: int = 10000,
    tol: float = 1e-10,
    record_history: bool = False,
) -> BTScores:
    """Fit Bradley-Terry log-strengths by minorization-maximization.

    Each iteration sets strength_i to wins_i / sum_j n_ij / (pi_i + pi_j)
    and recenters in log space; the log-likelihood never decreases.
    Stops when the largest theta change falls below ``tol``. The
    comparison graph must be connected, and no item may win or lose every
    comparison it appears in (the MLE diverges; both cases raise
    DataError naming an offending item).
    """
    items = sorted(outcomes.items)
    n = len(items)
    if n < 2:
        raise DataError("need at least two items with comparisons")
    index = {item: i for i, item in enumerate(items)}

    wins_mat = np.zeros((n, n))
    for (a, b), count in outcomes.wins.items():
        wins_mat[index[a], index[b]] += count

    totals = wins_mat + wins_mat.T
    components = _connected_components(n, totals > 0)
    if len(components) > 1:
        names = [[items[i] for i in comp[:3]] for comp in components]
        raise DataError(f"comparison graph is disconnected; components start with {names}")

    win_totals = wins_mat.sum(axis=1)
    loss_totals = wins_mat.sum(axis=0)
    for i in range(n):
        if win_totals[i] == 0.0:
            raise DataError(f"item {items[i]!r} lost every comparison; its strength diverges to -inf")
        if loss_totals[i] == 0.0:
            raise DataError(f"item {items[i]!r} won every comparison; its strength diverges to +inf")

    theta = np.zeros(n)
    pi = np.ones(n)
    history: list[float] = []
    iterations = 0
    converged = False
    for _ in range(max_iter):
        iterations += 1
        denom = (totals / (pi[:, None] + pi[None, :])).sum(axis=1)
        pi_new = win_totals / denom
        theta_new = np.log(pi_new)
        theta_new -= theta_new.mean()
        if record_history:
            history.append(_loglik(theta_new, wins_mat))
        delta = float(np.abs(theta_new - theta).max())
        theta = theta_new
        pi = np.exp(theta)
        if delta < tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"Bradley-Terry fit did not reach tol={tol} within {max_iter} iterations",
            RuntimeWarning,
            stacklevel=2,
        )

    centered = theta - theta.mean()
    return BTScores(
        theta={item: float(centered[i]) for i, item in enumerate(items)},
        iterations=iterations,
        converged=converged,
        loglik_history=tuple(history) if record_history else None,
    )


def _loglik(theta: np.ndarray, wins_mat: np.ndarray) -> float:
    diff = theta[:, None] - theta[None, :]
    log_p = -np.logaddexp(0.0, -diff)
    return float((wins_mat * log_p).sum())


def bt_prob(theta_i: float, theta_j: float) -> float:
    """Probability that item i beats item j under Bradley-Terry."""
    d = theta_i - theta_j
    if d >= 0:
        return 1.0 / (1.0 + math.exp(-d))
    e = math.exp(d)
    return e / (1.0 + e)


def _t_p_value(r: float, n: int) -> float:
    df = n - 2
    denom = 1.0 - r * r
    if denom <= 0.0:
        return 0.0
    t = abs(r) * math.sqrt(df / denom)
    return float(min(max(2.0 * stdtr(df, -t), 0.0), 1.0))


def _validate_paired(x: Sequence[float] | np.ndarray, y: Sequence[float] | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.ndim != 1 or ya.ndim != 1 or xa.size != ya.size:
        raise ValueError("inputs must be 1-D sequences of equal length")
    if xa.size < 3:
        raise ValueError(f"need at least 3 paired observations, got {xa.size}")
    if not (np.isfinite(xa).all() and np.isfinite(ya).all()):
        raise ValueError("inputs must be finite")
    return xa, ya


def pearson(x: Sequence[float] | np.ndarray, y: Sequence[float] | np.ndarray) -> CorrelationResult:
    """Pearson correlation with a two-sided p-value from the exact t
    transform t = r * sqrt((n-2) / (1-r^2))."""
    xa, ya = _validate_paired(x, y)
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("correlation is undefined for a constant input")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    r = min(max(r, -1.0), 1.0)
    return CorrelationResult(coefficient=r, p_value=_t_p_value(r, xa.size), n=int(xa.size))


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Fractional ranks starting at 1; tied values share the mean of the
    ranks they span."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x: Sequence[float] | np.ndarray, y: Sequence[float] | np.ndarray) -> CorrelationResult:
    """Spearman rank correlation: Pearson over average fractional ranks,
    with the same t-based p-value."""
    xa, ya = _validate_paired(x, y)
    return pearson(_average_ranks(xa), _average_ranks(ya))
