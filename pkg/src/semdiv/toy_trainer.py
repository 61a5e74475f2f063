"""A small tabular trainer for studying diversity-aware reweighting.

The model is a table of logits over M response templates for each of C
contexts, trained by full-batch gradient descent on a weighted
negative-log-likelihood. Because every template belongs to a known
cluster, the semantic spread of greedy generations can be measured exactly
after every epoch, which makes the effect of focal reweighting and
negative training directly observable without any neural machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .clustering import SemanticDistribution, semantic_distribution
from .dress import _MIN_POSITIVE, HeadClusters, WeightTable, head_clusters
from .sement import SemEntScore, sem_ent

__all__ = [
    "ToyWorld",
    "ToyDataset",
    "ToyModel",
    "TrainConfig",
    "TrainHistory",
    "make_world",
    "make_synthetic_dataset",
    "weighted_nll",
    "grad_weighted_nll",
    "train",
    "evaluate_generations",
    "head_mass",
]

DEFAULT_SCENARIO = {
    "num_contexts": 50,
    "num_templates": 40,
    "k": 8,
    "skew": 1.5,
    "size": 150,
    "epochs": 200,
    "lr": 0.5,
}


@dataclass(frozen=True)
class ToyWorld:
    """The fixed universe: C contexts, M templates, and each template's
    cluster."""

    num_contexts: int
    num_templates: int
    template_cluster: np.ndarray
    k: int

    def __post_init__(self) -> None:
        if self.num_contexts < 1 or self.num_templates < 1:
            raise ValueError("need at least one context and one template")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        arr = np.asarray(self.template_cluster, dtype=np.int64)
        if arr.shape != (self.num_templates,):
            raise ValueError(f"template_cluster must have shape ({self.num_templates},)")
        if arr.size and (arr.min() < 0 or arr.max() >= self.k):
            raise ValueError(f"template clusters must lie in [0, {self.k})")
        if arr.flags.writeable:
            arr = arr.copy()
            arr.setflags(write=False)
        object.__setattr__(self, "template_cluster", arr)


@dataclass(frozen=True)
class ToyDataset:
    """Sampled (context, template) training pairs with each pair's cluster
    label and the empirical cluster distribution of the whole set."""

    contexts: np.ndarray
    templates: np.ndarray
    labels: np.ndarray
    dist: SemanticDistribution

    def __post_init__(self) -> None:
        for name in ("contexts", "templates", "labels"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            if arr.ndim != 1:
                raise ValueError(f"{name} must be 1-D")
            if arr.flags.writeable:
                arr = arr.copy()
                arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (len(self.contexts) == len(self.templates) == len(self.labels)):
            raise ValueError("contexts, templates, and labels must have equal length")
        if len(self.contexts) == 0:
            raise ValueError("dataset must contain at least one pair")

    def __len__(self) -> int:
        return int(self.contexts.size)


@dataclass(frozen=True)
class ToyModel:
    """The trained logit table, one row per context."""

    logits: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.logits, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("logits must be 2-D (contexts x templates)")
        if not np.isfinite(arr).all():
            raise ValueError("logits must be finite")
        if arr.flags.writeable:
            arr = arr.copy()
            arr.setflags(write=False)
        object.__setattr__(self, "logits", arr)


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and reweighting settings.

    gamma = 0 with nt_enabled = False reduces to plain NLL training.
    """

    epochs: int = 200
    lr: float = 0.5
    gamma: float = 0.0
    nt_enabled: bool = False
    head_policy: str = "above_uniform"
    top_m: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not self.lr > 0 or not np.isfinite(self.lr):
            raise ValueError(f"lr must be positive and finite, got {self.lr}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        if self.head_policy not in ("above_uniform", "top_m"):
            raise ValueError(f"unknown head policy: {self.head_policy!r}")


@dataclass(frozen=True)
class TrainHistory:
    """Per-epoch trace, each value measured at the start of the epoch
    (before that epoch's update): training loss, entropy of the greedy
    generations' cluster distribution, and the fraction of greedy
    generations in head clusters."""

    loss: tuple[float, ...]
    sem_ent: tuple[float, ...]
    head_mass: tuple[float, ...]

    def __post_init__(self) -> None:
        if not (len(self.loss) == len(self.sem_ent) == len(self.head_mass)):
            raise ValueError("history columns must have equal length")

    def __len__(self) -> int:
        return len(self.loss)


def make_world(num_contexts: int, num_templates: int, k: int) -> ToyWorld:
    """Build a world whose templates are dealt round-robin across the k
    clusters, so every cluster owns either floor(M/k) or ceil(M/k)
    templates."""
    if k > num_templates:
        raise ValueError(f"k={k} exceeds the number of templates ({num_templates})")
    return ToyWorld(
        num_contexts=num_contexts,
        num_templates=num_templates,
        template_cluster=np.arange(num_templates, dtype=np.int64) % k,
        k=k,
    )


def make_synthetic_dataset(world: ToyWorld, skew: float = 1.5, size: int = 150, seed: int = 0) -> ToyDataset:
    """Sample training pairs whose cluster frequencies follow a Zipf-like
    power law: cluster at rank r (over clusters that own at least one
    template, ranked by index) is drawn with probability proportional to
    r^(-skew). Contexts are uniform; the template is uniform within the
    drawn cluster.
    """
    if skew < 1.0:
        raise ValueError(f"skew must be >= 1, got {skew}")
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    if seed < 0:
        raise ValueError(f"seed must be >= 0, got {seed}")
    rng = np.random.default_rng(seed)
    clusters_present = np.unique(world.template_cluster)
    ranks = np.arange(1, clusters_present.size + 1, dtype=np.float64)
    probs = ranks**-skew
    probs /= probs.sum()
    draws = rng.choice(clusters_present, size=size, p=probs)
    pools = {int(c): np.flatnonzero(world.template_cluster == c) for c in clusters_present.tolist()}
    contexts = rng.integers(0, world.num_contexts, size=size)
    templates = np.empty(size, dtype=np.int64)
    for i, c in enumerate(draws.tolist()):
        pool = pools[c]
        templates[i] = pool[rng.integers(pool.size)]
    return ToyDataset(
        contexts=contexts,
        templates=templates,
        labels=draws,
        dist=semantic_distribution(draws, world.k),
    )


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _as_weights(weights: WeightTable | Sequence[float] | np.ndarray, n: int) -> np.ndarray:
    w = weights.weights() if isinstance(weights, WeightTable) else np.asarray(weights, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError(f"got {w.shape} weights for {n} pairs")
    return w


def weighted_nll(model: ToyModel, dataset: ToyDataset, weights: WeightTable | Sequence[float] | np.ndarray) -> float:
    """Sum over pairs of -w * log p(template | context)."""
    w = _as_weights(weights, len(dataset))
    ls = _log_softmax(model.logits)
    return float(-(w * ls[dataset.contexts, dataset.templates]).sum())


def grad_weighted_nll(
    model: ToyModel, dataset: ToyDataset, weights: WeightTable | Sequence[float] | np.ndarray
) -> np.ndarray:
    """Gradient of weighted_nll with respect to the logits: each pair
    contributes w * (softmax(logits[c]) - onehot(template)) to row c."""
    w = _as_weights(weights, len(dataset))
    probs = np.exp(_log_softmax(model.logits))
    grad = np.zeros_like(model.logits)
    np.add.at(grad, dataset.contexts, w[:, None] * probs[dataset.contexts])
    np.subtract.at(grad, (dataset.contexts, dataset.templates), w)
    return grad


def _check_dataset(world: ToyWorld, dataset: ToyDataset) -> None:
    if dataset.contexts.max() >= world.num_contexts or dataset.contexts.min() < 0:
        raise ValueError("dataset context ids out of range for this world")
    if dataset.templates.max() >= world.num_templates or dataset.templates.min() < 0:
        raise ValueError("dataset template ids out of range for this world")
    if dataset.dist.k != world.k:
        raise ValueError(f"dataset distribution has k={dataset.dist.k}, world has k={world.k}")


def train(world: ToyWorld, dataset: ToyDataset, config: TrainConfig) -> tuple[ToyModel, TrainHistory]:
    """Full-batch gradient descent on the focal-weighted NLL.

    Per-pair weights are (1 - p)^gamma from the dataset's cluster
    distribution, clamped to the smallest positive float if they
    underflow. With nt_enabled, each epoch also adds one weight -1 term
    per context whose current greedy generation lands in a head cluster,
    pushing probability mass away from over-produced clusters. Aborts if
    the loss ever becomes non-finite.
    """
    _check_dataset(world, dataset)
    rng = np.random.default_rng(config.seed)
    logits = 0.01 * rng.standard_normal((world.num_contexts, world.num_templates))

    p = dataset.dist.probs
    w = (1.0 - p[dataset.labels]) ** config.gamma
    np.maximum(w, _MIN_POSITIVE, out=w)

    heads = head_clusters(dataset.dist, config.head_policy, config.top_m)
    head_arr = np.array(sorted(heads.clusters), dtype=np.int64)

    loss_hist: list[float] = []
    ent_hist: list[float] = []
    mass_hist: list[float] = []

    for epoch in range(config.epochs):
        ls = _log_softmax(logits)
        probs = np.exp(ls)

        gen = logits.argmax(axis=1)
        gen_clusters = world.template_cluster[gen]
        in_head = np.isin(gen_clusters, head_arr)

        loss = -(w * ls[dataset.contexts, dataset.templates]).sum()
        grad = np.zeros_like(logits)
        np.add.at(grad, dataset.contexts, w[:, None] * probs[dataset.contexts])
        np.subtract.at(grad, (dataset.contexts, dataset.templates), w)

        if config.nt_enabled:
            neg_ctx = np.flatnonzero(in_head)
            if neg_ctx.size:
                neg_tpl = gen[neg_ctx]
                loss += ls[neg_ctx, neg_tpl].sum()
                grad[neg_ctx] -= probs[neg_ctx]
                grad[neg_ctx, neg_tpl] += 1.0

        if not np.isfinite(loss):
            raise RuntimeError(f"training diverged: non-finite loss at epoch {epoch}")

        loss_hist.append(float(loss))
        ent_hist.append(sem_ent(semantic_distribution(gen_clusters, world.k)).value)
        mass_hist.append(float(in_head.mean()))

        logits -= config.lr * grad

    model = ToyModel(logits=logits)
    history = TrainHistory(loss=tuple(loss_hist), sem_ent=tuple(ent_hist), head_mass=tuple(mass_hist))
    return model, history


def evaluate_generations(model: ToyModel, world: ToyWorld) -> SemEntScore:
    """Entropy of the cluster distribution of greedy (argmax) generations,
    one per context."""
    gen = model.logits.argmax(axis=1)
    return sem_ent(semantic_distribution(world.template_cluster[gen], world.k))


def head_mass(model: ToyModel, world: ToyWorld, heads: HeadClusters) -> float:
    """Fraction of greedy generations whose template sits in a head
    cluster."""
    gen = model.logits.argmax(axis=1)
    gen_clusters = world.template_cluster[gen]
    head_arr = np.array(sorted(heads.clusters), dtype=np.int64)
    return float(np.isin(gen_clusters, head_arr).mean())
