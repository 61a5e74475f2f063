"""Deterministic k-means over embedding matrices.

Lloyd's algorithm with k-means++ seeding, a fixed empty-cluster repair
rule, and fully specified tie-breaking, so a given (data, k, seed) triple
always produces the same model bit for bit. Also holds the nearest-centroid
assignment map and the empirical cluster distribution derived from a label
vector, plus save/load in the SKMC binary model format.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus_io import EmbeddingMatrix, atomic_write_bytes
from .errors import DataError

__all__ = [
    "ClusterModel",
    "ClusterAssignment",
    "SemanticDistribution",
    "kmeans_fit",
    "assign",
    "semantic_distribution",
    "normalize_rows",
    "save_model",
    "load_model",
]

_SKMC_MAGIC = b"SKMC"
_SKMC_VERSION = 1
_SKMC_HEADER = struct.Struct("<IQQqId")  # version, k, dims, seed, iterations, inertia

_MAX_SEED = 2**63 - 1


@dataclass(frozen=True, eq=False)
class ClusterModel:
    """A fitted k-means model: float64 centroids plus the fit metadata
    needed to reproduce or audit it."""

    k: int
    dims: int
    centroids: np.ndarray
    seed: int
    iterations_run: int
    inertia: float
    inertia_history: tuple[float, ...] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        arr = np.asarray(self.centroids, dtype=np.float64)
        if arr.shape != (self.k, self.dims):
            raise ValueError(f"centroids shape {arr.shape} does not match (k={self.k}, dims={self.dims})")
        if not np.isfinite(arr).all():
            raise ValueError("centroids must be finite")
        if self.inertia < 0 or not np.isfinite(self.inertia):
            raise ValueError(f"inertia must be finite and non-negative, got {self.inertia}")
        if arr.flags.writeable:
            arr = arr.copy()
            arr.setflags(write=False)
        object.__setattr__(self, "centroids", arr)

    def __eq__(self, other: object) -> bool:
        """Bitwise equality on everything a model file stores (history is
        in-memory only and excluded)."""
        if not isinstance(other, ClusterModel):
            return NotImplemented
        return (
            self.k == other.k
            and self.dims == other.dims
            and self.seed == other.seed
            and self.iterations_run == other.iterations_run
            and struct.pack("<d", self.inertia) == struct.pack("<d", other.inertia)
            and self.centroids.tobytes() == other.centroids.tobytes()
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class ClusterAssignment:
    """Nearest-centroid labels for a set of points, with the squared
    distance to the winning centroid."""

    labels: np.ndarray
    distances: np.ndarray
    k: int

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels, dtype=np.int64)
        distances = np.asarray(self.distances, dtype=np.float64)
        if labels.ndim != 1 or distances.shape != labels.shape:
            raise ValueError("labels and distances must be 1-D with equal length")
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise ValueError(f"labels must lie in [0, {self.k})")
        if distances.size and distances.min() < 0:
            raise ValueError("squared distances must be non-negative")
        for name, arr in (("labels", labels), ("distances", distances)):
            if arr.flags.writeable:
                arr = arr.copy()
                arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return int(self.labels.size)


@dataclass(frozen=True)
class SemanticDistribution:
    """Empirical probability of each cluster under a label vector."""

    probs: np.ndarray
    n: int

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probs must be a non-empty 1-D vector")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if probs.min() < 0.0 or probs.max() > 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(float(probs.sum()) - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {probs.sum()}, not 1")
        if probs.flags.writeable:
            probs = probs.copy()
            probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def k(self) -> int:
        return int(self.probs.size)


def normalize_rows(matrix: EmbeddingMatrix | np.ndarray) -> np.ndarray:
    """L2-normalize each row; zero rows are left as zeros."""
    data = matrix.data if isinstance(matrix, EmbeddingMatrix) else np.asarray(matrix)
    data = np.asarray(data, dtype=np.float64)
    norms = np.sqrt((data * data).sum(axis=1, keepdims=True))
    norms[norms == 0.0] = 1.0
    return data / norms


def _as_points(X: EmbeddingMatrix | np.ndarray) -> np.ndarray:
    data = X.data if isinstance(X, EmbeddingMatrix) else np.asarray(X)
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError(f"points must form a 2-D matrix, got shape {data.shape}")
    if not np.isfinite(data).all():
        raise ValueError("points must be finite")
    return data


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, shape (len(X), len(C))."""
    x2 = (X * X).sum(axis=1)[:, None]
    c2 = (C * C).sum(axis=1)[None, :]
    d2 = x2 + c2 - 2.0 * (X @ C.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _plus_plus_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = X[first]
    d2 = ((X - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = float(d2.sum())
        if total > 0.0:
            pick = int(rng.choice(n, p=d2 / total))
        else:
            pick = int(rng.integers(n))
        centroids[j] = X[pick]
        np.minimum(d2, ((X - centroids[j]) ** 2).sum(axis=1), out=d2)
    return centroids


def kmeans_fit(
    X: EmbeddingMatrix | np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-6,
    record_history: bool = False,
) -> ClusterModel:
    """Fit k-means with k-means++ seeding and Lloyd iterations.

    Deterministic for a fixed (X, k, seed): the RNG is seeded explicitly,
    nearest-centroid ties resolve to the lowest index, and an emptied
    cluster is reseeded to the point farthest from its centroid (drawn only
    from clusters that keep at least one member, lowest index on ties).
    Iterations stop when the largest centroid shift drops below ``tol`` or
    at ``max_iter``.
    """
    data = _as_points(X)
    n = data.shape[0]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n < k:
        raise ValueError(f"need at least k={k} points, got {n}")
    if not 0 <= seed <= _MAX_SEED:
        raise ValueError(f"seed must be in [0, 2**63), got {seed}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    if tol < 0:
        raise ValueError(f"tol must be >= 0, got {tol}")

    rng = np.random.default_rng(seed)
    centroids = _plus_plus_init(data, k, rng)
    history: list[float] = []
    iterations = 0

    for _ in range(max_iter):
        d2 = _sq_dists(data, centroids)
        labels = d2.argmin(axis=1)

        counts = np.bincount(labels, minlength=k)
        for j in np.flatnonzero(counts == 0):
            eligible = counts[labels] > 1
            if not eligible.any():
                break
            dj = ((data - centroids[j]) ** 2).sum(axis=1)
            far = int(np.where(eligible, dj, -np.inf).argmax())
            counts[labels[far]] -= 1
            labels[far] = j
            counts[j] = 1

        new_centroids = np.zeros_like(centroids)
        np.add.at(new_centroids, labels, data)
        nonempty = counts > 0
        new_centroids[nonempty] /= counts[nonempty, None]
        new_centroids[~nonempty] = centroids[~nonempty]

        iterations += 1
        if record_history:
            diffs = data - new_centroids[labels]
            history.append(float((diffs * diffs).sum()))

        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if shift < tol:
            break

    final_labels = _sq_dists(data, centroids).argmin(axis=1)
    diffs = data - centroids[final_labels]
    inertia = float((diffs * diffs).sum())
    if record_history:
        history.append(inertia)

    return ClusterModel(
        k=k,
        dims=data.shape[1],
        centroids=centroids,
        seed=seed,
        iterations_run=iterations,
        inertia=inertia,
        inertia_history=tuple(history) if record_history else None,
    )


def assign(model: ClusterModel, X: EmbeddingMatrix | np.ndarray) -> ClusterAssignment:
    """Label each row of ``X`` with its nearest centroid (squared Euclidean
    distance, ties to the lowest index)."""
    data = _as_points(X)
    if data.shape[1] != model.dims:
        raise ValueError(f"points have {data.shape[1]} dims but the model expects {model.dims}")
    d2 = _sq_dists(data, model.centroids)
    labels = d2.argmin(axis=1)
    return ClusterAssignment(
        labels=labels,
        distances=d2[np.arange(data.shape[0]), labels],
        k=model.k,
    )


# Pulled into module scope to keep semantic_distribution's hot path free
# of repeated attribute lookups; it is called once per label vector in
# exhaustive sweeps and once per epoch inside the toy trainer.
_bincount = np.bincount
_new_instance = object.__new__
_set_attr = object.__setattr__

# Distributions are immutable value objects and the same count pattern
# recurs constantly (per-epoch generation labels, exhaustive small-k
# sweeps), so share instances through a bounded cache. Only small inputs
# are cached: large-k patterns almost never repeat.
_dist_cache: dict[tuple[bytes, int], "SemanticDistribution"] = {}
_DIST_CACHE_MAX = 65536
_DIST_CACHE_K = 16
_DIST_CACHE_N = 64


def semantic_distribution(labels: ClusterAssignment | Sequence[int] | np.ndarray, k: int) -> SemanticDistribution:
    """Empirical distribution over ``k`` clusters: probs[j] is the fraction
    of labels equal to j. Labels must lie in [0, k); empty input is an
    error."""
    if type(labels) is np.ndarray:
        arr = labels
    elif isinstance(labels, ClusterAssignment):
        arr = labels.labels
    else:
        arr = np.asarray(labels)
    n = arr.size
    if arr.ndim != 1 or n == 0:
        raise ValueError("labels must be a non-empty 1-D sequence")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    try:
        counts = _bincount(arr, minlength=k)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"labels must be non-negative integers: {exc}") from exc
    if counts.size > k:
        raise ValueError(f"label {int(arr.max())} out of range for k={k}")

    cacheable = k <= _DIST_CACHE_K and n <= _DIST_CACHE_N
    if cacheable:
        key = (counts.tobytes(), n)
        dist = _dist_cache.get(key)
        if dist is not None:
            return dist

    # Counting guarantees every invariant (entries in [0, 1], sum 1), so
    # skip the constructor's re-validation; construction cost matters here.
    probs = counts / n
    probs.setflags(write=False)
    dist = _new_instance(SemanticDistribution)
    _set_attr(dist, "probs", probs)
    _set_attr(dist, "n", n)
    if cacheable and len(_dist_cache) < _DIST_CACHE_MAX:
        _dist_cache[key] = dist
    return dist


def save_model(model: ClusterModel, path: str | os.PathLike[str]) -> None:
    """Write ``model`` in the SKMC binary format (atomic replace)."""
    payload = _SKMC_MAGIC + _SKMC_HEADER.pack(
        _SKMC_VERSION, model.k, model.dims, model.seed, model.iterations_run, model.inertia
    )
    payload += np.ascontiguousarray(model.centroids, dtype="<f8").tobytes()
    atomic_write_bytes(path, payload)


def load_model(path: str | os.PathLike[str]) -> ClusterModel:
    """Read an SKMC model file; the reloaded model compares equal to the
    one that was saved."""
    p = Path(path)
    if not p.is_file():
        raise DataError(f"no such model file: {p}")
    buf = p.read_bytes()
    if buf[:4] != _SKMC_MAGIC:
        raise DataError(f"{p}: bad magic bytes (not an SKMC model file)")
    header_size = 4 + _SKMC_HEADER.size
    if len(buf) < header_size:
        raise DataError(f"{p}: truncated SKMC header ({len(buf)} bytes)")
    version, k, dims, seed, iterations, inertia = _SKMC_HEADER.unpack_from(buf, 4)
    if version != _SKMC_VERSION:
        raise DataError(f"{p}: unsupported SKMC version {version} (expected {_SKMC_VERSION})")
    expected = header_size + k * dims * 8
    if len(buf) != expected:
        raise DataError(
            f"{p}: payload size mismatch for {k}x{dims} float64 centroids: "
            f"expected {expected} bytes, file has {len(buf)}"
        )
    centroids = np.frombuffer(buf, dtype="<f8", count=k * dims, offset=header_size).reshape(k, dims)
    if not np.isfinite(centroids).all():
        raise DataError(f"{p}: non-finite centroid value")
    if not np.isfinite(inertia) or inertia < 0:
        raise DataError(f"{p}: invalid inertia {inertia}")
    return ClusterModel(
        k=int(k), dims=int(dims), centroids=centroids, seed=int(seed),
        iterations_run=int(iterations), inertia=float(inertia),
    )
