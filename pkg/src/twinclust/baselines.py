"""Reference clusterers: Lloyd k-means, kernel k-means and spectral clustering.

``kmeans`` works on coordinates, ``kernel_kmeans`` only through a Gram
matrix. Both draw from the random generator in exactly the same order, so
with a linear kernel they visit the same partitions for the same seed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from ._validation import as_data, check_kernel
from .exceptions import InvalidConfig
from .graph import laplacian, smallest_eigenvectors
from .kernels import kernel_from_spec


@dataclass
class KMeansConfig:
    k: int
    restarts: int = 20
    max_iter: int = 300
    seed: int | None = 0

    def __post_init__(self):
        if self.k < 1:
            raise InvalidConfig(f"k must be at least 1, got {self.k}")
        if self.restarts < 1:
            raise InvalidConfig(f"restarts must be at least 1, got {self.restarts}")
        if self.max_iter < 1:
            raise InvalidConfig(f"max_iter must be at least 1, got {self.max_iter}")


def _plusplus_seeds(dist_to, n, k, rng):
    """k-means++ seeding given ``dist_to(j)`` -> squared distances of all points to point j."""
    seeds = [int(rng.integers(n))]
    closest = dist_to(seeds[0])
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            u = rng.random() * total
            idx = int(min(np.searchsorted(np.cumsum(closest), u, side="right"), n - 1))
        seeds.append(idx)
        closest = np.minimum(closest, dist_to(idx))
    return seeds


def _lloyd(distances_for, labels, k, max_iter):
    """Generic Lloyd loop on a ``distances_for(labels) -> (n, k)`` oracle.

    Empty clusters are reseeded with the point farthest from its current
    centre.
    """
    n = labels.size
    for _ in range(max_iter):
        dist = distances_for(labels)
        new = np.argmin(dist, axis=1)
        counts = np.bincount(new, minlength=k)
        for empty in np.flatnonzero(counts == 0):
            far = int(np.argmax(dist[np.arange(n), new]))
            new[far] = empty
            dist[far, :] = 0.0
            counts = np.bincount(new, minlength=k)
        if np.array_equal(new, labels):
            break
        labels = new
    dist = distances_for(labels)
    return labels, float(dist[np.arange(n), labels].sum())


def kmeans(X, cfg: KMeansConfig):
    """Lloyd k-means from k-means++ starts; best inertia over ``cfg.restarts``.

    Returns ``(labels, inertia)``.
    """
    X = as_data(X)
    n = X.shape[0]
    if cfg.k > n:
        raise InvalidConfig(f"k={cfg.k} exceeds sample count {n}")
    rng = np.random.default_rng(cfg.seed)
    sq = np.einsum("ij,ij->i", X, X)

    def dist_to(j):
        return np.maximum(sq + sq[j] - 2.0 * X @ X[j], 0.0)

    def distances_for(labels):
        centres = np.zeros((cfg.k, X.shape[1]))
        np.add.at(centres, labels, X)
        centres /= np.maximum(np.bincount(labels, minlength=cfg.k), 1)[:, None]
        d = sq[:, None] - 2.0 * X @ centres.T + np.einsum("ij,ij->i", centres, centres)[None, :]
        return np.maximum(d, 0.0)

    best = None
    for _ in range(cfg.restarts):
        seeds = _plusplus_seeds(dist_to, n, cfg.k, rng)
        init = np.argmin(np.stack([dist_to(s) for s in seeds], axis=1), axis=1)
        init[seeds] = np.arange(cfg.k)
        labels, inertia = _lloyd(distances_for, init, cfg.k, cfg.max_iter)
        if best is None or inertia < best[1]:
            best = (labels, inertia)
    return best


def kernel_kmeans_distances(K, labels, k):
    """Feature-space squared distances from every point to every cluster mean."""
    n = K.shape[0]
    H = np.zeros((n, k))
    H[np.arange(n), labels] = 1.0
    sizes = H.sum(axis=0)
    inv = np.where(sizes > 0, 1.0 / np.maximum(sizes, 1), 0.0)
    KH = K @ H
    within = np.einsum("ik,ik->k", H, KH) * inv**2
    d = np.diag(K)[:, None] - 2.0 * KH * inv[None, :] + within[None, :]
    d[:, sizes == 0] = np.inf
    return np.maximum(d, 0.0)


def kernel_kmeans_objective(K, labels):
    """Sum of squared feature-space distances of points to their cluster means."""
    K = np.asarray(K, dtype=np.float64)
    labels = np.asarray(labels)
    k = int(labels.max()) + 1
    d = kernel_kmeans_distances(K, labels, k)
    return float(d[np.arange(labels.size), labels].sum())


def kernel_kmeans(K, cfg: KMeansConfig, return_objective=False):
    """Lloyd-style kernel k-means; keeps the restart with the lowest objective."""
    K = check_kernel(K)
    n = K.shape[0]
    if cfg.k > n:
        raise InvalidConfig(f"k={cfg.k} exceeds sample count {n}")
    rng = np.random.default_rng(cfg.seed)
    diag = np.diag(K)

    def dist_to(j):
        return np.maximum(diag + diag[j] - 2.0 * K[:, j], 0.0)

    def distances_for(labels):
        d = kernel_kmeans_distances(K, labels, cfg.k)
        # empty clusters must stay selectable for reseeding bookkeeping
        d[~np.isfinite(d)] = np.finfo(float).max
        return d

    best = None
    for _ in range(cfg.restarts):
        seeds = _plusplus_seeds(dist_to, n, cfg.k, rng)
        init = np.argmin(np.stack([dist_to(s) for s in seeds], axis=1), axis=1)
        init[seeds] = np.arange(cfg.k)
        labels, obj = _lloyd(distances_for, init, cfg.k, cfg.max_iter)
        if best is None or obj < best[1]:
            best = (labels, obj)
    return best if return_objective else best[0]


def spectral_clustering(A, c, cfg: KMeansConfig | None = None):
    """Unnormalized spectral clustering of a fixed affinity (e.g. a kernel).

    The ``c`` smallest Laplacian eigenvectors embed the points; k-means on
    the rows gives the labels.
    """
    A = check_kernel(A)
    cfg = cfg or KMeansConfig(k=c)
    if cfg.k != c:
        cfg = KMeansConfig(k=c, restarts=cfg.restarts, max_iter=cfg.max_iter, seed=cfg.seed)
    P = smallest_eigenvectors(laplacian(A), c)
    labels, _ = kmeans(P, cfg)
    return labels


class KernelKMeans(ClusterMixin, BaseEstimator):
    """Kernel k-means on a precomputed Gram matrix or a kernel spec applied to ``X``.

    Parameters
    ----------
    n_clusters : int
    kernel : str, default="linear"
        Kernel spec (see :mod:`twinclust.kernels`) or ``"precomputed"``.
    n_init : int, default=20
    max_iter : int, default=300
    random_state : int or None, default=0
    """

    def __init__(self, n_clusters=2, kernel="linear", n_init=20, max_iter=300, random_state=0):
        self.n_clusters = n_clusters
        self.kernel = kernel
        self.n_init = n_init
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        if self.kernel == "precomputed":
            K = np.asarray(X, dtype=np.float64)
        else:
            K = kernel_from_spec(X, self.kernel)[0]
        cfg = KMeansConfig(self.n_clusters, self.n_init, self.max_iter, self.random_state)
        self.labels_, self.objective_ = kernel_kmeans(K, cfg, return_objective=True)
        return self


class SpectralClustering(ClusterMixin, BaseEstimator):
    """Unnormalized spectral clustering with a kernel as the affinity."""

    def __init__(self, n_clusters=2, kernel="gaussian:t=1", n_init=20, random_state=0):
        self.n_clusters = n_clusters
        self.kernel = kernel
        self.n_init = n_init
        self.random_state = random_state

    def fit(self, X, y=None):
        if self.kernel == "precomputed":
            A = np.asarray(X, dtype=np.float64)
        else:
            A = kernel_from_spec(X, self.kernel)[0]
        cfg = KMeansConfig(self.n_clusters, self.n_init, seed=self.random_state)
        self.labels_ = spectral_clustering(A, self.n_clusters, cfg)
        return self
