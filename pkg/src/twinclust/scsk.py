"""Joint similarity and cluster-indicator learning with one kernel.

The objective over a column-stochastic similarity ``Z`` and an orthonormal
indicator ``P`` is::

    Tr(K - 2 K Z + Z^T K Z) + alpha * ||Z||_F^2 + beta * Tr(P^T L P)

with ``L`` the Laplacian of ``(Z + Z^T)/2``. It is minimized by exact
alternation: ``P`` from the ``c`` smallest Laplacian eigenvectors, then
every column of ``Z`` from a simplex-constrained QP.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from ._validation import check_kernel, check_n_clusters
from .baselines import KMeansConfig, kmeans
from .exceptions import DimensionMismatch, InvalidConfig, NotConverged
from .graph import COMPONENT_EPS, connected_components, laplacian, pairwise_indicator_distances, smallest_eigenvectors
from .kernels import kernel_from_spec
from .simplexqp import DEFAULT_MAX_ITER, DEFAULT_TOL, lipschitz_constant, project_simplex_columns, solve_simplex_columns

logger = logging.getLogger(__name__)


@dataclass
class ScskConfig:
    alpha: float
    beta: float
    c: int
    tol: float = 1e-6
    max_outer: int = 100
    seed: int | None = 0
    beta_autotune: bool = False
    qp_tol: float = DEFAULT_TOL
    qp_max_iter: int = DEFAULT_MAX_ITER
    restarts: int = 20
    component_eps: float = COMPONENT_EPS

    def validate(self, n):
        if not self.alpha > 0:
            raise InvalidConfig(f"alpha must be positive, got {self.alpha}")
        if not self.beta > 0:
            raise InvalidConfig(f"beta must be positive, got {self.beta}")
        if not (isinstance(self.c, (int, np.integer)) and 2 <= self.c < n):
            raise InvalidConfig(f"cluster count must satisfy 2 <= c < n={n}, got {self.c}")
        if not self.tol >= 0 or self.max_outer < 1:
            raise InvalidConfig("tol must be nonnegative and max_outer at least 1")
        if not self.qp_tol > 0 or self.qp_max_iter < 1:
            raise InvalidConfig("qp_tol must be positive and qp_max_iter at least 1")
        if self.restarts < 1:
            raise InvalidConfig("restarts must be at least 1")


@dataclass
class FitResult:
    """Outcome of an alternating fit.

    ``objective_trace`` holds the objective after each outer iteration.
    ``block_trace`` holds ``(iteration, block, objective)`` after every
    individual block update, which is what the descent guarantee is about.
    """

    Z: np.ndarray
    P: np.ndarray
    labels: np.ndarray
    objective_trace: list
    components_found: int
    converged: bool
    label_source: str
    block_trace: list = field(default_factory=list)
    beta_trace: list = field(default_factory=list)
    n_iter: int = 0
    weights: np.ndarray | None = None
    weight_trace: list = field(default_factory=list)


def objective_terms(K, Z, P, alpha, beta):
    """Return ``(reconstruction, ridge, graph)`` terms of the objective."""
    K = np.asarray(K, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    n = K.shape[0]
    if K.shape != (n, n) or Z.shape != (n, n) or P.ndim != 2 or P.shape[0] != n:
        raise DimensionMismatch(f"incompatible shapes K{K.shape}, Z{Z.shape}, P{P.shape}")
    recon = reconstruction_error(K, Z)
    ridge = alpha * float(np.sum(Z * Z))
    graph = beta * float(np.sum(P * (laplacian(Z) @ P)))
    return recon, ridge, graph


def reconstruction_error(K, Z):
    """``Tr(K - 2 K Z + Z^T K Z)``, the kernel-space residual ``||phi - phi Z||_F^2``."""
    return float(np.trace(K) - 2.0 * np.sum(K * Z.T) + np.sum(Z * (K @ Z)))


def scsk_objective(K, Z, P, alpha, beta):
    return float(sum(objective_terms(K, Z, P, alpha, beta)))


def update_P(Z, c):
    """Indicator matrix minimizing ``Tr(P^T L P)`` for fixed ``Z``."""
    return smallest_eigenvectors(laplacian(Z), c)


def column_qp_coefficients(K, P, beta):
    """Linear terms of all column problems, one column per sample: ``beta/2 d_i - 2 K_i``."""
    return 0.5 * beta * pairwise_indicator_distances(P) - 2.0 * K


def update_Z(K, P, alpha, beta, warm=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, lipschitz=None):
    """Solve every column QP for fixed ``P``; columns are warm-started from ``warm``.

    Raises
    ------
    NotConverged
        With ``column`` set to the first unconverged column and ``best`` the
        full (feasible) similarity matrix.
    """
    K = np.asarray(K, dtype=np.float64)
    n = K.shape[0]
    Q = K + alpha * np.eye(n)
    B = column_qp_coefficients(K, P, beta)
    out = solve_simplex_columns(Q, B, warm, tol=tol, max_iter=max_iter, lipschitz=lipschitz)
    if not out.converged.all():
        bad = int(np.flatnonzero(~out.converged)[0])
        raise NotConverged(
            f"column {bad} QP stalled at residual {out.residuals[bad]:.3g}",
            best=out.Z,
            residual=float(out.residuals.max()),
            column=bad,
        )
    return out.Z


def random_similarity(n, rng):
    """Uniform [0, 1) columns projected onto the simplex."""
    return project_simplex_columns(rng.random((n, n)))


def extract_labels(Z, P, c, restarts=20, seed=0, eps=COMPONENT_EPS):
    """Labels from the components of ``Z`` when there are exactly ``c``, else k-means on ``P`` rows.

    Returns ``(labels, components_found, source)``.
    """
    count, comp = connected_components(Z, eps)
    if count == c:
        return comp, count, "components"
    labels, _ = kmeans(P, KMeansConfig(k=c, restarts=restarts, seed=seed))
    return labels, count, "kmeans-on-P"


def _autotune(beta, components, c):
    if components < c:
        return beta * 2.0
    if components > c:
        return beta / 2.0
    return beta


def _relative_change(prev, cur):
    return abs(prev - cur) / max(abs(prev), np.finfo(float).tiny)


def fit_scsk(K, cfg: ScskConfig, Z0=None) -> FitResult:
    """Alternate the ``P`` and ``Z`` updates until the objective settles.

    ``Z0`` replaces the random initial similarity (it is projected onto the
    simplex column-wise), which allows continuation over ``alpha`` or ``beta``.

    Stops when the relative objective change drops below ``cfg.tol`` or after
    ``cfg.max_outer`` outer iterations. A ``P`` update from the final ``Z``
    closes the run, so ``P`` and ``Z`` are mutually consistent.
    """
    K = check_kernel(K)
    n = K.shape[0]
    cfg.validate(n)
    rng = np.random.default_rng(cfg.seed)
    Z = random_similarity(n, rng) if Z0 is None else project_simplex_columns(Z0)
    L_const = lipschitz_constant(K + cfg.alpha * np.eye(n))
    beta = cfg.beta
    trace, blocks, betas = [], [], []
    converged = False
    components = 0
    it = 0
    for it in range(1, cfg.max_outer + 1):
        P = update_P(Z, cfg.c)
        blocks.append((it, "P", scsk_objective(K, Z, P, cfg.alpha, beta)))
        Z = update_Z(K, P, cfg.alpha, beta, warm=Z, tol=cfg.qp_tol, max_iter=cfg.qp_max_iter, lipschitz=L_const)
        obj = scsk_objective(K, Z, P, cfg.alpha, beta)
        blocks.append((it, "Z", obj))
        trace.append(obj)
        betas.append(beta)
        components, _ = connected_components(Z, cfg.component_eps)
        logger.debug("iteration %d objective %.10g components %d beta %g", it, obj, components, beta)
        beta_changed = False
        if cfg.beta_autotune:
            new_beta = _autotune(beta, components, cfg.c)
            beta_changed = new_beta != beta
            beta = new_beta
        if len(trace) > 1 and not beta_changed and betas[-1] == betas[-2]:
            if _relative_change(trace[-2], trace[-1]) < cfg.tol:
                converged = True
                break
    P = update_P(Z, cfg.c)
    labels, components, source = extract_labels(Z, P, cfg.c, cfg.restarts, cfg.seed, cfg.component_eps)
    return FitResult(
        Z=Z,
        P=P,
        labels=labels,
        objective_trace=trace,
        components_found=components,
        converged=converged,
        label_source=source,
        block_trace=blocks,
        beta_trace=betas,
        n_iter=it,
    )


class SCSK(ClusterMixin, BaseEstimator):
    """Similarity and clustering learned jointly in one kernel space.

    Parameters
    ----------
    n_clusters : int, default=2
        Number of clusters ``c``; also the number of eigenvectors in ``P``.
    alpha : float, default=0.1
        Weight of the Frobenius penalty on the similarity matrix. Large
        values push each cluster's similarities toward uniform.
    beta : float, default=1.0
        Weight of the Laplacian term that drives the similarity graph toward
        ``n_clusters`` connected components.
    kernel : str, default="gaussian:t=1"
        Kernel spec applied to ``X`` in :meth:`fit`, or ``"precomputed"`` when
        ``X`` is already an ``(n, n)`` Gram matrix.
    tol : float, default=1e-6
        Relative objective change that ends the alternation.
    max_iter : int, default=100
        Maximum number of outer iterations.
    beta_autotune : bool, default=False
        Double ``beta`` when the learned graph has too few components and
        halve it when it has too many. Objective descent is only guaranteed
        with this off.
    n_init : int, default=20
        k-means restarts used when labels fall back to clustering rows of ``P``.
    random_state : int or None, default=0
        Seeds the random initial similarity matrix and the k-means fallback.
    qp_tol, qp_max_iter : float, int
        Tolerance and iteration cap of each column QP.

    Attributes
    ----------
    similarity_ : ndarray of shape (n_samples, n_samples)
    indicator_ : ndarray of shape (n_samples, n_clusters)
    labels_ : ndarray of shape (n_samples,)
    objective_trace_ : list of float
    n_components_ : int
        Connected components of the final similarity graph.
    label_source_ : {"components", "kmeans-on-P"}
    converged_ : bool
    n_iter_ : int
    result_ : FitResult
    """

    def __init__(
        self,
        n_clusters=2,
        alpha=0.1,
        beta=1.0,
        kernel="gaussian:t=1",
        tol=1e-6,
        max_iter=100,
        beta_autotune=False,
        n_init=20,
        random_state=0,
        qp_tol=DEFAULT_TOL,
        qp_max_iter=DEFAULT_MAX_ITER,
    ):
        self.n_clusters = n_clusters
        self.alpha = alpha
        self.beta = beta
        self.kernel = kernel
        self.tol = tol
        self.max_iter = max_iter
        self.beta_autotune = beta_autotune
        self.n_init = n_init
        self.random_state = random_state
        self.qp_tol = qp_tol
        self.qp_max_iter = qp_max_iter

    def _config(self):
        return ScskConfig(
            alpha=self.alpha,
            beta=self.beta,
            c=self.n_clusters,
            tol=self.tol,
            max_outer=self.max_iter,
            seed=self.random_state,
            beta_autotune=self.beta_autotune,
            qp_tol=self.qp_tol,
            qp_max_iter=self.qp_max_iter,
            restarts=self.n_init,
        )

    def _kernel_matrix(self, X):
        if self.kernel == "precomputed":
            return check_kernel(X)
        return kernel_from_spec(X, self.kernel)[0]

    def fit(self, X, y=None):
        K = self._kernel_matrix(X)
        check_n_clusters(self.n_clusters, K.shape[0])
        result = fit_scsk(K, self._config())
        _store_result(self, result)
        return self


def _store_result(est, result):
    est.result_ = result
    est.similarity_ = result.Z
    est.indicator_ = result.P
    est.labels_ = result.labels
    est.objective_trace_ = result.objective_trace
    est.n_components_ = result.components_found
    est.label_source_ = result.label_source
    est.converged_ = result.converged
    est.n_iter_ = result.n_iter
