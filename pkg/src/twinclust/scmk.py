"""Joint similarity, clustering and kernel-weight learning over a kernel bank.

The consensus kernel is ``K_w = sum_i w_i K^i`` with ``w >= 0`` and
``sum_i sqrt(w_i) = 1``. For fixed ``Z`` and ``P`` the best weights have a
closed form in the per-kernel reconstruction residuals ``h``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .exceptions import DimensionMismatch, InvalidConfig, InvalidInput
from .kernels import KernelBank, bank_from_specs, check_bank, combine, uniform_weights
from .scsk import (
    FitResult,
    _store_result,
    ScskConfig,
    _autotune,
    _relative_change,
    extract_labels,
    random_similarity,
    update_P,
    update_Z,
)
from .graph import connected_components, laplacian
from .simplexqp import DEFAULT_MAX_ITER, DEFAULT_TOL, lipschitz_constant, project_simplex_columns

logger = logging.getLogger(__name__)

DEFAULT_H_FLOOR = 1e-12


@dataclass
class ScmkConfig(ScskConfig):
    h_floor: float = DEFAULT_H_FLOOR

    def validate(self, n):
        super().validate(n)
        if not self.h_floor > 0:
            raise InvalidConfig(f"h_floor must be positive, got {self.h_floor}")


def reconstruction_residuals(bank: KernelBank, Z):
    """Unclamped ``Tr(K^i - 2 K^i Z + Z^T K^i Z)`` for every kernel."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.shape != (bank.n, bank.n):
        raise DimensionMismatch(f"Z has shape {Z.shape}, bank is {bank.n}x{bank.n}")
    Ks = bank.kernels
    tr = np.trace(Ks, axis1=1, axis2=2)
    cross = np.einsum("rij,ji->r", Ks, Z)
    quad = np.einsum("ij,rik,kj->r", Z, Ks, Z, optimize=True)
    return tr - 2.0 * cross + quad


def h_vector(bank: KernelBank, Z, h_floor=DEFAULT_H_FLOOR):
    """Per-kernel residuals clamped below at ``h_floor``."""
    return np.maximum(reconstruction_residuals(bank, Z), h_floor)


def update_weights(h):
    """Closed-form minimizer of ``sum w_i h_i`` subject to ``sum sqrt(w_i) = 1``.

    ``sqrt(w_i)`` is proportional to ``1 / h_i``, i.e.
    ``w_i = (h_i * sum_j 1/h_j) ** -2``.
    """
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 1 or h.size < 1:
        raise InvalidInput("h must be a non-empty vector")
    if np.any(~np.isfinite(h)) or np.any(h <= 0):
        raise InvalidInput("all h entries must be positive and finite")
    # normalise first: the result is invariant to scaling h, and this keeps it exact
    inv = 1.0 / (h / h.min())
    root = inv / inv.sum()
    return root * root


def scmk_objective(bank: KernelBank, w, Z, P, alpha, beta):
    """Multiple-kernel objective, evaluated as ``sum w_i h_i + ridge + graph``."""
    recon = float(np.dot(w, reconstruction_residuals(bank, Z)))
    ridge = alpha * float(np.sum(Z * Z))
    graph = beta * float(np.sum(P * (laplacian(Z) @ P)))
    return recon + ridge + graph


def fit_scmk(bank: KernelBank, cfg: ScmkConfig, Z0=None, w0=None) -> FitResult:
    """Alternate consensus kernel, ``P``, ``Z`` and weight updates.

    Weights start on the constraint surface at ``1/r**2``. The result carries
    the final weights and the weight history (``weight_trace[0]`` is the
    initial vector).
    """
    check_bank(bank)
    n, r = bank.n, bank.r
    cfg.validate(n)
    rng = np.random.default_rng(cfg.seed)
    Z = random_similarity(n, rng) if Z0 is None else project_simplex_columns(Z0)
    w = uniform_weights(r) if w0 is None else np.asarray(w0, dtype=np.float64)
    if w.shape != (r,):
        raise DimensionMismatch(f"expected {r} initial weights, got shape {w.shape}")
    beta = cfg.beta
    trace, blocks, betas, weights = [], [], [], [w.copy()]
    converged = False
    it = 0
    for it in range(1, cfg.max_outer + 1):
        Kw = combine(bank, w)
        P = update_P(Z, cfg.c)
        blocks.append((it, "P", scmk_objective(bank, w, Z, P, cfg.alpha, beta)))
        L_const = lipschitz_constant(Kw + cfg.alpha * np.eye(n))
        Z = update_Z(Kw, P, cfg.alpha, beta, warm=Z, tol=cfg.qp_tol, max_iter=cfg.qp_max_iter, lipschitz=L_const)
        blocks.append((it, "Z", scmk_objective(bank, w, Z, P, cfg.alpha, beta)))
        w = update_weights(h_vector(bank, Z, cfg.h_floor))
        obj = scmk_objective(bank, w, Z, P, cfg.alpha, beta)
        blocks.append((it, "w", obj))
        weights.append(w.copy())
        trace.append(obj)
        betas.append(beta)
        components, _ = connected_components(Z, cfg.component_eps)
        logger.debug("iteration %d objective %.10g components %d weights %s", it, obj, components, w)
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
        weights=w,
        weight_trace=weights,
    )


class SCMK(ClusterMixin, BaseEstimator):
    """Multiple-kernel variant of :class:`~twinclust.scsk.SCSK` that also learns kernel weights.

    Parameters
    ----------
    kernels : str or list of str, default="bank:standard"
        Kernel specs joined by ``;`` or given as a list; ``bank:standard`` is
        the twelve-kernel bank. Use ``"precomputed"`` to pass an ``(r, n, n)``
        array (or a :class:`KernelBank`) to :meth:`fit`. Non-bank kernels are
        rescaled to a maximum entry of 1.
    h_floor : float, default=1e-12
        Lower clamp on per-kernel residuals before the weight update.

    Other parameters are as in :class:`~twinclust.scsk.SCSK`.

    Attributes
    ----------
    weights_ : ndarray of shape (n_kernels,)
    weight_trace_ : list of ndarray
    kernel_descriptors_ : list of str

    Plus every fitted attribute of :class:`~twinclust.scsk.SCSK`.
    """

    def __init__(
        self,
        n_clusters=2,
        alpha=0.1,
        beta=1.0,
        kernels="bank:standard",
        tol=1e-6,
        max_iter=100,
        beta_autotune=False,
        n_init=20,
        random_state=0,
        qp_tol=DEFAULT_TOL,
        qp_max_iter=DEFAULT_MAX_ITER,
        h_floor=DEFAULT_H_FLOOR,
    ):
        self.n_clusters = n_clusters
        self.alpha = alpha
        self.beta = beta
        self.kernels = kernels
        self.tol = tol
        self.max_iter = max_iter
        self.beta_autotune = beta_autotune
        self.n_init = n_init
        self.random_state = random_state
        self.qp_tol = qp_tol
        self.qp_max_iter = qp_max_iter
        self.h_floor = h_floor

    def _bank(self, X):
        if isinstance(X, KernelBank):
            return X
        if self.kernels == "precomputed":
            return KernelBank(np.asarray(X, dtype=np.float64))
        return bank_from_specs(X, self.kernels)

    def fit(self, X, y=None):
        bank = self._bank(X)
        cfg = ScmkConfig(
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
            h_floor=self.h_floor,
        )
        result = fit_scmk(bank, cfg)
        _store_result(self, result)
        self.weights_ = result.weights
        self.weight_trace_ = result.weight_trace
        self.kernel_descriptors_ = list(bank.descriptors)
        return self
