"""Graph Laplacians of learned similarities and their spectral quantities."""
from __future__ import annotations

import numpy as np
from scipy.linalg import LinAlgError, eigh
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components as _cc
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from ._validation import check_n_clusters, check_square
from .exceptions import ConvergenceFailure

DENSE_EIGEN_LIMIT = 2000
COMPONENT_EPS = 1e-8


def symmetrize(Z):
    Z = np.asarray(Z, dtype=np.float64)
    return 0.5 * (Z + Z.T)


def laplacian(Z):
    """Unnormalized Laplacian ``D - (Z + Z^T)/2`` with degrees from the symmetrized graph."""
    W = symmetrize(check_square(Z, "similarity matrix"))
    L = -W
    L[np.diag_indices_from(L)] += W.sum(axis=1)
    return L


def degrees(Z):
    return symmetrize(Z).sum(axis=1)


def _fix_signs(P):
    """Flip each column so its largest-magnitude entry (first on ties) is positive."""
    idx = np.argmax(np.abs(P), axis=0)
    signs = np.sign(P[idx, np.arange(P.shape[1])])
    signs[signs == 0] = 1.0
    return P * signs


def smallest_eigenvectors(L, c, return_eigenvalues=False):
    """Orthonormal eigenvectors for the ``c`` smallest eigenvalues of symmetric ``L``.

    Eigenvalues are ascending. Within a repeated eigenvalue any orthonormal
    basis may be returned. Dense LAPACK is used up to ``DENSE_EIGEN_LIMIT``
    nodes, shift-invert Lanczos beyond.
    """
    L = check_square(L, "Laplacian")
    n = L.shape[0]
    c = check_n_clusters(c, n)
    L = 0.5 * (L + L.T)
    try:
        if n <= DENSE_EIGEN_LIMIT:
            vals, P = eigh(L, subset_by_index=[0, c - 1])
        else:
            vals, P = eigsh(L, k=c, sigma=-1e-6, which="LM")
            order = np.argsort(vals)
            vals, P = vals[order], P[:, order]
    except (LinAlgError, ArpackNoConvergence) as exc:
        raise ConvergenceFailure(f"eigensolver failed: {exc}") from exc
    P = _fix_signs(P)
    return (P, vals) if return_eigenvalues else P


def connected_components(Z, eps=COMPONENT_EPS):
    """Components of the graph with an edge wherever ``(Z_ij + Z_ji)/2 > eps``.

    Returns ``(count, labels)``; component ids follow order of first appearance.
    """
    W = symmetrize(check_square(Z, "similarity matrix"))
    adjacency = csr_matrix(W > eps)
    count, raw = _cc(adjacency, directed=False)
    _, first = np.unique(raw, return_index=True)
    order = np.argsort(np.argsort(first))
    return int(count), order[raw].astype(np.int64)


def pairwise_indicator_distances(P):
    """Squared Euclidean distances between rows of ``P``."""
    P = np.asarray(P, dtype=np.float64)
    sq = np.einsum("ij,ij->i", P, P)
    d = sq[:, None] + sq[None, :] - 2.0 * (P @ P.T)
    np.maximum(d, 0.0, out=d)
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return d


def zero_eigen_multiplicity(L, threshold=1e-10):
    """Number of eigenvalues of ``L`` at or below ``threshold``."""
    vals = np.linalg.eigvalsh(0.5 * (L + L.T))
    return int(np.sum(vals <= threshold))
