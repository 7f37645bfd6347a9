"""Input checks shared by the numerical modules."""
import numpy as np
from sklearn.utils import check_array

from .exceptions import DimensionMismatch, InvalidInput

SYMMETRY_TOL = 1e-10


def as_data(X):
    """Return the raw feature matrix from a DataMatrix or array-like."""
    values = getattr(X, "values", X)
    return check_array(values, dtype=np.float64)


def check_square(M, name="matrix"):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidInput(f"{name} contains non-finite entries")
    return M


def check_kernel(K, check_psd=False):
    """Validate an n-by-n kernel matrix: square, finite, symmetric, optionally PSD."""
    K = check_square(K, "kernel")
    asym = np.max(np.abs(K - K.T)) if K.size else 0.0
    if asym > SYMMETRY_TOL * max(1.0, np.max(np.abs(K))):
        raise InvalidInput(f"kernel is not symmetric (max asymmetry {asym:.3g})")
    if check_psd:
        n = K.shape[0]
        lam_min = np.linalg.eigvalsh((K + K.T) / 2)[0]
        if lam_min < -1e-8 * np.trace(K) / n:
            raise InvalidInput(f"kernel is not positive semi-definite (min eigenvalue {lam_min:.3g})")
    return K


def check_similarity(Z, tol=1e-9):
    """Validate a similarity matrix whose columns lie on the probability simplex."""
    Z = check_square(Z, "similarity matrix")
    if np.any(Z < -tol):
        raise InvalidInput("similarity matrix has negative entries")
    sums = Z.sum(axis=0)
    if np.any(np.abs(sums - 1.0) > tol * max(1, Z.shape[0])):
        raise InvalidInput("similarity matrix columns do not sum to 1")
    return Z


def check_n_clusters(c, n):
    if not (isinstance(c, (int, np.integer)) and 1 <= c < n):
        raise InvalidInput(f"cluster count must be an integer in [1, {n}), got {c!r}")
    return int(c)
