"""Convex quadratic programs over the probability simplex.

Every column of the similarity update solves

    minimize  z^T Q z + b^T z   subject to  z >= 0,  sum(z) = 1

with ``Q = alpha * I + K`` shared by all columns. The solver is projected
gradient with Nesterov momentum and a function-value restart, run on all
columns at once. Simplex membership already implies ``z <= 1``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigh

from .exceptions import DimensionMismatch, InvalidInput, NotConverged

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 1000


@dataclass
class ColumnQP:
    Q: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        n = self.b.shape[0]
        if self.Q.shape != (n, n) or self.b.ndim != 1:
            raise DimensionMismatch(f"Q {self.Q.shape} and b {self.b.shape} are incompatible")

    @classmethod
    def from_kernel(cls, K, i, alpha, beta=0.0, d=None):
        """Build the problem for column ``i``: ``Q = alpha I + K``, ``b = beta/2 d - 2 K[i]``."""
        K = np.asarray(K, dtype=np.float64)
        b = -2.0 * K[i]
        if d is not None:
            b = b + 0.5 * beta * np.asarray(d, dtype=np.float64)
        return cls(alpha * np.eye(K.shape[0]) + K, b)


def project_simplex(v):
    """Euclidean projection of ``v`` onto the probability simplex.

    Sort-and-threshold: with ``u`` sorted descending, the threshold is
    ``(cumsum(u)[rho] - 1) / (rho + 1)`` for the largest ``rho`` keeping
    ``u[rho]`` above it.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise InvalidInput("project_simplex expects a non-empty vector")
    return project_simplex_columns(v[:, None])[:, 0]


def project_simplex_columns(V):
    """Project every column of ``V`` onto the simplex."""
    V = np.asarray(V, dtype=np.float64)
    n = V.shape[0]
    U = -np.sort(-V, axis=0, kind="stable")
    css = np.cumsum(U, axis=0) - 1.0
    ks = np.arange(1, n + 1, dtype=np.float64)[:, None]
    cond = U - css / ks > 0
    rho = n - 1 - np.argmax(cond[::-1], axis=0)
    theta = css[rho, np.arange(V.shape[1])] / (rho + 1.0)
    return np.maximum(V - theta, 0.0)


def qp_objective(qp: ColumnQP, z) -> float:
    z = np.asarray(z, dtype=np.float64)
    if z.shape != qp.b.shape:
        raise DimensionMismatch(f"z has shape {z.shape}, expected {qp.b.shape}")
    return float(z @ qp.Q @ z + qp.b @ z)


def kkt_residual(Z, G):
    """Scaled simplex-KKT violation for each column of ``Z`` given gradients ``G``.

    On the support the gradient entries must agree; off the support they must
    not fall below the common value. The violation is divided by
    ``max(1, max|G|)`` so it is meaningful for large ``alpha`` or ``beta``.
    """
    support = Z > 0
    big = np.inf
    g_sup_max = np.where(support, G, -big).max(axis=0)
    g_sup_min = np.where(support, G, big).min(axis=0)
    g_off_min = np.where(support, big, G).min(axis=0)
    spread = g_sup_max - g_sup_min
    dual = np.maximum(0.0, g_sup_min - g_off_min)
    scale = np.maximum(1.0, np.abs(G).max(axis=0))
    return np.maximum(spread, dual) / scale


def lipschitz_constant(Q):
    """Gradient Lipschitz constant ``2 * lambda_max(Q)`` of ``z^T Q z``."""
    n = Q.shape[0]
    lam = eigh(Q, eigvals_only=True, subset_by_index=[n - 1, n - 1])[0]
    return 2.0 * max(lam, np.finfo(float).tiny)


def polish_support(Q, B, X):
    """Exact minimizer on the affine hull of each column's current support.

    For support ``S`` this solves ``2 Q_SS z + b_S = mu * 1``, ``sum(z) = 1``.
    Columns sharing a support share one Cholesky factorization. Returns the
    candidate matrix and a mask of columns whose candidate stayed
    nonnegative; other columns are copied unchanged.
    """
    n, m = X.shape
    out = X.copy()
    ok = np.zeros(m, dtype=bool)
    support = X > 0
    groups = {}
    for j in range(m):
        groups.setdefault(support[:, j].tobytes(), []).append(j)
    for key, cols in groups.items():
        S = np.flatnonzero(support[:, cols[0]])
        if S.size == 0:
            continue
        try:
            factor = cho_factor(Q[np.ix_(S, S)])
        except LinAlgError:
            continue
        u = cho_solve(factor, np.ones(S.size))
        V = cho_solve(factor, B[np.ix_(S, cols)])
        mu = (2.0 + V.sum(axis=0)) / u.sum()
        Zs = 0.5 * (np.outer(u, mu) - V)
        good = np.all(Zs >= 0, axis=0)
        if np.any(good):
            idx = np.asarray(cols)[good]
            Zs = Zs[:, good]
            Zs /= Zs.sum(axis=0)
            cand = np.zeros((n, idx.size))
            cand[S] = Zs
            out[:, idx] = cand
            ok[idx] = True
    return out, ok


def _equality_qp(Q, b, S):
    """Minimizer of ``z^T Q z + b^T z`` on ``{z : z_j = 0 off S, sum(z) = 1}``, restricted to S."""
    factor = cho_factor(Q[np.ix_(S, S)])
    u = cho_solve(factor, np.ones(S.size))
    v = cho_solve(factor, b[S])
    mu = (2.0 + v.sum()) / u.sum()
    return 0.5 * (mu * u - v)


def active_set_column(Q, b, z, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Primal active-set method for one simplex QP, started from feasible ``z``.

    The working set starts at the support of ``z``. Each iteration either
    moves to the equality-constrained minimizer on the working set, stops at
    the first blocking bound (dropping that index), or adds the index with
    the most negative multiplier. The objective never increases.

    Returns ``(z, residual, iterations)``.
    """
    n = b.size
    z = z.copy()
    working = z > 0
    if not working.any():
        working[np.argmin(np.diag(Q) + b)] = True
        z[:] = working
    for k in range(1, max_iter + 1):
        S = np.flatnonzero(working)
        try:
            p = _equality_qp(Q, b, S)
        except LinAlgError:
            break
        step = p - z[S]
        if np.all(p >= 0):
            z[:] = 0.0
            z[S] = p
            z /= z.sum()
            g = 2.0 * (Q @ z) + b
            res = kkt_residual(z[:, None], g[:, None])[0]
            if res <= tol or working.all():
                return z, res, k
            off = np.flatnonzero(~working)
            working[off[np.argmin(g[off])]] = True
        else:
            neg = step < 0
            ratios = np.full(S.size, np.inf)
            ratios[neg] = z[S][neg] / -step[neg]
            blocking = np.argmin(ratios)
            t = min(1.0, ratios[blocking])
            zS = z[S] + t * step
            zS[blocking] = 0.0
            zS = np.maximum(zS, 0.0)
            z[S] = zS / zS.sum()
            working[S[zS <= 0]] = False
    g = 2.0 * (Q @ z) + b
    return z, kkt_residual(z[:, None], g[:, None])[0], max_iter


@dataclass
class BatchResult:
    Z: np.ndarray
    residuals: np.ndarray
    n_iter: np.ndarray
    converged: np.ndarray
    history: list | None = None


def solve_simplex_columns(
    Q,
    B,
    Z0=None,
    tol=DEFAULT_TOL,
    max_iter=DEFAULT_MAX_ITER,
    lipschitz=None,
    polish_every=10,
    gradient_iter=100,
    record_history=False,
):
    """Solve ``min z^T Q z + b_i^T z`` on the simplex for every column ``b_i`` of ``B``.

    Columns are warm-started from ``Z0`` (projected onto the simplex first)
    and each column's objective never increases from one iteration to the
    next. Every ``polish_every`` iterations the exact minimizer on each
    column's current support replaces the iterate when it is feasible and no
    worse. Converged columns drop out of the active set.

    After ``gradient_iter`` accelerated iterations, columns that are still
    unconverged are finished by :func:`active_set_column`, which starts from
    the support the gradient phase has identified. Each phase is capped at
    ``max_iter`` iterations. No exception is raised on non-convergence;
    inspect ``BatchResult.converged``. With ``record_history`` the
    per-column objective after every iteration is kept in
    ``BatchResult.history``.
    """
    Q = np.asarray(Q, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    n, m = B.shape
    if Q.shape != (n, n):
        raise DimensionMismatch(f"Q {Q.shape} does not match b length {n}")
    L = lipschitz_constant(Q) if lipschitz is None else lipschitz
    if Z0 is None:
        X = np.full((n, m), 1.0 / n)
    else:
        X = project_simplex_columns(Z0)

    QX = Q @ X
    G = 2.0 * QX + B
    f = np.einsum("ij,ij->j", X, QX + B)
    res = kkt_residual(X, G)
    n_iter = np.zeros(m, dtype=np.int64)
    active = np.flatnonzero(res > tol)
    Y = X[:, active].copy()
    GY = G[:, active].copy()
    t = np.ones(active.size)
    history = [f.copy()] if record_history else None

    for it in range(min(max_iter, gradient_iter)):
        if active.size == 0:
            break
        if polish_every and it % polish_every == 0:
            _polish_active(Q, B, X, QX, G, f, res, active)
            keep = res[active] > tol
            Y, GY, t = Y[:, keep], GY[:, keep], t[keep]
            active = active[keep]
            if active.size == 0:
                break
        Xa = X[:, active]
        QXa = QX[:, active]
        Ba = B[:, active]
        Xn = project_simplex_columns(Y - GY / L)
        QXn = Q @ Xn
        fn = np.einsum("ij,ij->j", Xn, QXn + Ba)

        worse = fn > f[active]
        if np.any(worse):
            # momentum overshoot: fall back to a plain projected gradient step
            Xn[:, worse] = project_simplex_columns(Xa[:, worse] - G[:, active[worse]] / L)
            QXn[:, worse] = Q @ Xn[:, worse]
            fn[worse] = np.einsum("ij,ij->j", Xn[:, worse], QXn[:, worse] + Ba[:, worse])
            t[worse] = 1.0

        Gn = 2.0 * QXn + Ba
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        momentum = (t - 1.0) / t_next
        Y = Xn + momentum * (Xn - Xa)
        GY = Gn + 2.0 * momentum * (QXn - QXa)
        X[:, active] = Xn
        QX[:, active] = QXn
        G[:, active] = Gn
        f[active] = fn
        n_iter[active] += 1
        t = t_next
        if record_history:
            history.append(f.copy())

        r = kkt_residual(Xn, Gn)
        res[active] = r
        keep = r > tol
        if not np.all(keep):
            active = active[keep]
            Y, GY, t = Y[:, keep], GY[:, keep], t[keep]

    if polish_every and active.size:
        _polish_active(Q, B, X, QX, G, f, res, active)
        active = active[res[active] > tol]
    for j in active:
        z, r, k = active_set_column(Q, B[:, j], X[:, j], tol=tol, max_iter=max_iter)
        fz = z @ (Q @ z) + B[:, j] @ z
        if fz <= f[j] + 1e-12 * max(1.0, abs(f[j])):
            X[:, j], f[j], res[j] = z, fz, r
        n_iter[j] += k
    if record_history:
        history.append(f.copy())
    return BatchResult(X, res, n_iter, res <= tol, history)


def _polish_active(Q, B, X, QX, G, f, res, active):
    """Try :func:`polish_support` on ``active`` columns, updating state arrays in place."""
    Ba = B[:, active]
    cand, ok = polish_support(Q, Ba, X[:, active])
    if not np.any(ok):
        return
    cols = active[ok]
    Zc = cand[:, ok]
    QZc = Q @ Zc
    fc = np.einsum("ij,ij->j", Zc, QZc + Ba[:, ok])
    better = fc <= f[cols] + 1e-12 * np.maximum(1.0, np.abs(f[cols]))
    if not np.any(better):
        return
    cols = cols[better]
    X[:, cols] = Zc[:, better]
    QX[:, cols] = QZc[:, better]
    G[:, cols] = 2.0 * QZc[:, better] + B[:, cols]
    f[cols] = fc[better]
    res[cols] = kkt_residual(X[:, cols], G[:, cols])


def solve_column_qp(qp: ColumnQP, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, z0=None):
    """Minimize ``z^T Q z + b^T z`` over the simplex.

    Raises
    ------
    NotConverged
        If the KKT residual is still above ``tol`` after ``max_iter``
        iterations. The exception carries the (feasible) best iterate.
    """
    if not tol > 0 or max_iter < 1:
        raise InvalidInput("tol must be positive and max_iter at least 1")
    z0 = None if z0 is None else np.asarray(z0, dtype=np.float64)[:, None]
    out = solve_simplex_columns(qp.Q, qp.b[:, None], z0, tol=tol, max_iter=max_iter)
    z = out.Z[:, 0]
    if not out.converged[0]:
        raise NotConverged(
            f"simplex QP did not reach residual {tol:g} in {max_iter} iterations "
            f"(residual {out.residuals[0]:.3g})",
            best=z,
            residual=float(out.residuals[0]),
        )
    return z
