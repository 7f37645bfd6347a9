"""Kernel construction, the standard kernel bank and weighted combination.

Kernel specs are short strings understood by :func:`parse_kernel_spec`::

    gaussian:t=<real>      exp(-||x - y||^2 / (t * d_max^2))
    linear                 x^T y
    poly:a=<real>,b=<int>  (a + x^T y)^b
    bank:standard          the twelve kernels of :func:`build_standard_bank`
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist, squareform

from ._validation import as_data, check_kernel
from .exceptions import DegenerateData, DimensionMismatch, InvalidConfig, InvalidInput

STANDARD_GAUSSIAN_T = (0.01, 0.05, 0.1, 1, 10, 50, 100)
STANDARD_POLY = ((0, 2), (0, 4), (1, 2), (1, 4))


@dataclass
class KernelBank:
    """An ordered stack of same-sized kernel matrices, shape ``(r, n, n)``."""

    kernels: np.ndarray
    descriptors: list = field(default_factory=list)

    def __post_init__(self):
        kernels = np.asarray(self.kernels, dtype=np.float64)
        if kernels.ndim == 2:
            kernels = kernels[None]
        if kernels.ndim != 3 or kernels.shape[0] < 1 or kernels.shape[1] != kernels.shape[2]:
            raise DimensionMismatch(f"kernel bank must have shape (r, n, n), got {kernels.shape}")
        self.kernels = kernels
        if not self.descriptors:
            self.descriptors = [f"kernel{i}" for i in range(kernels.shape[0])]
        if len(self.descriptors) != kernels.shape[0]:
            raise DimensionMismatch("one descriptor per kernel required")

    @property
    def r(self) -> int:
        return self.kernels.shape[0]

    @property
    def n(self) -> int:
        return self.kernels.shape[1]

    def __len__(self):
        return self.r

    def __getitem__(self, i):
        return self.kernels[i]


def squared_distances(X):
    X = as_data(X)
    return squareform(pdist(X, "sqeuclidean"))


def gaussian_kernel(X, t, d_max_sq=None):
    """Gaussian kernel with bandwidth relative to the largest pairwise distance.

    ``d_max_sq`` may be passed to reuse a precomputed squared diameter.
    """
    if not t > 0:
        raise InvalidInput(f"gaussian bandwidth t must be positive, got {t}")
    D2 = squared_distances(X)
    if d_max_sq is None:
        d_max_sq = D2.max()
    if d_max_sq <= 0:
        raise DegenerateData("all samples are identical; d_max is zero")
    return np.exp(-D2 / (t * d_max_sq))


def linear_kernel(X):
    X = as_data(X)
    return X @ X.T


def polynomial_kernel(X, a, b):
    if int(b) != b or b < 1:
        raise InvalidInput(f"polynomial degree must be a positive integer, got {b}")
    return (a + linear_kernel(X)) ** int(b)


def rescale_kernel(K):
    """Divide ``K`` by its largest entry so the maximum becomes 1."""
    K = np.asarray(K, dtype=np.float64)
    top = K.max()
    if not np.any(K) or top <= 0:
        raise DegenerateData("cannot rescale a kernel without a positive entry")
    return K / top


def parse_kernel_spec(spec: str):
    """Split ``"name:k=v,k=v"`` into ``(name, {k: float})``."""
    spec = spec.strip()
    name, _, rest = spec.partition(":")
    name = name.strip().lower()
    params = {}
    if rest:
        for item in rest.split(","):
            key, sep, value = item.partition("=")
            if not sep:
                if name == "bank":
                    params["name"] = key.strip()
                    continue
                raise InvalidConfig(f"malformed kernel parameter {item!r} in {spec!r}")
            try:
                params[key.strip()] = float(value)
            except ValueError:
                raise InvalidConfig(f"non-numeric kernel parameter {item!r} in {spec!r}") from None
    allowed = {"gaussian": {"t"}, "linear": set(), "poly": {"a", "b"}, "bank": {"name"}}
    if name not in allowed:
        raise InvalidConfig(f"unknown kernel {name!r}")
    missing = allowed[name] - set(params)
    extra = set(params) - allowed[name]
    if missing or extra:
        raise InvalidConfig(f"kernel {name!r} expects parameters {sorted(allowed[name])}, got {spec!r}")
    if name == "bank" and params["name"] != "standard":
        raise InvalidConfig(f"unknown kernel bank {params['name']!r}")
    return name, params


def _fmt(v):
    return f"{v:g}"


def kernel_from_spec(X, spec: str, rescale=False):
    """Build one kernel from a spec string; returns ``(K, descriptor)``."""
    name, params = parse_kernel_spec(spec)
    if name == "gaussian":
        K, desc = gaussian_kernel(X, params["t"]), f"gaussian:t={_fmt(params['t'])}"
    elif name == "linear":
        K, desc = linear_kernel(X), "linear"
    elif name == "poly":
        a, b = params["a"], params["b"]
        K, desc = polynomial_kernel(X, a, b), f"poly:a={_fmt(a)},b={int(b)}"
    else:
        raise InvalidConfig("a kernel bank is not a single kernel; use bank_from_specs")
    if rescale:
        K = rescale_kernel(K)
    return K, desc


def build_standard_bank(X) -> KernelBank:
    """Seven Gaussian, one linear and four polynomial kernels, each rescaled to max 1.

    Order: Gaussian with t ascending over ``STANDARD_GAUSSIAN_T``, then linear,
    then polynomial ``(a, b)`` over ``STANDARD_POLY``.
    """
    D2 = squared_distances(X)
    d_max_sq = D2.max()
    if d_max_sq <= 0:
        raise DegenerateData("all samples are identical; d_max is zero")
    kernels, descriptors = [], []
    for t in STANDARD_GAUSSIAN_T:
        kernels.append(rescale_kernel(np.exp(-D2 / (t * d_max_sq))))
        descriptors.append(f"gaussian:t={_fmt(t)}")
    lin = linear_kernel(X)
    kernels.append(rescale_kernel(lin))
    descriptors.append("linear")
    for a, b in STANDARD_POLY:
        kernels.append(rescale_kernel((a + lin) ** b))
        descriptors.append(f"poly:a={a},b={b}")
    return KernelBank(np.stack(kernels), descriptors)


def bank_from_specs(X, specs, rescale=True) -> KernelBank:
    """Build a bank from a list of spec strings; ``bank:standard`` expands in place."""
    if isinstance(specs, str):
        specs = [s for s in specs.split(";") if s.strip()]
    kernels, descriptors = [], []
    for spec in specs:
        name, _ = parse_kernel_spec(spec)
        if name == "bank":
            bank = build_standard_bank(X)
            kernels.extend(bank.kernels)
            descriptors.extend(bank.descriptors)
        else:
            K, desc = kernel_from_spec(X, spec, rescale=rescale)
            kernels.append(K)
            descriptors.append(desc)
    if not kernels:
        raise InvalidConfig("no kernels specified")
    return KernelBank(np.stack(kernels), descriptors)


def uniform_weights(r):
    """Uniform weights on the constraint surface sum(sqrt(w)) = 1, i.e. ``1/r**2``."""
    return np.full(r, 1.0 / r**2)


def combine(bank: KernelBank, w) -> np.ndarray:
    """Consensus kernel ``sum_i w_i K^i``."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (bank.r,):
        raise DimensionMismatch(f"expected {bank.r} weights, got shape {w.shape}")
    if np.any(w < 0):
        raise InvalidInput("kernel weights must be nonnegative")
    return np.tensordot(w, bank.kernels, axes=1)


def check_bank(bank: KernelBank, check_psd=False):
    for K in bank.kernels:
        check_kernel(K, check_psd=check_psd)
    return bank


def data_fingerprint(X) -> str:
    X = np.ascontiguousarray(as_data(X))
    h = hashlib.sha256()
    h.update(str(X.shape).encode())
    h.update(X.tobytes())
    return h.hexdigest()


def cached_bank(X, specs, cache_dir, rescale=True) -> KernelBank:
    """Like :func:`bank_from_specs` but stores results as ``.npz`` keyed by data hash and specs."""
    if isinstance(specs, str):
        specs = [s for s in specs.split(";") if s.strip()]
    key = hashlib.sha256(
        (data_fingerprint(X) + "|" + ";".join(specs) + f"|rescale={rescale}").encode()
    ).hexdigest()[:32]
    path = Path(cache_dir) / f"kernels-{key}.npz"
    if path.is_file():
        with np.load(path, allow_pickle=False) as f:
            return KernelBank(f["kernels"], [str(d) for d in f["descriptors"]])
    bank = bank_from_specs(X, specs, rescale=rescale)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, kernels=bank.kernels, descriptors=np.array(bank.descriptors))
    return bank
