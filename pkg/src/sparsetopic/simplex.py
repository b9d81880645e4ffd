"""Maps onto the probability simplex: sparsemax, softmax and an exhaustive
projection oracle used by the tests.

All kernels operate on the last axis, so a 2-D array is treated as a stack
of independent row vectors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SparsePoint",
    "SparsemaxDegeneracyWarning",
    "sparsemax",
    "sparsemax_rows",
    "sparsemax_jvp",
    "sparsemax_rows_jvp",
    "softmax",
    "project_simplex_oracle",
]

ORACLE_MAX_DIM = 20


class SparsemaxDegeneracyWarning(RuntimeWarning):
    """A coordinate sits exactly on the support boundary (x_i == tau)."""


@dataclass(frozen=True)
class SparsePoint:
    """A point on the simplex together with the threshold that produced it.

    ``values[i] == max(0, x[i] - tau)`` for the generating input ``x``;
    entries outside the support are stored as exact zeros.
    """

    values: np.ndarray
    tau: float
    support: np.ndarray  # sorted int indices with values > 0
    degenerate: bool = False

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def n_active(self) -> int:
        return int(self.support.size)

    def indicator(self) -> np.ndarray:
        s = np.zeros(self.dim)
        s[self.support] = 1.0
        return s


def _check_finite(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains NaN or infinite entries")


def _threshold(x: np.ndarray) -> np.ndarray:
    """Row-wise tau(x) by the sort rule; returns shape x.shape[:-1]."""
    d = x.shape[-1]
    z = -np.sort(-x, axis=-1)
    cumsum = np.cumsum(z, axis=-1)
    k = np.arange(1, d + 1, dtype=x.dtype)
    # the condition holds for a prefix of k, so counting gives T(x)
    support_size = np.count_nonzero(1.0 + k * z > cumsum, axis=-1)
    idx = np.expand_dims(support_size - 1, -1)
    tau = (np.take_along_axis(cumsum, idx, axis=-1)[..., 0] - 1.0) / support_size
    return tau


def sparsemax_rows(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised sparsemax over the last axis.

    Returns ``(values, tau)`` with exact zeros outside the support.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] < 1:
        raise ValueError("sparsemax needs at least one coordinate")
    _check_finite(x)
    tau = _threshold(x)
    values = np.maximum(x - tau[..., None], 0.0)
    return values, tau


def sparsemax(x) -> SparsePoint:
    """Euclidean projection of a vector onto the probability simplex.

    >>> sparsemax([1.1, 0.5, 0.05]).values
    array([0.8, 0.2, 0. ])
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {x.shape}")
    values, tau = sparsemax_rows(x)
    tau = float(tau)
    support = np.flatnonzero(values > 0)
    degenerate = bool(np.any(x[values == 0] == tau))
    return SparsePoint(values=values, tau=tau, support=support, degenerate=degenerate)


def sparsemax_rows_jvp(values: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Jacobian-vector product of sparsemax given its output ``values``.

    The Jacobian ``Diag(s) - s s^T / |S|`` is symmetric, so the same map
    serves as the vector-Jacobian product in backpropagation.
    """
    s = (values > 0).astype(np.float64)
    n_active = s.sum(axis=-1, keepdims=True)
    mean_on_support = (s * v).sum(axis=-1, keepdims=True) / n_active
    return s * (v - mean_on_support)


def sparsemax_jvp(x, v) -> np.ndarray:
    """Directional derivative of sparsemax at ``x`` along ``v``.

    At a boundary tie the one-sided derivative for the computed support is
    returned and a :class:`SparsemaxDegeneracyWarning` is emitted.
    """
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if x.shape != v.shape:
        raise ValueError(f"shape mismatch: x {x.shape} vs v {v.shape}")
    point = sparsemax(x)
    if point.degenerate:
        warnings.warn(
            "sparsemax input has a coordinate exactly at the threshold; "
            "returning the one-sided derivative",
            SparsemaxDegeneracyWarning,
            stacklevel=2,
        )
    return sparsemax_rows_jvp(point.values, v)


def softmax(x) -> np.ndarray:
    """exp(x - max x) normalised over the last axis."""
    x = np.asarray(x, dtype=np.float64)
    _check_finite(x)
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def project_simplex_oracle(x) -> np.ndarray:
    """Brute-force projection onto the simplex.

    Every non-empty support S is tried: the equality-constrained minimiser
    on S is ``p_S = x_S - tau_S`` with ``tau_S = (sum(x_S) - 1) / |S|``.
    Among candidates with ``p_S >= 0`` the one closest to ``x`` wins.
    Subset sums, minima and sizes are built by doubling over coordinates,
    so the cost is O(2^d) per vector.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("oracle works on a single vector")
    d = x.shape[0]
    if d > ORACLE_MAX_DIM:
        raise ValueError(f"oracle limited to d <= {ORACLE_MAX_DIM}, got {d}")
    if d < 1:
        raise ValueError("need at least one coordinate")

    sums = np.zeros(1)
    sq = np.zeros(1)
    size = np.zeros(1, dtype=np.int64)
    mins = np.full(1, np.inf)
    for xi in x:
        sums = np.concatenate([sums, sums + xi])
        sq = np.concatenate([sq, sq + xi * xi])
        size = np.concatenate([size, size + 1])
        mins = np.concatenate([mins, np.minimum(mins, xi)])
    # drop the empty set
    sums, sq, size, mins = sums[1:], sq[1:], size[1:], mins[1:]
    tau = (sums - 1.0) / size
    feasible = mins >= tau
    # ||p - x||^2 = |S| tau^2 + sum_{i not in S} x_i^2
    objective = size * tau**2 + (x @ x - sq)
    objective[~feasible] = np.inf
    best = int(np.argmin(objective)) + 1  # mask index, offset for the empty set
    members = np.array([(best >> i) & 1 for i in range(d)], dtype=bool)
    p = np.zeros(d)
    p[members] = x[members] - tau[best - 1]
    return np.maximum(p, 0.0)
