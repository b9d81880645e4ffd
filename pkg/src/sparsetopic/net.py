"""Feedforward machinery written directly in numpy: the inference network
with explicit backpropagation, Adam, a finite-difference gradient checker
and array checkpoints.

Parameters live in flat ``dict[str, ndarray]`` stores so the optimizer,
the gradient checker and the checkpoint writer can treat every model the
same way.  Weight matrices are stored (out, in) and applied to row batches
as ``X @ W.T``.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .gaussian import DiagGaussian

__all__ = [
    "NumericalError",
    "CheckpointError",
    "glorot_uniform",
    "init_encoder",
    "EncoderCache",
    "encoder_forward",
    "encoder_backward",
    "encode",
    "encode_backward",
    "Adam",
    "GradCheckReport",
    "check_gradients_report",
    "check_gradients",
    "save_arrays",
    "load_arrays",
]

ENCODER_LAYERS = ("1", "2", "mu", "logstd")
CHECKPOINT_FORMAT = "sparsetopic-checkpoint/1"


class NumericalError(ArithmeticError):
    """Non-finite values appeared; ``where`` names the offending stage."""

    def __init__(self, message: str, where: str | None = None):
        super().__init__(message)
        self.where = where


class CheckpointError(ValueError):
    pass


def glorot_uniform(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_out, fan_in))


def init_encoder(rng: np.random.Generator, n_terms: int, hidden: int, latent: int,
                 logstd_bias: float = -1.0) -> dict[str, np.ndarray]:
    return {
        "enc.W1": glorot_uniform(rng, hidden, n_terms),
        "enc.b1": np.zeros(hidden),
        "enc.W2": glorot_uniform(rng, hidden, hidden),
        "enc.b2": np.zeros(hidden),
        "enc.Wmu": glorot_uniform(rng, latent, hidden),
        "enc.bmu": np.zeros(latent),
        "enc.Wlogstd": glorot_uniform(rng, latent, hidden),
        "enc.blogstd": np.full(latent, float(logstd_bias)),
    }


def _finite_or_raise(a: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(a)):
        raise NumericalError(f"non-finite activations in {where}", where=where)


@dataclass
class EncoderCache:
    inputs: np.ndarray
    pre1: np.ndarray
    h1: np.ndarray
    pre2: np.ndarray
    h2: np.ndarray  # after dropout
    mask: np.ndarray | None


def encoder_forward(params: Mapping[str, np.ndarray], inputs: np.ndarray,
                    dropout_mask: np.ndarray | None = None):
    """Batched inference network.

    ``inputs`` is (B, |V|).  ``dropout_mask`` (B, hidden) is applied to the
    second hidden layer and should already include the 1/(1-rate) scaling.
    Returns ``(mu, logstd, cache)``.
    """
    # overflow is reported below with the layer name instead of a warning
    with np.errstate(over="ignore", invalid="ignore"):
        pre1 = inputs @ params["enc.W1"].T + params["enc.b1"]
        h1 = np.maximum(pre1, 0.0)
        pre2 = h1 @ params["enc.W2"].T + params["enc.b2"]
        h2 = np.maximum(pre2, 0.0)
        if dropout_mask is not None:
            h2 = h2 * dropout_mask
    _finite_or_raise(h2, "encoder hidden layers")
    with np.errstate(over="ignore", invalid="ignore"):
        mu = h2 @ params["enc.Wmu"].T + params["enc.bmu"]
        logstd = h2 @ params["enc.Wlogstd"].T + params["enc.blogstd"]
    _finite_or_raise(mu, "encoder mean head")
    _finite_or_raise(logstd, "encoder log-stddev head")
    return mu, logstd, EncoderCache(inputs, pre1, h1, pre2, h2, dropout_mask)


def encoder_backward(params: Mapping[str, np.ndarray], cache: EncoderCache | None,
                     d_mu: np.ndarray, d_logstd: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of the encoder weights given upstream d/dmu and d/dlogstd."""
    if cache is None:
        raise RuntimeError("encoder_backward needs the cache of a forward pass")
    grads = {
        "enc.Wmu": d_mu.T @ cache.h2,
        "enc.bmu": d_mu.sum(0),
        "enc.Wlogstd": d_logstd.T @ cache.h2,
        "enc.blogstd": d_logstd.sum(0),
    }
    d_h2 = d_mu @ params["enc.Wmu"] + d_logstd @ params["enc.Wlogstd"]
    if cache.mask is not None:
        d_h2 = d_h2 * cache.mask
    d_pre2 = d_h2 * (cache.pre2 > 0)
    grads["enc.W2"] = d_pre2.T @ cache.h1
    grads["enc.b2"] = d_pre2.sum(0)
    d_pre1 = (d_pre2 @ params["enc.W2"]) * (cache.pre1 > 0)
    grads["enc.W1"] = d_pre1.T @ cache.inputs
    grads["enc.b1"] = d_pre1.sum(0)
    return grads


def encode(params: Mapping[str, np.ndarray], bow) -> DiagGaussian:
    """Posterior q(x | w) for one document vector (evaluation mode)."""
    bow = np.asarray(bow, dtype=np.float64)
    mu, logstd, _ = encoder_forward(params, bow[None, :])
    std = np.exp(logstd[0])
    _finite_or_raise(std, "encoder stddev")
    return DiagGaussian(mu[0], std)


def encode_backward(params, bow, d_mu, d_logstd) -> dict[str, np.ndarray]:
    """Single-document convenience wrapper around :func:`encoder_backward`."""
    bow = np.asarray(bow, dtype=np.float64)[None, :]
    _, _, cache = encoder_forward(params, bow)
    return encoder_backward(params, cache, np.atleast_2d(d_mu), np.atleast_2d(d_logstd))


class Adam:
    """Adam with bias correction; updates the parameter dict in place."""

    def __init__(self, params: Mapping[str, np.ndarray], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.step_count = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> None:
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                bad = int(np.size(g) - np.isfinite(g).sum())
                raise NumericalError(f"{bad} non-finite gradient entries in {name!r}", where=name)
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1**t
        c2 = 1.0 - self.beta2**t
        for name, g in grads.items():
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[name] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {f"adam.m.{k}": v for k, v in self.m.items()}
        out.update({f"adam.v.{k}": v for k, v in self.v.items()})
        out["adam.step"] = np.array(self.step_count)
        return out


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst: tuple[str, int] | None
    n_checked: int
    kinks: list[tuple[str, int]] = field(default_factory=list)


def check_gradients_report(f: Callable[[dict[str, np.ndarray]], float],
                           params: Mapping[str, np.ndarray],
                           grads: Mapping[str, np.ndarray],
                           h: float = 1e-5,
                           max_coords: int | None = None,
                           seed: int = 0,
                           floor: float | str = 1e-7,
                           kink_tol: float = 1e-2) -> GradCheckReport:
    """Compare analytic ``grads`` with central differences of ``f``.

    The relative error of a coordinate is ``|a - n| / max(|a|, |n|, floor)``.
    ``floor="auto"`` uses the central-difference roundoff ``eps * max(|f|, 1) / h``
    divided by 1e-4: a gradient entry smaller than that cannot be resolved to
    1e-4 relative accuracy in float64, so its error is measured against the
    floor instead.
    A coordinate whose one-sided differences disagree by more than
    ``kink_tol`` (relative) straddles a non-differentiable point and is
    reported in ``kinks`` instead of being scored.  With ``max_coords`` a
    seeded random subset of each array is checked.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    rng = np.random.default_rng(seed)
    work = {k: np.array(v, dtype=np.float64, copy=True) for k, v in params.items()}
    f0 = f(work)
    if floor == "auto":
        floor = 1e4 * np.finfo(float).eps * max(abs(f0), 1.0) / h
    worst_err, worst_at, n_checked, kinks = 0.0, None, 0, []
    for name in grads:
        arr = work[name]
        flat = arr.reshape(-1)
        analytic = np.asarray(grads[name]).reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        for i in coords:
            orig = flat[i]
            flat[i] = orig + h
            fp = f(work)
            flat[i] = orig - h
            fm = f(work)
            flat[i] = orig
            numeric = (fp - fm) / (2 * h)
            fwd, bwd = (fp - f0) / h, (f0 - fm) / h
            if abs(fwd - bwd) > kink_tol * max(abs(fwd), abs(bwd), 1.0):
                kinks.append((name, int(i)))
                continue
            a = analytic[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            n_checked += 1
            if err > worst_err:
                worst_err, worst_at = err, (name, int(i))
    return GradCheckReport(worst_err, worst_at, n_checked, kinks)


def check_gradients(f, params, grads, h: float = 1e-5, **kwargs) -> float:
    """Worst per-coordinate relative error between analytic and numeric grads."""
    return check_gradients_report(f, params, grads, h=h, **kwargs).max_rel_error


def save_arrays(path, arrays: Mapping[str, np.ndarray], meta: Mapping) -> None:
    """Atomically write arrays and a JSON header to an ``.npz`` file."""
    path = os.fspath(path)
    payload = {k: np.asarray(v) for k, v in arrays.items()}
    header = dict(meta, format=CHECKPOINT_FORMAT)
    payload["__meta__"] = np.array(json.dumps(header, sort_keys=True))
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".ckpt-", suffix=".npz", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez(fh, **payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_arrays(path) -> tuple[dict[str, np.ndarray], dict]:
    with np.load(os.fspath(path), allow_pickle=False) as data:
        if "__meta__" not in data.files:
            raise CheckpointError(f"{path}: not a checkpoint (missing header)")
        meta = json.loads(str(data["__meta__"]))
        arrays = {k: data[k] for k in data.files if k != "__meta__"}
    if meta.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(
            f"{path}: checkpoint format {meta.get('format')!r}, expected {CHECKPOINT_FORMAT!r}"
        )
    return arrays, meta
