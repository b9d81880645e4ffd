"""Gaussian-sparsemax topic models (NSMDM and NSMTM).

Both models share the generative skeleton

    x_j ~ N(mu0, sigma0^2 I),   theta_j = sparsemax(W^T x_j),

and differ in the word model.  NSMDM keeps an unnormalised topic
dictionary ``phi_k = S^T t_k`` and emits words from
``softmax(phi^T theta_j)``.  NSMTM normalises each topic with sparsemax,
``phi_k = sparsemax(S^T t_k)``, and emits from the mixture ``phi^T theta_j``.

Training maximises the reconstruction log-likelihood minus ``gamma`` times
the relaxed Wasserstein divergence between the inference network's
Gaussian and the prior, using one reparameterised sample per document.
Gradients are propagated through the exact sparsemax Jacobians.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import __version__
from .corpus import BowDocument, Corpus, Vocabulary
from .gaussian import DiagGaussian
from .net import (
    Adam,
    CheckpointError,
    NumericalError,
    encoder_backward,
    encoder_forward,
    glorot_uniform,
    init_encoder,
    load_arrays,
    save_arrays,
)
from .simplex import SparsePoint, softmax, sparsemax, sparsemax_rows, sparsemax_rows_jvp

log = logging.getLogger(__name__)

__all__ = [
    "NSMDM",
    "NSMTM",
    "TrainConfig",
    "DocPosterior",
    "TopicModel",
    "TrainingDiverged",
    "TrainResult",
    "decode_nsmdm",
    "decode_nsmtm",
    "batch_forward",
    "batch_backward",
    "elbo",
    "elbo_backward",
    "train",
    "infer_theta",
    "top_words",
]

NSMDM = "nsmdm"
NSMTM = "nsmtm"
VARIANTS = (NSMDM, NSMTM)
REGULARIZERS = ("rw", "kl")


@dataclass(frozen=True)
class TrainConfig:
    variant: str = NSMTM
    n_topics: int = 50
    latent_dim: int = 64
    embed_dim: int = 128
    hidden: int = 256
    gamma: float = 0.5
    lr: float = 1e-3
    epochs: int = 20
    batch_size: int = 64
    seed: int = 0
    mu0: float = 0.0
    sigma0: float = 1.0
    dropout: float = 0.2
    eps_floor: float = 1e-10
    regularizer: str = "rw"
    # initial scale of the decoder projection W and of the embeddings t, S
    decoder_init_scale: float = 1.0
    embed_init_scale: float = 1.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.regularizer not in REGULARIZERS:
            raise ValueError(f"regularizer must be one of {REGULARIZERS}")
        if self.n_topics < 2:
            raise ValueError("need at least two topics")
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise ValueError("gamma must be finite and non-negative")
        if self.eps_floor <= 0:
            raise ValueError("eps_floor must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be positive")
        for name in ("latent_dim", "embed_dim", "hidden", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "TrainConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def init_params(cfg: TrainConfig, n_terms: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    params = init_encoder(rng, n_terms, cfg.hidden, cfg.latent_dim)
    params["gen.W"] = cfg.decoder_init_scale * glorot_uniform(rng, cfg.latent_dim, cfg.n_topics)
    params["gen.t"] = cfg.embed_init_scale * glorot_uniform(rng, cfg.n_topics, cfg.embed_dim)
    params["gen.S"] = cfg.embed_init_scale * glorot_uniform(rng, cfg.embed_dim, n_terms)
    return params


# --------------------------------------------------------------------------
# decoders


def _theta_values(theta) -> np.ndarray:
    return theta.values if isinstance(theta, SparsePoint) else np.asarray(theta, dtype=np.float64)


def decode_nsmdm(topic_rows: np.ndarray, theta) -> np.ndarray:
    """softmax(sum_k theta_k phi_k) for unnormalised topic rows (K, |V|)."""
    return softmax(_theta_values(theta) @ topic_rows)


def decode_nsmtm(topic_dists: np.ndarray, theta) -> np.ndarray:
    """Mixture of simplex rows; exact zeros are kept."""
    return _theta_values(theta) @ topic_dists


# --------------------------------------------------------------------------
# batched objective


@dataclass
class BatchCache:
    cfg: TrainConfig
    gamma: float
    counts: np.ndarray
    lengths: np.ndarray
    eps: np.ndarray
    enc: object
    mu: np.ndarray
    std: np.ndarray
    xhat: np.ndarray
    theta: np.ndarray
    topic_rows: np.ndarray  # S^T t, (K, V)
    phi: np.ndarray  # topic dists actually used by the decoder
    word_probs: np.ndarray  # psi (NSMDM) or floored mixture (NSMTM)
    active: np.ndarray | None  # NSMTM: mixture entries above the floor


@dataclass
class LossParts:
    loss: float
    recon: float  # mean negative log-likelihood per document
    reg: float  # mean gamma * divergence per document
    n_floored: int = 0
    n_degenerate: int = 0


def _regularizer(cfg: TrainConfig, mu: np.ndarray, std: np.ndarray) -> np.ndarray:
    if cfg.regularizer == "rw":
        return ((mu - cfg.mu0) ** 2).sum(1) + ((std - cfg.sigma0) ** 2).sum(1)
    ratio = std / cfg.sigma0
    return (
        -np.log(ratio) + 0.5 * ratio**2 + 0.5 * ((mu - cfg.mu0) / cfg.sigma0) ** 2 - 0.5
    ).sum(1)


def _regularizer_grad(cfg: TrainConfig, mu: np.ndarray, std: np.ndarray):
    if cfg.regularizer == "rw":
        return 2.0 * (mu - cfg.mu0), 2.0 * (std - cfg.sigma0)
    return (mu - cfg.mu0) / cfg.sigma0**2, -1.0 / std + std / cfg.sigma0**2


def _count_degenerate(x: np.ndarray, values: np.ndarray) -> int:
    tau = (x - values)[np.arange(x.shape[0]), values.argmax(1)]
    return int(np.count_nonzero((values == 0) & (x == tau[:, None])))


def batch_forward(params: Mapping[str, np.ndarray], cfg: TrainConfig, counts: np.ndarray,
                  eps: np.ndarray, dropout_mask: np.ndarray | None = None,
                  gamma: float | None = None) -> tuple[LossParts, BatchCache]:
    """Mean per-document negative bound over a batch of count vectors.

    ``eps`` (B, d) is the standard-normal noise of the reparameterised
    sample; passing zeros evaluates the bound at the posterior mean.
    """
    gamma = cfg.gamma if gamma is None else gamma
    counts = np.asarray(counts, dtype=np.float64)
    lengths = counts.sum(1)
    if np.any(lengths <= 0):
        raise ValueError("every document in the batch must be non-empty")
    mu, logstd, enc_cache = encoder_forward(params, counts / lengths[:, None], dropout_mask)
    with np.errstate(over="ignore"):
        std = np.exp(logstd)
    if not np.all(np.isfinite(std)):
        raise NumericalError("encoder stddev overflowed", where="encoder stddev")
    xhat = mu + std * eps
    z = xhat @ params["gen.W"]
    theta, _ = sparsemax_rows(z)
    n_degenerate = _count_degenerate(z, theta)
    topic_rows = params["gen.t"] @ params["gen.S"]

    n_floored = 0
    active = None
    if cfg.variant == NSMDM:
        phi = topic_rows
        logits = theta @ phi
        logits = logits - logits.max(1, keepdims=True)
        log_psi = logits - np.log(np.exp(logits).sum(1, keepdims=True))
        word_probs = np.exp(log_psi)
        recon = -(counts * log_psi).sum(1)
    else:
        phi, _ = sparsemax_rows(topic_rows)
        n_degenerate += _count_degenerate(topic_rows, phi)
        mix = theta @ phi
        active = mix > cfg.eps_floor
        word_probs = np.where(active, mix, cfg.eps_floor)
        observed = counts > 0
        n_floored = int(np.count_nonzero(observed & ~active))
        recon = -(counts * np.log(word_probs)).sum(1)

    reg = gamma * _regularizer(cfg, mu, std)
    loss = float(np.mean(recon + reg))
    if not np.isfinite(loss):
        term = "reconstruction" if not np.all(np.isfinite(recon)) else "regularizer"
        raise NumericalError(f"non-finite loss in the {term} term", where=term)
    parts = LossParts(loss, float(recon.mean()), float(reg.mean()), n_floored, n_degenerate)
    cache = BatchCache(cfg, gamma, counts, lengths, eps, enc_cache, mu, std, xhat, theta,
                       topic_rows, phi, word_probs, active)
    return parts, cache


def batch_backward(params: Mapping[str, np.ndarray], cache: BatchCache) -> dict[str, np.ndarray]:
    """Exact gradient of :func:`batch_forward`'s loss w.r.t. every parameter."""
    cfg = cache.cfg
    B = cache.counts.shape[0]
    if cfg.variant == NSMDM:
        g_logits = (cache.lengths[:, None] * cache.word_probs - cache.counts) / B
        d_theta = g_logits @ cache.phi.T
        d_rows = cache.theta.T @ g_logits
    else:
        g_mix = np.where(cache.active, -cache.counts / cache.word_probs, 0.0) / B
        d_theta = g_mix @ cache.phi.T
        d_rows = sparsemax_rows_jvp(cache.phi, cache.theta.T @ g_mix)

    grads = {
        "gen.t": d_rows @ params["gen.S"].T,
        "gen.S": params["gen.t"].T @ d_rows,
    }
    d_z = sparsemax_rows_jvp(cache.theta, d_theta)
    grads["gen.W"] = cache.xhat.T @ d_z
    d_xhat = d_z @ params["gen.W"].T

    g_mu, g_std = _regularizer_grad(cfg, cache.mu, cache.std)
    d_mu = d_xhat + (cache.gamma / B) * g_mu
    d_std = d_xhat * cache.eps + (cache.gamma / B) * g_std
    d_logstd = d_std * cache.std
    grads.update(encoder_backward(params, cache.enc, d_mu, d_logstd))
    return grads


def elbo(params: Mapping[str, np.ndarray], cfg: TrainConfig, doc: BowDocument, eps,
         gamma: float | None = None, n_terms: int | None = None) -> tuple[float, BatchCache]:
    """Negative variational bound of a single document (loss to minimise)."""
    if doc.length < 1:
        raise ValueError("empty document")
    n_terms = params["gen.S"].shape[1] if n_terms is None else n_terms
    counts = doc.dense(n_terms)[None, :]
    parts, cache = batch_forward(params, cfg, counts, np.atleast_2d(eps), gamma=gamma)
    return parts.loss, cache


def elbo_backward(params: Mapping[str, np.ndarray], cache: BatchCache) -> dict[str, np.ndarray]:
    return batch_backward(params, cache)


# --------------------------------------------------------------------------
# model object


@dataclass
class DocPosterior:
    latent: DiagGaussian
    theta: SparsePoint


@dataclass
class TopicModel:
    cfg: TrainConfig
    vocab: Vocabulary
    params: dict[str, np.ndarray]

    @classmethod
    def initialize(cls, cfg: TrainConfig, vocab: Vocabulary, seed: int | None = None) -> "TopicModel":
        seed = cfg.seed if seed is None else seed
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
        return cls(cfg, vocab, init_params(cfg, len(vocab), rng))

    @property
    def n_terms(self) -> int:
        return len(self.vocab)

    def copy(self) -> "TopicModel":
        return TopicModel(self.cfg, self.vocab, {k: v.copy() for k, v in self.params.items()})

    def topic_rows(self) -> np.ndarray:
        """Unnormalised topic-word scores S^T t_k, shape (K, |V|)."""
        return self.params["gen.t"] @ self.params["gen.S"]

    def topic_matrix(self) -> np.ndarray:
        """phi as used by the decoder: sparsemax rows (NSMTM) or raw rows (NSMDM)."""
        rows = self.topic_rows()
        if self.cfg.variant == NSMTM:
            return sparsemax_rows(rows)[0]
        return rows

    def topic_distributions(self) -> np.ndarray:
        """Per-topic word distributions; NSMDM rows are softmax-normalised."""
        rows = self.topic_rows()
        return sparsemax_rows(rows)[0] if self.cfg.variant == NSMTM else softmax(rows)

    def posterior(self, counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Evaluation-mode posterior mean and stddev for count rows (B, |V|)."""
        counts = np.atleast_2d(np.asarray(counts, dtype=np.float64))
        lengths = counts.sum(1, keepdims=True)
        if np.any(lengths <= 0):
            raise ValueError("empty document")
        mu, logstd, _ = encoder_forward(self.params, counts / lengths)
        return mu, np.exp(logstd)

    def thetas(self, counts: np.ndarray) -> np.ndarray:
        mu, _ = self.posterior(counts)
        return sparsemax_rows(mu @ self.params["gen.W"])[0]

    def word_distributions(self, theta: np.ndarray) -> np.ndarray:
        """Decoder output for a batch of topic proportions (B, K)."""
        theta = np.atleast_2d(theta)
        if self.cfg.variant == NSMDM:
            return decode_nsmdm(self.topic_rows(), theta)
        return decode_nsmtm(self.topic_matrix(), theta)

    def loss(self, corpus: Corpus, batch_size: int = 512, gamma: float | None = None) -> float:
        """Deterministic mean loss (posterior-mean latent, no dropout)."""
        total, n = 0.0, len(corpus)
        for start in range(0, n, batch_size):
            rows = range(start, min(start + batch_size, n))
            counts = corpus.count_matrix(rows)
            eps = np.zeros((counts.shape[0], self.cfg.latent_dim))
            parts, _ = batch_forward(self.params, self.cfg, counts, eps, gamma=gamma)
            total += parts.loss * counts.shape[0]
        return total / n

    def save(self, path, extra: Mapping | None = None) -> None:
        meta = {
            "version": __version__,
            "config": self.cfg.to_dict(),
            "vocab": list(self.vocab.terms),
        }
        if extra:
            meta["extra"] = dict(extra)
        save_arrays(path, self.params, meta)

    @classmethod
    def load(cls, path) -> "TopicModel":
        arrays, meta = load_arrays(path)
        if meta.get("version") != __version__:
            raise CheckpointError(
                f"checkpoint written by version {meta.get('version')}, this is {__version__}"
            )
        cfg = TrainConfig.from_dict(meta["config"])
        vocab = Vocabulary(tuple(meta["vocab"]))
        params = {k: v for k, v in arrays.items() if k.startswith(("enc.", "gen."))}
        expected = init_params(cfg, len(vocab), np.random.default_rng(0))
        if set(expected) != set(params) or any(
            expected[k].shape != params[k].shape for k in expected
        ):
            raise CheckpointError("checkpoint arrays do not match its configuration")
        return cls(cfg, vocab, params)


def infer_theta(model: TopicModel, doc: BowDocument) -> DocPosterior:
    """theta = sparsemax(W^T mu(w)) using the posterior mean."""
    if doc.length < 1:
        raise ValueError("empty document")
    mu, std = model.posterior(doc.dense(model.n_terms))
    theta = sparsemax(mu[0] @ model.params["gen.W"])
    return DocPosterior(DiagGaussian(mu[0], std[0]), theta)


def top_words(model: TopicModel, k: int, n: int) -> list[tuple[str, float]]:
    """The ``n`` highest-weight terms of topic ``k``; ties go to the lower id."""
    K = model.cfg.n_topics
    if not 0 <= k < K:
        raise IndexError(f"topic {k} out of range [0, {K})")
    if n > model.n_terms:
        log.warning("requested %d top words but |V| = %d; clamping", n, model.n_terms)
        n = model.n_terms
    if n < 1:
        raise ValueError("n must be positive")
    weights = model.topic_matrix()[k]
    order = np.lexsort((np.arange(weights.size), -weights))[:n]
    return [(model.vocab[i], float(weights[i])) for i in order]


# --------------------------------------------------------------------------
# training


class TrainingDiverged(RuntimeError):
    """Raised when the loss turns non-finite; carries the last good model."""

    def __init__(self, message: str, last_good: TopicModel, epoch: int, trace: list):
        super().__init__(message)
        self.last_good = last_good
        self.epoch = epoch
        self.trace = trace


@dataclass
class TrainResult:
    model: TopicModel
    epoch_loss: list[float] = field(default_factory=list)
    # rows of (epoch, batch, loss, recon, rw_term)
    trace: list[tuple[int, int, float, float, float]] = field(default_factory=list)


def train(corpus: Corpus, cfg: TrainConfig, model: TopicModel | None = None,
          callback=None) -> TrainResult:
    """Minibatch training with one Adam step per batch.

    Batches are drawn from a seeded shuffle of the documents; each batch
    uses fresh reparameterisation noise and dropout masks from the same
    stream, so a fixed ``cfg.seed`` yields identical traces.
    """
    if len(corpus) == 0:
        raise ValueError("cannot train on an empty corpus")
    if model is None:
        model = TopicModel.initialize(cfg, corpus.vocab)
    params = model.params
    opt = Adam(params, lr=cfg.lr)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    result = TrainResult(model)
    n = len(corpus)
    keep = 1.0 - cfg.dropout

    for epoch in range(1, cfg.epochs + 1):
        last_good = model.copy()
        order = rng.permutation(n)
        losses = []
        try:
            for b, start in enumerate(range(0, n, cfg.batch_size)):
                rows = order[start:start + cfg.batch_size]
                counts = corpus.count_matrix(rows)
                eps = rng.standard_normal((rows.size, cfg.latent_dim))
                mask = None
                if cfg.dropout > 0:
                    mask = (rng.random((rows.size, cfg.hidden)) < keep) / keep
                parts, cache = batch_forward(params, cfg, counts, eps, mask)
                grads = batch_backward(params, cache)
                opt.step(params, grads)
                losses.append(parts.loss)
                result.trace.append((epoch, b, parts.loss, parts.recon, parts.reg))
        except NumericalError as exc:
            raise TrainingDiverged(f"training diverged in epoch {epoch}: {exc}",
                                   last_good, epoch, result.trace) from exc
        result.epoch_loss.append(float(np.mean(losses)))
        log.info("epoch %d loss %.4f", epoch, result.epoch_loss[-1])
        if callback is not None:
            callback(epoch, model)
    return result
