"""Shared fixtures for the model tests and the acceptance run."""

import numpy as np

from sparsetopic.net import check_gradients_report
from sparsetopic.topicmodel import TrainConfig, batch_backward, batch_forward, init_params


def composite_point(variant, seed, regularizer="rw", gamma=0.7, n_terms=9, batch=3):
    """A small random instance of the full loss with sparse theta and phi."""
    cfg = TrainConfig(variant=variant, n_topics=4, latent_dim=3, embed_dim=5, hidden=6,
                      gamma=gamma, regularizer=regularizer, decoder_init_scale=3.0,
                      embed_init_scale=2.0)
    rng = np.random.default_rng(seed)
    params = init_params(cfg, n_terms, rng)
    for k in ("enc.b1", "enc.b2", "enc.bmu"):
        params[k] = rng.normal(0, 0.2, size=params[k].shape)
    counts = rng.integers(0, 3, size=(batch, n_terms)).astype(float)
    counts[:, 0] += 1
    eps = rng.standard_normal((batch, cfg.latent_dim))
    mask = (rng.random((batch, cfg.hidden)) < 0.8) / 0.8
    return cfg, params, counts, eps, mask


def composite_check(variant, seed, regularizer="rw", h=1e-5):
    """Relative-error report of batch_backward against central differences."""
    cfg, params, counts, eps, mask = composite_point(variant, seed, regularizer)
    parts, cache = batch_forward(params, cfg, counts, eps, mask)
    grads = batch_backward(params, cache)

    def f(p):
        return batch_forward(p, cfg, counts, eps, mask)[0].loss

    return check_gradients_report(f, params, grads, h=h, floor="auto"), parts, cache


# PASS/FAIL lines of the acceptance run, echoed again in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def report(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)
    return ok
