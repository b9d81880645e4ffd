"""Command-line front end: ``sparsetopic {train,eval,sweep,topics,infer}``.

Exit codes: 0 success, 2 usage error, 3 data or checkpoint error,
4 numerical divergence.  Every CSV uses ``.`` decimals and shortest
round-trip float formatting.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from .corpus import (
    BowDocument,
    Corpus,
    EmptyCorpusError,
    build_corpus,
    corpus_from_lines,
    read_bow,
    read_token_lines,
    split_heldout,
)
from .metrics import (
    PERPLEXITY_MODES,
    build_cooc,
    mean_pmi,
    perplexity,
    topic_sparsity_phi,
    topic_sparsity_theta,
)
from .net import CheckpointError, load_arrays
from .topicmodel import TopicModel, TrainConfig, TrainingDiverged, infer_theta, top_words, train

log = logging.getLogger("sparsetopic")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 2, 3, 4
SEED_ENV = "SPARSETOPIC_SEED"
CHECKPOINT_NAME = "model.npz"
TRACE_HEADER = ("epoch", "batch", "loss", "recon", "rw_term")

# flag name -> TrainConfig field
CONFIG_FLAGS = {
    "model": "variant",
    "topics": "n_topics",
    "gamma": "gamma",
    "lr": "lr",
    "epochs": "epochs",
    "batch": "batch_size",
    "seed": "seed",
    "latent_dim": "latent_dim",
    "embed_dim": "embed_dim",
    "hidden": "hidden",
    "dropout": "dropout",
    "regularizer": "regularizer",
}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def fmt(x) -> str:
    """Shortest round-trip text for numbers; ints stay ints."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, header, rows, delimiter=",") -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    os.replace(tmp, path)


# --------------------------------------------------------------------------
# argument handling


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model and training")
    g.add_argument("--config", type=Path, help="JSON file with TrainConfig fields")
    g.add_argument("--model", choices=["nsmdm", "nsmtm"])
    g.add_argument("--topics", type=int)
    g.add_argument("--gamma", type=float)
    g.add_argument("--lr", type=float)
    g.add_argument("--epochs", type=int)
    g.add_argument("--batch", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--latent-dim", type=int)
    g.add_argument("--embed-dim", type=int)
    g.add_argument("--hidden", type=int)
    g.add_argument("--dropout", type=float)
    g.add_argument("--regularizer", choices=["rw", "kl"])


def _add_corpus_flags(p: argparse.ArgumentParser, required: bool = True) -> None:
    g = p.add_argument_group("corpus")
    g.add_argument("--corpus", type=Path, required=required,
                   help="one document per line; termid:count entries when --vocab is given")
    g.add_argument("--vocab", type=Path, help="vocabulary file, one term per line")
    g.add_argument("--min-count", type=int, default=1)
    g.add_argument("--max-vocab", type=int)
    g.add_argument("--test-fraction", type=float)


def _add_eval_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("metrics")
    g.add_argument("--pmi-topn", type=int, default=15)
    g.add_argument("--ts-threshold", type=float, default=0.0)
    g.add_argument("--reference", type=Path,
                   help="token-line corpus for co-occurrence counts (default: training part)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsetopic", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model; writes a checkpoint and a loss trace")
    _add_model_flags(p)
    _add_corpus_flags(p)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("eval", help="perplexity, PMI and topic sparsity of a checkpoint")
    p.add_argument("--checkpoint", type=Path, required=True)
    _add_corpus_flags(p)
    _add_eval_flags(p)
    p.add_argument("--seed", type=int, help="split seed (default: the one used in training)")
    p.add_argument("--out", type=Path)

    p = sub.add_parser("sweep", help="train and evaluate once per gamma or learning rate")
    _add_model_flags(p)
    _add_corpus_flags(p)
    _add_eval_flags(p)
    grid = p.add_mutually_exclusive_group(required=True)
    grid.add_argument("--gamma-list", help="comma-separated gamma values")
    grid.add_argument("--lr-list", help="comma-separated learning rates")
    p.add_argument("--perplexity-mode", choices=PERPLEXITY_MODES, default="bound_rw")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("topics", help="top words of every topic")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("-n", "--n", type=int, default=10)
    p.add_argument("--out", type=Path, help="TSV file (default: stdout)")

    p = sub.add_parser("infer", help="per-document topic proportions")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--docs", type=Path, required=True, help="token-line documents")
    p.add_argument("--topk", type=int, default=3)
    p.add_argument("--out", type=Path, required=True)
    return parser


def resolve_config(args) -> TrainConfig:
    """Defaults < --config file < flags; SPARSETOPIC_SEED stands in for --seed."""
    values: dict = {}
    if args.config is not None:
        try:
            values.update(json.loads(args.config.read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    if args.seed is None and SEED_ENV in os.environ:
        try:
            values["seed"] = int(os.environ[SEED_ENV])
        except ValueError as exc:
            raise UsageError(f"{SEED_ENV} must be an integer") from exc
    for flag, name in CONFIG_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[name] = v
    test_fraction = values.pop("test_fraction", None)
    if args.test_fraction is None and test_fraction is not None:
        args.test_fraction = test_fraction
    try:
        return TrainConfig.from_dict(values)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _test_fraction(args, default=0.1) -> float:
    f = default if args.test_fraction is None else args.test_fraction
    if not 0.0 < f < 1.0:
        raise UsageError("--test-fraction must lie in (0, 1)")
    return f


# --------------------------------------------------------------------------
# data loading


def load_corpus(args, vocab=None) -> Corpus:
    """Read ``--corpus``; with a model vocabulary, tokens are mapped onto it."""
    if not args.corpus.is_file():
        raise UsageError(f"corpus file not found: {args.corpus}")
    try:
        if args.vocab is not None:
            if not args.vocab.is_file():
                raise UsageError(f"vocabulary file not found: {args.vocab}")
            corpus = read_bow(args.corpus, args.vocab)
            if vocab is not None and corpus.vocab.terms != vocab.terms:
                raise DataError("the vocabulary file does not match the checkpoint")
            return corpus
        lines = read_token_lines(args.corpus)
        if vocab is not None:
            corpus, dropped_docs, dropped_tokens = corpus_from_lines(lines, vocab)
            if dropped_tokens:
                log.info("dropped %d out-of-vocabulary tokens", dropped_tokens)
            return corpus
        return build_corpus(lines, min_count=args.min_count, max_vocab=args.max_vocab)
    except (EmptyCorpusError, UnicodeDecodeError) as exc:
        raise DataError(f"{args.corpus}: {exc}") from exc
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def load_model(path: Path) -> TopicModel:
    if not path.is_file():
        raise UsageError(f"checkpoint not found: {path}")
    try:
        return TopicModel.load(path)
    except (CheckpointError, KeyError, ValueError, OSError) as exc:
        raise DataError(f"cannot load checkpoint {path}: {exc}") from exc


def split(corpus: Corpus, fraction: float, seed: int):
    try:
        return split_heldout(corpus, fraction, seed)
    except ValueError as exc:
        raise DataError(f"cannot split corpus: {exc}") from exc


# --------------------------------------------------------------------------
# metrics


def evaluate(model: TopicModel, train_part: Corpus, test, args, reference: Corpus | None = None):
    """Ordered (metric, value) pairs for the eval report."""
    rows = [(f"perplexity_{m}", perplexity(model, test, m)) for m in
            ("predictive", "bound_rw", "bound_kl")]
    stats = build_cooc(reference if reference is not None else train_part)
    pmi_value, _ = mean_pmi(model, stats, top_n=args.pmi_topn)
    rows.append(("pmi_mean", pmi_value))
    observed = np.array([d.observed.dense(model.n_terms) for d in test])
    rows.append(("ts_theta_mean", topic_sparsity_theta(model.thetas(observed))))
    dists = model.topic_distributions()
    ts_phi = topic_sparsity_phi(dists, threshold=args.ts_threshold)
    rows.append(("ts_phi_mean", float(np.mean(ts_phi))))
    rows.extend((f"ts_phi_topic{k}", float(v)) for k, v in enumerate(ts_phi))
    return rows


def _reference(args, vocab):
    if args.reference is None:
        return None
    if not args.reference.is_file():
        raise UsageError(f"reference corpus not found: {args.reference}")
    try:
        ref, _, _ = corpus_from_lines(read_token_lines(args.reference), vocab)
    except EmptyCorpusError as exc:
        raise DataError(f"{args.reference}: {exc}") from exc
    return ref


# --------------------------------------------------------------------------
# commands


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    fraction = _test_fraction(args)
    corpus = load_corpus(args)
    train_part, _ = split(corpus, fraction, cfg.seed)
    try:
        args.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {args.out}: {exc}") from exc
    extra = {"test_fraction": fraction, "split_seed": cfg.seed}
    log.info("training %s: %d documents, |V| = %d", cfg.variant, len(train_part), len(corpus.vocab))
    try:
        result = train(train_part, cfg)
    except TrainingDiverged as exc:
        write_csv(args.out / "trace.csv", TRACE_HEADER, exc.trace)
        exc.last_good.save(args.out / "last_good.npz", extra)
        print(f"error: {exc}; last good parameters in {args.out / 'last_good.npz'}", file=sys.stderr)
        return EXIT_DIVERGED
    write_csv(args.out / "trace.csv", TRACE_HEADER, result.trace)
    result.model.save(args.out / CHECKPOINT_NAME, extra)
    print(f"final epoch loss {fmt(result.epoch_loss[-1]) if result.epoch_loss else 'n/a'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = load_model(args.checkpoint)
    meta_extra = _checkpoint_extra(args.checkpoint)
    fraction = _test_fraction(args, meta_extra.get("test_fraction", 0.1))
    seed = args.seed if args.seed is not None else meta_extra.get("split_seed", model.cfg.seed)
    corpus = load_corpus(args, model.vocab)
    train_part, test = split(corpus, fraction, seed)
    rows = evaluate(model, train_part, test, args, _reference(args, model.vocab))
    variant = model.cfg.variant
    if args.out is None:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(("metric", "variant", "value"))
        for name, value in rows:
            w.writerow((name, variant, fmt(value)))
        return EXIT_OK
    args.out.mkdir(parents=True, exist_ok=True)
    write_csv(args.out / "metrics.csv", ("metric", "variant", "value"),
              [(name, variant, value) for name, value in rows])
    with open(args.out / "metrics.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"variant={variant}\n")
        for name, value in rows:
            fh.write(f"{name}={fmt(value)}\n")
    return EXIT_OK


def _checkpoint_extra(path) -> dict:
    _, meta = load_arrays(path)
    return meta.get("extra", {})


def _parse_list(text: str, name: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"{name}: {exc}") from exc
    if not values:
        raise UsageError(f"{name} must not be empty")
    return values


def cmd_sweep(args) -> int:
    base = resolve_config(args)
    if args.gamma_list is not None:
        param, values = "gamma", _parse_list(args.gamma_list, "--gamma-list")
    else:
        param, values = "lr", _parse_list(args.lr_list, "--lr-list")
    fraction = _test_fraction(args)
    corpus = load_corpus(args)
    train_part, test = split(corpus, fraction, base.seed)
    reference = _reference(args, corpus.vocab)
    stats = build_cooc(reference if reference is not None else train_part)
    args.out.mkdir(parents=True, exist_ok=True)
    rows = []
    for v in values:
        try:
            cfg = base.replace(**{param: v})
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        try:
            result = train(train_part, cfg)
        except TrainingDiverged as exc:
            log.warning("%s=%s diverged in epoch %d", param, fmt(v), exc.epoch)
            rows.append((param, v, math.nan, math.nan, math.nan, 1))
            continue
        pmi_value, _ = mean_pmi(result.model, stats, top_n=args.pmi_topn)
        ppl = perplexity(result.model, test, args.perplexity_mode)
        diverged = int(not (np.isfinite(ppl) and np.isfinite(result.epoch_loss[-1])))
        rows.append((param, v, pmi_value, ppl, result.epoch_loss[-1], diverged))
        log.info("%s=%s pmi=%.4f perplexity=%.2f", param, fmt(v), pmi_value, ppl)
    write_csv(args.out / "sweep.csv",
              ("param", "value", "pmi", f"perplexity_{args.perplexity_mode}", "final_loss", "diverged"),
              rows)
    return EXIT_OK


def cmd_topics(args) -> int:
    if args.n <= 0:
        raise UsageError("-n must be positive")
    model = load_model(args.checkpoint)
    rows = [(k, r + 1, term, weight)
            for k in range(model.cfg.n_topics)
            for r, (term, weight) in enumerate(top_words(model, k, args.n))]
    header = ("topic_id", "rank", "term", "weight")
    if args.out is None:
        w = csv.writer(sys.stdout, delimiter="\t", lineterminator="\n")
        w.writerow(header)
        w.writerows((k, r, t, fmt(x)) for k, r, t, x in rows)
    else:
        write_csv(args.out, header, rows, delimiter="\t")
    return EXIT_OK


def cmd_infer(args) -> int:
    if args.topk <= 0:
        raise UsageError("--topk must be positive")
    model = load_model(args.checkpoint)
    if not args.docs.is_file():
        raise UsageError(f"documents file not found: {args.docs}")
    K = model.cfg.n_topics
    rows, active_counts, dropped = [], Counter(), 0
    for doc_id, tokens in enumerate(read_token_lines(args.docs)):
        ids = [model.vocab.index[t] for t in tokens if t in model.vocab.index]
        dropped += len(tokens) - len(ids)
        if not ids:
            log.warning("document %d has no in-vocabulary tokens; skipped", doc_id)
            continue
        theta = infer_theta(model, BowDocument.from_ids(ids)).theta
        order = np.lexsort((np.arange(K), -theta.values))[:min(args.topk, theta.n_active)]
        rows.append((doc_id, theta.n_active, topic_sparsity_theta(theta, K),
                     ";".join(str(int(k)) for k in order)))
        active_counts[theta.n_active] += 1
    if dropped:
        log.info("dropped %d out-of-vocabulary tokens", dropped)
    args.out.mkdir(parents=True, exist_ok=True)
    write_csv(args.out / "theta.csv", ("doc_id", "n_active_topics", "ts_theta", "topk_topics"), rows)
    write_csv(args.out / "active_topics_hist.csv", ("n_active_topics", "n_docs"),
              [(k, active_counts.get(k, 0)) for k in range(1, K + 1)])
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "topics": cmd_topics,
    "infer": cmd_infer,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on bad flags
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
