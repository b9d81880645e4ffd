"""Sparse neural topic models built on the Gaussian-sparsemax construction."""

__version__ = "0.1.0"

from .corpus import (  # noqa: E402
    BowDocument,
    Corpus,
    SplitDocument,
    Vocabulary,
    build_corpus,
    read_bow,
    split_heldout,
    write_bow,
)
from .gaussian import DiagGaussian, kl_divergence, rw_divergence, rw_monte_carlo_oracle  # noqa: E402
from .simplex import SparsePoint, project_simplex_oracle, softmax, sparsemax, sparsemax_jvp  # noqa: E402
from .topicmodel import (  # noqa: E402
    NSMDM,
    NSMTM,
    TopicModel,
    TrainConfig,
    TrainingDiverged,
    infer_theta,
    top_words,
    train,
)
from .metrics import build_cooc, perplexity, pmi, topic_sparsity_phi, topic_sparsity_theta  # noqa: E402

__all__ = [
    "__version__",
    "BowDocument",
    "Corpus",
    "SplitDocument",
    "Vocabulary",
    "build_corpus",
    "read_bow",
    "split_heldout",
    "write_bow",
    "DiagGaussian",
    "kl_divergence",
    "rw_divergence",
    "rw_monte_carlo_oracle",
    "SparsePoint",
    "project_simplex_oracle",
    "softmax",
    "sparsemax",
    "sparsemax_jvp",
    "NSMDM",
    "NSMTM",
    "TopicModel",
    "TrainConfig",
    "TrainingDiverged",
    "infer_theta",
    "top_words",
    "train",
    "build_cooc",
    "perplexity",
    "pmi",
    "topic_sparsity_phi",
    "topic_sparsity_theta",
]
