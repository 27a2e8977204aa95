"""Python bindings for the skgc C++ core."""

from ._core import (
    ConfigError,
    dataset_stats,
    digamma,
    evaluate,
    expected_active_communities,
    kl_beta,
    kl_gaussian,
    log_beta,
    modularity,
    rank_query,
    sample_prior,
    stick_breaking,
    train,
)

__all__ = [
    "ConfigError",
    "dataset_stats",
    "digamma",
    "evaluate",
    "expected_active_communities",
    "kl_beta",
    "kl_gaussian",
    "log_beta",
    "modularity",
    "rank_query",
    "sample_prior",
    "stick_breaking",
    "train",
]
