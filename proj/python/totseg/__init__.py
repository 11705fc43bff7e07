"""Temporal optimal transport for unsupervised action segmentation."""

from ._core import (
    ContractError,
    DataError,
    Model,
    NumericalError,
    evaluate,
    generate_synthetic,
    hungarian_match,
    segments,
    sinkhorn_ot,
    sinkhorn_tot,
    temporal_prior,
    viterbi,
)

__all__ = [
    "ContractError",
    "DataError",
    "Model",
    "NumericalError",
    "evaluate",
    "generate_synthetic",
    "hungarian_match",
    "segments",
    "sinkhorn_ot",
    "sinkhorn_tot",
    "temporal_prior",
    "viterbi",
]
