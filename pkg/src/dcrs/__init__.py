"""Data-carrying reference signals on the Grassmann manifold."""

from .codebook import Codebook, rate_of
from .constellations import (
    CubeSplitParams,
    ExpMapParams,
    build_cubesplit,
    build_expmap,
    build_manopt,
    inverse_normal_cdf,
    tune_expmap_scale,
)
from .linalg import (
    chordal_distance,
    min_chordal_distance,
    project_to_stiefel,
    random_stiefel,
    skew_block_exp,
)
from .rotation import (
    optimize_unitary_rotations,
    pairwise_error_prob,
    predicted_channel_error,
    union_bound_ser,
)

__all__ = [
    "Codebook",
    "CubeSplitParams",
    "ExpMapParams",
    "build_cubesplit",
    "build_expmap",
    "build_manopt",
    "chordal_distance",
    "inverse_normal_cdf",
    "min_chordal_distance",
    "optimize_unitary_rotations",
    "pairwise_error_prob",
    "predicted_channel_error",
    "project_to_stiefel",
    "random_stiefel",
    "rate_of",
    "skew_block_exp",
    "tune_expmap_scale",
    "union_bound_ser",
]

__version__ = "0.1.0"
