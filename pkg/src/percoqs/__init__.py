"""Fractal percolation with a boundary-death rewriting map.

Samples Galton-Watson subdivision trees of the unit cube, rewrites
surviving addresses by inserting a fixed interior word whenever a node
loses all boundary children, and provides the closed-form growth
exponents, the pointwise and global limit maps, and Monte Carlo
cross-checks for all of it.
"""

from .errors import CapacityError, DomainError, PreconditionError
from .lattice import (
    Box,
    ExactPoint,
    Params,
    box_of_word,
    default_eta,
    dist_max,
    h_box,
    h_box_inv,
    is_boundary_label,
    is_prefix,
    label_to_offset,
    offset_to_label,
    pi_finite,
    validate_label,
    validate_word,
    word_meet,
)
from .percolation import (
    PercTree,
    SeedPolicy,
    derive_seed,
    node_survives,
    sample_nonextinct,
    sample_tree,
    subtree,
    survival_threshold,
    tree_from_json_dict,
    tree_from_words,
    truncate,
)
from .substitution import (
    FlaggedTree,
    TildeWord,
    comparability_ratio,
    compute_flags,
    f_point,
    image_cover,
    tilde,
    write_cover_csv,
)
from .globalmap import GeomConfig, f_global, g, g_batch, g_localized, madic_address
from .analysis import (
    DimFit,
    DimReport,
    EpsilonReport,
    MartingaleReport,
    PartitionSum,
    QsScan,
    epsilon_table,
    estimate_dims,
    kappa,
    kappa_prime,
    level1_oracle,
    martingale_check,
    partition_series,
    partition_sum,
    qs_ratio_scan,
    solve_epsilon,
    solve_t,
    zero_slope,
)

__version__ = "0.1.0"

__all__ = [
    "Box",
    "CapacityError",
    "DimFit",
    "DimReport",
    "DomainError",
    "EpsilonReport",
    "ExactPoint",
    "FlaggedTree",
    "GeomConfig",
    "MartingaleReport",
    "Params",
    "PartitionSum",
    "PercTree",
    "PreconditionError",
    "QsScan",
    "SeedPolicy",
    "TildeWord",
    "box_of_word",
    "comparability_ratio",
    "compute_flags",
    "default_eta",
    "derive_seed",
    "dist_max",
    "epsilon_table",
    "estimate_dims",
    "f_global",
    "f_point",
    "g",
    "g_batch",
    "g_localized",
    "h_box",
    "h_box_inv",
    "image_cover",
    "is_boundary_label",
    "is_prefix",
    "kappa",
    "kappa_prime",
    "label_to_offset",
    "level1_oracle",
    "madic_address",
    "martingale_check",
    "node_survives",
    "offset_to_label",
    "partition_series",
    "partition_sum",
    "pi_finite",
    "qs_ratio_scan",
    "sample_nonextinct",
    "sample_tree",
    "solve_epsilon",
    "solve_t",
    "subtree",
    "survival_threshold",
    "tilde",
    "tree_from_json_dict",
    "tree_from_words",
    "truncate",
    "validate_label",
    "validate_word",
    "word_meet",
    "write_cover_csv",
    "zero_slope",
]
