"""Self-supervised video hashing: selective scan encoder, hash centers, retrieval metrics."""

from ._core import (
    STANDARD_CUTOFFS,
    FormatError,
    IoError,
    NonFiniteLossError,
    S5vhError,
    ShapeError,
    ap_at_n,
    center_objective,
    centers,
    cluster,
    cosine_matrix,
    discretize,
    encode,
    evaluate,
    fit_scaling,
    generate_hash_centers,
    gmap,
    gradcheck,
    hamming,
    kmeans,
    map_at_n,
    pr_curve,
    rank,
    read_codes,
    read_tensor,
    selective_scan,
    synth,
    train,
    write_codes,
    write_tensor,
)

__all__ = [name for name in dir() if not name.startswith("_")]
