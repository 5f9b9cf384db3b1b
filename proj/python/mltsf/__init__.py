"""Python bindings for the mltsf C++ core."""

from ._mltsf import (
    EditStats,
    MltsfError,
    collapse,
    ctc_nll,
    decode,
    edit_stats,
    evaluate,
    gradcheck,
    greedy_decode,
    level1_receptive_field,
    read_features,
    select_neighbors,
    similarity_matrix,
    synth_sample,
    synthesize,
    temporal_rescale,
    train,
    wer,
    write_features,
)

__all__ = [
    "EditStats",
    "MltsfError",
    "collapse",
    "ctc_nll",
    "decode",
    "edit_stats",
    "evaluate",
    "gradcheck",
    "greedy_decode",
    "level1_receptive_field",
    "read_features",
    "select_neighbors",
    "similarity_matrix",
    "synth_sample",
    "synthesize",
    "temporal_rescale",
    "train",
    "wer",
    "write_features",
]
