"""Graph-grounded hallucination analysis."""

from ._gga import (
    GgaError,
    embedding_divergence,
    gen_dataset,
    label,
    normalize,
    perplexity,
    prd,
    prune,
    read_trace,
    run_pipeline,
    sas,
    token_f1,
    validate_traces,
)

__all__ = [
    "GgaError",
    "embedding_divergence",
    "gen_dataset",
    "label",
    "normalize",
    "perplexity",
    "prd",
    "prune",
    "read_trace",
    "run_pipeline",
    "sas",
    "token_f1",
    "validate_traces",
]
