"""Verdict labeling, rationale extraction and social-factor analysis."""

from ._core import (
    EmbeddingFormatError,
    OddsRatio,
    RankDeficientError,
    RegressionResult,
    extract_verdict,
    load_embeddings,
    odds_ratio,
    ols_fit,
    p_band,
    run,
    stages,
    tokenize,
)

__all__ = [
    "EmbeddingFormatError",
    "OddsRatio",
    "RankDeficientError",
    "RegressionResult",
    "extract_verdict",
    "load_embeddings",
    "odds_ratio",
    "ols_fit",
    "p_band",
    "run",
    "stages",
    "tokenize",
]
