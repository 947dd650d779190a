"""Caption-quality scoring and the statistical test battery."""

from .scoring import (
    FIELDS, GroupSummary, THumBSRating, aggregate, compare_sources, load_ratings, paired_samples, thumbs_score,
)
from .stats import (
    CorrelationMatrix, StatResult, compare_paired, correlation_matrix, midranks, paired_t, shapiro_wilk,
    spearman_rho, stars, wilcoxon_signed_rank,
)

__all__ = [
    "FIELDS", "GroupSummary", "THumBSRating", "aggregate", "compare_sources", "load_ratings", "paired_samples",
    "thumbs_score", "CorrelationMatrix", "StatResult", "compare_paired", "correlation_matrix", "midranks",
    "paired_t", "shapiro_wilk", "spearman_rho", "stars", "wilcoxon_signed_rank",
]
