"""Faithfulness criteria: removal, sensitivity, stability, plus statistics."""

from faithkit.metrics.interpolation import InterpolationCurve, interpolation_curve
from faithkit.metrics.removal import (
    THRESHOLDS,
    comprehensiveness,
    comprehensiveness_auc,
    relevant_set,
    relevant_size,
    removal_auc,
    sufficiency,
    sufficiency_auc,
)
from faithkit.metrics.sensitivity import (
    AttackConfig,
    SensitivityResult,
    pgd_attack,
    radius_for_set,
    sensitivity_auc,
    sensitivity_radius,
)
from faithkit.metrics.stability import StabilityConfig, stability, stability_search
from faithkit.metrics.stats import SignificanceResult, order_correlation, spearman, t_test

METRICS = ("comp", "suff", "sens", "stab")
# +1: higher is better, -1: lower is better
DIRECTIONS = {"comp": 1, "suff": -1, "sens": -1, "stab": 1}
