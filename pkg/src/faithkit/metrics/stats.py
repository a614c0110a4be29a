"""Rank correlation and two-sample significance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from faithkit.errors import UndefinedStatisticError


def positions(order) -> np.ndarray:
    """Invert an importance order: ``positions(order)[token] = place of token``."""
    order = np.asarray(order, dtype=np.int64)
    pos = np.empty(len(order), dtype=np.float64)
    pos[order] = np.arange(len(order))
    return pos


def spearman(rank_a, rank_b) -> float:
    """Pearson correlation of two rank vectors (tied items carry averaged ranks)."""
    a = np.asarray(rank_a, dtype=np.float64)
    b = np.asarray(rank_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("rank vectors must be 1-D and of equal length")
    if len(a) < 2:
        raise UndefinedStatisticError("spearman needs at least two items")
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt((a @ a) * (b @ b))
    if denom == 0.0:
        raise UndefinedStatisticError("constant rank vector")
    return float(np.clip((a @ b) / denom, -1.0, 1.0))


def order_correlation(order_a, order_b) -> float:
    """Spearman correlation between two importance orders over the same tokens."""
    return spearman(positions(order_a), positions(order_b))


@dataclass(frozen=True)
class SignificanceResult:
    t: float
    p: float
    df: int

    @property
    def significant_90(self) -> bool:
        return self.p < 0.10

    @property
    def significant_95(self) -> bool:
        return self.p < 0.05

    @property
    def marks(self) -> str:
        return "✓✓" if self.significant_95 else "✓" if self.significant_90 else ""


def t_test(scores_a, scores_b) -> SignificanceResult:
    """Two-sided Student's t test with pooled variance.

    Zero pooled variance gives ``t = 0, p = 1`` for equal means and an
    infinite ``t`` with ``p = 0`` otherwise.
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        raise UndefinedStatisticError("each sample needs at least two values")
    df = len(a) + len(b) - 2
    diff = a.mean() - b.mean()
    pooled = ((len(a) - 1) * a.var(ddof=1) + (len(b) - 1) * b.var(ddof=1)) / df
    se = np.sqrt(pooled * (1.0 / len(a) + 1.0 / len(b)))
    if se == 0.0:
        if diff == 0.0:
            return SignificanceResult(0.0, 1.0, df)
        return SignificanceResult(float(np.copysign(np.inf, diff)), 0.0, df)
    t = diff / se
    p = float(min(1.0, 2.0 * sps.t.sf(abs(t), df)))
    return SignificanceResult(float(t), p, df)
