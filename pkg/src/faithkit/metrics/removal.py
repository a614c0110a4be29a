"""Comprehensiveness and sufficiency: score drops after PAD replacement."""

from __future__ import annotations

import math

import numpy as np

from faithkit.attribution import Attribution
from faithkit.model import _forward, as_embeddings, forward

THRESHOLDS = (0.1, 0.2, 0.3, 0.4, 0.5)


def relevant_size(n: int, q: float) -> int:
    """``max(1, round(q * n))`` with halves rounded up, capped at ``n``."""
    if not 0.0 < q <= 1.0:
        raise ValueError(f"threshold must lie in (0, 1], got {q}")
    return min(n, max(1, math.floor(q * n + 0.5 + 1e-9)))


def _order(attribution) -> np.ndarray:
    if isinstance(attribution, Attribution):
        return attribution.rank
    return np.asarray(attribution, dtype=np.int64)


def relevant_set(attribution, q: float) -> np.ndarray:
    """Top-``q`` fraction of the importance order, most important first."""
    order = _order(attribution)
    return order[: relevant_size(len(order), q)]


def _clean(model, x, target):
    embeds = as_embeddings(model, x)
    trace = forward(model, embeds)
    y = int(trace.label) if target is None else int(target)
    return embeds, y, float(trace.probs[y])


def _prob(model, embeds, y):
    return float(_forward(model, embeds).probs[y])


def removal_delta(model, x, indices, target=None) -> float:
    """``s_y(x) - s_y(x with rows ``indices`` set to PAD)``."""
    embeds, y, clean = _clean(model, x, target)
    masked = embeds.copy()
    masked[np.asarray(indices, dtype=np.int64)] = model.pad_vector
    return clean - _prob(model, masked, y)


def keep_delta(model, x, indices, target=None) -> float:
    """``s_y(x) - s_y(x with every row outside ``indices`` set to PAD)``."""
    embeds, y, clean = _clean(model, x, target)
    kept = np.full(embeds.shape, model.pad_vector, dtype=np.float64)
    idx = np.asarray(indices, dtype=np.int64)
    kept[idx] = embeds[idx]
    return clean - _prob(model, kept, y)


def comprehensiveness(model, x, attribution, q: float, target=None) -> float:
    return removal_delta(model, x, relevant_set(attribution, q), target)


def sufficiency(model, x, attribution, q: float, target=None) -> float:
    return keep_delta(model, x, relevant_set(attribution, q), target)


def removal_auc(values) -> float:
    """Arithmetic mean of per-threshold values."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("no values to aggregate")
    return float(values.mean())


def comprehensiveness_auc(model, x, attribution, thresholds=THRESHOLDS, target=None) -> float:
    return removal_auc([comprehensiveness(model, x, attribution, q, target) for q in thresholds])


def sufficiency_auc(model, x, attribution, thresholds=THRESHOLDS, target=None) -> float:
    return removal_auc([sufficiency(model, x, attribution, q, target) for q in thresholds])
