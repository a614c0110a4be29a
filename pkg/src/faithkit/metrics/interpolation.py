"""Interpolating a relevant set toward random outside tokens."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from faithkit.attribution import Attribution
from faithkit.metrics.removal import removal_delta
from faithkit.metrics.sensitivity import AttackConfig, radius_for_set
from faithkit.model import _forward, as_embeddings

SET_SIZE = 4
DEGENERATE_TOL = 1e-12


@dataclass
class InterpolationCurve:
    values: np.ndarray
    metric_values: np.ndarray
    sets: list[tuple[int, ...]]
    degenerate: bool


def set_metric(model, embeds, indices, metric, target, attack_cfg=AttackConfig()) -> float:
    if metric in ("comp", "comprehensiveness"):
        return removal_delta(model, embeds, indices, target)
    if metric in ("sens", "sensitivity"):
        return radius_for_set(model, embeds, indices, attack_cfg, target)
    raise ValueError(f"unknown interpolation metric {metric!r}")


def interpolation_sets(order, rng: np.random.Generator, size: int = SET_SIZE) -> list[tuple[int, ...]]:
    """S_0 = top ``size`` tokens; S_i swaps the i least important for random outsiders."""
    order = np.asarray(order, dtype=np.int64)
    if len(order) < 2 * size:
        raise ValueError(f"need at least {2 * size} tokens, got {len(order)}")
    top = order[:size]
    outside = rng.permutation(np.sort(order[size:]))[:size]
    return [tuple(top[: size - i].tolist()) + tuple(outside[:i].tolist()) for i in range(size + 1)]


def interpolation_curve(model, x, attribution: Attribution, metric: str, rng, target=None,
                        attack_cfg: AttackConfig = AttackConfig()) -> InterpolationCurve:
    """``f(i) = |M(S_0) - M(S_i)| / |M(S_0) - M(S_4)|`` for i = 0..4.

    A vanishing or non-finite denominator marks the curve degenerate and
    fills it with NaN.
    """
    embeds = as_embeddings(model, x)
    y = int(_forward(model, embeds).label) if target is None else int(target)
    sets = interpolation_sets(attribution.rank, rng)
    values = np.array([set_metric(model, embeds, s, metric, y, attack_cfg) for s in sets])
    denom = abs(values[0] - values[-1])
    if not np.isfinite(values).all() or denom < DEGENERATE_TOL:
        return InterpolationCurve(np.full(len(sets), np.nan), values, sets, True)
    curve = np.abs(values[0] - values) / denom
    curve[0], curve[-1] = 0.0, 1.0
    return InterpolationCurve(curve, values, sets, False)
