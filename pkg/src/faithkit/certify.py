"""Linear bounds on a class logit over a Frobenius ball of embeddings.

Intermediate neuron bounds come from interval bound propagation; the final
pair of linear functions is built by propagating coefficients backward from
the target logit, relaxing each ReLU with the IBP pre-activation bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from faithkit.attribution import Attribution
from faithkit.model import ClassifierModel, _forward, as_embeddings, forward


@dataclass(frozen=True)
class CertifyConfig:
    delta: float = 0.1
    target: int | None = None

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be >= 0")


@dataclass
class IntervalBounds:
    z1_lower: np.ndarray
    z1_upper: np.ndarray
    a1_lower: np.ndarray
    a1_upper: np.ndarray
    p_lower: np.ndarray
    p_upper: np.ndarray
    z2_lower: np.ndarray
    z2_upper: np.ndarray
    a2_lower: np.ndarray
    a2_upper: np.ndarray
    logits_lower: np.ndarray
    logits_upper: np.ndarray


@dataclass
class LinearBounds:
    """``sum(lower_coef * E) + lower_bias <= logit <= sum(upper_coef * E) + upper_bias``."""

    lower_coef: np.ndarray
    lower_bias: float
    upper_coef: np.ndarray
    upper_bias: float
    target: int


def _affine_interval(W, b, lower, upper):
    center = (upper + lower) / 2.0
    radius = (upper - lower) / 2.0
    mid = center @ W.T + b
    rad = radius @ np.abs(W).T
    return mid - rad, mid + rad


def ibp_bounds(model: ClassifierModel, x, delta: float) -> IntervalBounds:
    """Elementwise bounds of every hidden quantity for ``||E' - E||_F <= delta``.

    Each first-layer neuron of token ``i`` only reads row ``i``, so its
    range over the joint ball is exactly ``center +/- delta * ||W1_j||``.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    embeds = as_embeddings(model, x)
    forward(model, embeds)
    z1 = embeds @ model.W1.T + model.b1
    rad1 = delta * np.linalg.norm(model.W1, axis=1)
    z1_l, z1_u = z1 - rad1, z1 + rad1
    a1_l, a1_u = np.maximum(z1_l, 0.0), np.maximum(z1_u, 0.0)
    p_l, p_u = a1_l.mean(axis=0), a1_u.mean(axis=0)
    z2_l, z2_u = _affine_interval(model.W2, model.b2, p_l, p_u)
    a2_l, a2_u = np.maximum(z2_l, 0.0), np.maximum(z2_u, 0.0)
    lg_l, lg_u = _affine_interval(model.W3, model.b3, a2_l, a2_u)
    return IntervalBounds(z1_l, z1_u, a1_l, a1_u, p_l, p_u, z2_l, z2_u, a2_l, a2_u, lg_l, lg_u)


def relu_relaxation(lower, upper):
    """Slopes and intercept of the ReLU envelopes.

    Returns ``(upper_slope, upper_intercept, lower_slope)`` such that
    ``lower_slope * z <= relu(z) <= upper_slope * z + upper_intercept`` on
    ``[lower, upper]``. Unstable neurons take the chord as upper line and
    slope 1 or 0 as lower line, whichever leaves the smaller area.
    """
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    dead = upper <= 0.0
    active = lower >= 0.0
    unstable = ~(dead | active)
    width = np.where(unstable, upper - lower, 1.0)
    up_slope = np.where(active, 1.0, np.where(unstable, upper / width, 0.0))
    up_icpt = np.where(unstable, -up_slope * lower, 0.0)
    lo_slope = np.where(active, 1.0, np.where(unstable & (upper >= -lower), 1.0, 0.0))
    return up_slope, up_icpt, lo_slope


def _through_relu(coef, lower, upper, want_upper):
    up_slope, up_icpt, lo_slope = relu_relaxation(lower, upper)
    pos = coef >= 0.0
    if want_upper:
        new = np.where(pos, coef * up_slope, coef * lo_slope)
        bias = np.sum(np.where(pos, coef * up_icpt, 0.0))
    else:
        new = np.where(pos, coef * lo_slope, coef * up_slope)
        bias = np.sum(np.where(pos, 0.0, coef * up_icpt))
    return new, float(bias)


def backward_bounds(model: ClassifierModel, x, cfg: CertifyConfig | None = None) -> LinearBounds:
    cfg = cfg or CertifyConfig()
    embeds = as_embeddings(model, x)
    ib = ibp_bounds(model, embeds, cfg.delta)
    y = int(_forward(model, embeds).label) if cfg.target is None else int(cfg.target)
    n = embeds.shape[0]

    sides = {}
    for want_upper in (False, True):
        coef = model.W3[y].copy()
        bias = float(model.b3[y])
        coef, extra = _through_relu(coef, ib.z2_lower, ib.z2_upper, want_upper)
        bias += extra + float(coef @ model.b2)
        coef_a1 = np.broadcast_to((coef @ model.W2) / n, (n, model.hidden))
        coef_z1, extra = _through_relu(coef_a1, ib.z1_lower, ib.z1_upper, want_upper)
        bias += extra + float(np.sum(coef_z1 @ model.b1))
        sides[want_upper] = (coef_z1 @ model.W1, bias)
    (lo_c, lo_b), (up_c, up_b) = sides[False], sides[True]
    return LinearBounds(lo_c, lo_b, up_c, up_b, y)


def concretize(bounds: LinearBounds, x, delta: float, model: ClassifierModel | None = None) -> tuple[float, float]:
    """Worst case of both linear functions over the ball (L2 dual norm)."""
    embeds = as_embeddings(model, x) if model is not None else np.asarray(x, dtype=np.float64)
    lower = np.sum(bounds.lower_coef * embeds) + bounds.lower_bias - delta * np.linalg.norm(bounds.lower_coef)
    upper = np.sum(bounds.upper_coef * embeds) + bounds.upper_bias + delta * np.linalg.norm(bounds.upper_coef)
    return float(lower), float(upper)


def attribute_certify(model: ClassifierModel, x, cfg: CertifyConfig | None = None, target=None) -> Attribution:
    """Token score = lower-bound coefficient block of the token dotted with its embedding."""
    cfg = cfg or CertifyConfig()
    if target is not None:
        cfg = CertifyConfig(cfg.delta, target)
    embeds = as_embeddings(model, x)
    bounds = backward_bounds(model, embeds, cfg)
    return Attribution("certify", np.sum(bounds.lower_coef * embeds, axis=-1))
