"""Per-token importance scores for a single prediction.

Every method explains ``s_y`` for ``y`` the clean prediction unless a target
is passed explicitly. ``kind`` selects the explained score: the softmax
probability (default), the raw logit, or the binary logit margin.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from faithkit.errors import NumericInputError
from faithkit.model import (
    ClassifierModel,
    _dlogits,
    _forward,
    _grad_unchecked,
    as_embeddings,
    forward,
)


def rank_of(scores) -> np.ndarray:
    """Token indices by decreasing score; ties keep ascending index order."""
    scores = np.asarray(scores, dtype=np.float64)
    return np.argsort(-scores, kind="stable")


@dataclass(frozen=True, eq=False)
class Attribution:
    method: str
    scores: np.ndarray
    rank: np.ndarray = field(init=False)

    def __post_init__(self):
        scores = np.array(self.scores, dtype=np.float64)
        if scores.ndim != 1 or not np.all(np.isfinite(scores)):
            raise NumericInputError(f"{self.method}: scores must be a finite vector")
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "rank", rank_of(scores))

    def __len__(self):
        return len(self.scores)


@dataclass(frozen=True)
class PgdConfig:
    """Fixed-radius descent used by the PGD attributions.

    ``step`` defaults to ``eps / 5``. With ``normalize`` each step moves
    ``step`` along the unit-Frobenius descent direction; otherwise it moves
    ``step * gradient``.
    """

    eps: float = 0.5
    iters: int = 50
    step: float | None = None
    normalize: bool = True

    def __post_init__(self):
        if self.eps < 0 or self.iters < 1 or (self.step is not None and self.step <= 0):
            raise ValueError("PgdConfig needs eps >= 0, iters >= 1, step > 0")

    @property
    def step_size(self) -> float:
        return self.eps / 5.0 if self.step is None else self.step


@dataclass(frozen=True)
class LimeConfig:
    n_samples: int = 200
    kernel_width: float = 0.25
    ridge: float = 1e-3


@dataclass
class SurrogateModel:
    weights: np.ndarray
    intercept: float
    r2: float


def _target(model, embeds, target):
    return int(_forward(model, embeds).label) if target is None else int(target)


def _prepare(model, x, target):
    embeds = as_embeddings(model, x)
    forward(model, embeds)  # validates shape and finiteness
    return embeds, _target(model, embeds, target)


def _grad(model, embeds, target, kind):
    return _grad_unchecked(model, embeds, target, kind)[0]


def attribute_vagrad(model: ClassifierModel, x, target=None, kind="prob") -> Attribution:
    embeds, y = _prepare(model, x, target)
    return Attribution("vagrad", np.linalg.norm(_grad(model, embeds, y, kind), axis=-1))


def attribute_gradinp(model: ClassifierModel, x, target=None, kind="prob") -> Attribution:
    embeds, y = _prepare(model, x, target)
    return Attribution("gradinp", np.sum(_grad(model, embeds, y, kind) * embeds, axis=-1))


def attribute_inggrad(model, x, steps=50, baseline=None, target=None, kind="prob") -> Attribution:
    """Right Riemann sum of gradients on the straight path from ``baseline``."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    embeds, y = _prepare(model, x, target)
    base = np.zeros_like(embeds) if baseline is None else np.asarray(baseline, dtype=np.float64)
    diff = embeds - base
    alphas = np.arange(1, steps + 1) / steps
    path = base[None] + alphas[:, None, None] * diff[None]
    avg_grad = _grad(model, path, y, kind).mean(axis=0)
    return Attribution("inggrad", np.sum(diff * avg_grad, axis=-1))


DEEPLIFT_EPS = 1e-9


def _rescale(delta_out, delta_in, local):
    small = np.abs(delta_in) < DEEPLIFT_EPS
    safe = np.where(small, 1.0, delta_in)
    return np.where(small, local, delta_out / safe)


def attribute_deeplift(model, x, baseline=None, target=None, kind="prob") -> Attribution:
    """DeepLIFT with the Rescale rule on every ReLU and on the output sigmoid.

    The binary softmax probability is ``sigmoid(margin)``, so the output
    nonlinearity gets a Rescale multiplier too; contributions then sum to
    ``s_y(x) - s_y(baseline)``.
    """
    embeds, y = _prepare(model, x, target)
    base = np.zeros_like(embeds) if baseline is None else np.asarray(baseline, dtype=np.float64)
    cur, ref = _forward(model, embeds), _forward(model, base)

    if kind == "prob":
        dm = (cur.logits[y] - cur.logits[1 - y]) - (ref.logits[y] - ref.logits[1 - y])
        ds = cur.probs[y] - ref.probs[y]
        local = _dlogits(cur, y, "prob")[y]
        mult = float(_rescale(np.array(ds), np.array(dm), np.array(local)))
        dlog = np.zeros(2)
        dlog[y], dlog[1 - y] = mult, -mult
    else:
        dlog = _dlogits(cur, y, kind)

    da2 = dlog @ model.W3
    dz2 = da2 * _rescale(cur.a2 - ref.a2, cur.z2 - ref.z2, (cur.z2 > 0).astype(float))
    da1 = (dz2 @ model.W2) / embeds.shape[0]
    dz1 = da1[None, :] * _rescale(cur.a1 - ref.a1, cur.z1 - ref.z1, (cur.z1 > 0).astype(float))
    mult_e = dz1 @ model.W1
    return Attribution("deeplift", np.sum(mult_e * (embeds - base), axis=-1))


def _score_batch(model, batch, y, kind):
    trace = _forward(model, batch)
    if kind == "prob":
        return trace.probs[..., y]
    if kind == "logit":
        return trace.logits[..., y]
    return trace.logits[..., y] - trace.logits[..., 1 - y]


def attribute_occlusion(model, x, target=None, kind="prob") -> Attribution:
    """Score drop when each row in turn is replaced by the PAD (zero) embedding."""
    embeds, y = _prepare(model, x, target)
    n = embeds.shape[0]
    # the clean input rides in the same batch so an already-PAD row scores exactly zero
    batch = np.repeat(embeds[None], n + 1, axis=0)
    batch[np.arange(n), np.arange(n)] = model.pad_vector
    scores = _score_batch(model, batch, y, kind)
    return Attribution("occlusion", scores[n] - scores[:n])


def fit_weighted_ridge(features, targets, weights, ridge=1e-3, retries=3) -> SurrogateModel:
    """Weighted least squares with an unpenalized intercept.

    A singular system is retried with the penalty multiplied by ten, up to
    ``retries`` times.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    total = w.sum()
    if total <= 0:
        raise NumericInputError("kernel weights sum to zero")
    x_mean = w @ X / total
    y_mean = w @ y / total
    Xc, yc = X - x_mean, y - y_mean
    gram = Xc.T @ (w[:, None] * Xc)
    rhs = Xc.T @ (w * yc)
    lam = ridge
    for _ in range(retries + 1):
        try:
            coef = np.linalg.solve(gram + lam * np.eye(X.shape[1]), rhs)
            if np.all(np.isfinite(coef)):
                break
        except np.linalg.LinAlgError:
            pass
        lam = lam * 10 if lam > 0 else 1e-12
    else:
        raise NumericInputError("weighted ridge system is singular")
    resid = yc - Xc @ coef
    ss_tot = w @ yc**2
    r2 = 1.0 - (w @ resid**2) / ss_tot if ss_tot > 0 else 1.0
    return SurrogateModel(coef, float(y_mean - x_mean @ coef), float(r2))


def lime_kernel(masks, kernel_width=0.25):
    """exp(-d^2 / width^2) with d the cosine distance to the all-ones mask."""
    masks = np.asarray(masks, dtype=np.float64)
    kept = masks.sum(axis=1)
    cos = np.sqrt(kept / masks.shape[1])
    return np.exp(-((1.0 - cos) ** 2) / kernel_width**2)


def lime_surrogate(model, x, cfg: LimeConfig, rng: np.random.Generator, target=None, kind="prob"):
    embeds, y = _prepare(model, x, target)
    n = embeds.shape[0]
    if cfg.n_samples < n + 1:
        raise ValueError(f"LIME needs at least n + 1 = {n + 1} samples, got {cfg.n_samples}")
    masks = np.ones((cfg.n_samples, n))
    masks[1:] = rng.random((cfg.n_samples - 1, n)) < 0.5
    batch = np.where(masks[..., None] > 0, embeds[None], model.pad_vector)
    outputs = _score_batch(model, batch, y, kind)
    return fit_weighted_ridge(masks, outputs, lime_kernel(masks, cfg.kernel_width), cfg.ridge)


def attribute_lime(model, x, cfg: LimeConfig | None = None, rng=None, target=None, kind="prob") -> Attribution:
    cfg = cfg or LimeConfig()
    rng = np.random.default_rng(0) if rng is None else rng
    return Attribution("lime", lime_surrogate(model, x, cfg, rng, target, kind).weights)


def unit_direction(g: np.ndarray) -> np.ndarray:
    """``g / ||g||_F`` computed without underflow; zero stays zero."""
    top = np.max(np.abs(g))
    if top == 0.0 or not np.isfinite(top):
        return np.zeros_like(g)
    scaled = g / top
    return scaled / np.linalg.norm(scaled)


def project_frobenius(delta: np.ndarray, eps: float) -> np.ndarray:
    norm = np.linalg.norm(delta)
    if norm > eps:
        return delta * (eps / norm) if norm > 0 else delta
    return delta


def pgd_descend(model, x, cfg: PgdConfig, target=None, kind="prob") -> np.ndarray:
    """Run all ``cfg.iters`` projected descent steps on the whole sentence."""
    embeds, y = _prepare(model, x, target)
    delta = np.zeros_like(embeds)
    alpha = cfg.step_size
    for _ in range(cfg.iters):
        g = _grad(model, embeds + delta, y, kind)
        step = unit_direction(g) if cfg.normalize else g
        delta = project_frobenius(delta - alpha * step, cfg.eps)
    return embeds + delta


def attribute_vapgd(model, x, cfg: PgdConfig | None = None, target=None, kind="prob") -> Attribution:
    cfg = cfg or PgdConfig()
    embeds, y = _prepare(model, x, target)
    moved = pgd_descend(model, embeds, cfg, y, kind)
    return Attribution("vapgd", np.linalg.norm(moved - embeds, axis=-1))


def attribute_pgdinp(model, x, cfg: PgdConfig | None = None, target=None, kind="prob") -> Attribution:
    cfg = cfg or PgdConfig()
    embeds, y = _prepare(model, x, target)
    moved = pgd_descend(model, embeds, cfg, y, kind)
    return Attribution("pgdinp", np.sum((embeds - moved) * embeds, axis=-1))


def attribute_random(x, rng: np.random.Generator) -> Attribution:
    """Uniform [0, 1) scores; ``x`` may be a TokenSequence, ids or embeddings."""
    return Attribution("random", rng.random(len(x)))
