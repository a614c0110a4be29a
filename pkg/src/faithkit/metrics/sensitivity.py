"""Minimal prediction-flipping perturbation restricted to a token subset.

The attack descends the probability of the clean class with normalized L2
steps on the selected rows only, projecting the cumulative perturbation onto
the Frobenius ball of the current radius. A doubling-then-bisection search
over the radius approximates the smallest radius at which the attack flips
the prediction.

Independent searches (one per token set) run in lockstep as lanes of one
batched attack, which amortizes the per-step numpy overhead. A lane's
result does not depend on which other lanes share the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from faithkit.attribution import unit_direction
from faithkit.metrics.removal import THRESHOLDS, relevant_set
from faithkit.model import _forward, as_embeddings, forward


@dataclass(frozen=True)
class AttackConfig:
    iters: int = 100
    step: float = 1.0
    start_radius: float = 1.0
    max_radius: float = 2.0**10
    bisect_rounds: int = 20
    verify_factor: float = 0.999
    max_restarts: int = 5


@dataclass
class RadiusSearch:
    radius: float
    found: bool
    bracketed: bool
    attacks: int


def _search_steps(cfg: AttackConfig):
    """Radius search as a coroutine: yields radii to try, receives attack outcomes.

    Doubles from ``start_radius`` until an attack succeeds (giving up past
    ``max_radius``), bisects, then checks that ``verify_factor`` times the
    result fails. A success there means the attack is not monotone in the
    radius around this point, so the search restarts below the probe.
    """
    calls = 0
    lo, hi = 0.0, cfg.start_radius
    while True:
        calls += 1
        if (yield hi):
            break
        lo, hi = hi, hi * 2.0
        if hi > cfg.max_radius:
            return RadiusSearch(float("inf"), False, False, calls)
    for _ in range(cfg.max_restarts + 1):
        for _ in range(cfg.bisect_rounds):
            mid = 0.5 * (lo + hi)
            calls += 1
            if (yield mid):
                hi = mid
            else:
                lo = mid
        probe = cfg.verify_factor * hi
        calls += 1
        if not (yield probe):
            return RadiusSearch(hi, True, True, calls)
        lo, hi = 0.0, probe
    return RadiusSearch(hi, True, False, calls)


class BatchedAttack:
    """Masked PGD on several row subsets of one input at once.

    Lane ``j`` perturbs rows ``sets[j]`` only. Rows are padded to the largest
    set; padded rows are kept inert and never touch the network. Only the
    sign of the logit margin decides success, and descending ``s_y`` along
    its normalized gradient is descending the margin, so the loop tracks the
    margin alone.
    """

    def __init__(self, model, embeds, sets, target):
        self.model = model
        self.embeds = embeds
        self.y = int(target)
        self.n = embeds.shape[0]
        self.sets = [np.unique(np.asarray(s, dtype=np.int64)) for s in sets]
        if not self.sets or any(s.size == 0 for s in self.sets):
            raise ValueError("attack mask must be non-empty")
        lanes, width = len(self.sets), max(s.size for s in self.sets)
        self.W1 = np.ascontiguousarray(model.W1)
        self.W1T = np.ascontiguousarray(model.W1.T)
        self.W2 = np.ascontiguousarray(model.W2)
        self.W2T = np.ascontiguousarray(model.W2.T)
        z_all = embeds @ model.W1.T + model.b1
        relu_all = np.maximum(z_all, 0.0)
        # padded rows sit at a negative pre-activation: their ReLU output and
        # gradient are zero, so their perturbation stays zero throughout
        self.z0 = np.full((lanes, width, model.hidden), -1.0)
        self.rest_sum = np.empty((lanes, model.hidden))
        for j, s in enumerate(self.sets):
            self.z0[j, : s.size] = z_all[s]
            rest = np.setdiff1d(np.arange(self.n), s)
            self.rest_sum[j] = relu_all[rest].sum(axis=0)
        # margin = logit_y - logit_other; the prediction flips when it turns negative
        # (or reaches zero for y = 1, since ties go to the lower class index)
        self.dmargin = model.W3[self.y] - model.W3[1 - self.y]
        self.bmargin = float(model.b3[self.y] - model.b3[1 - self.y])
        self.dmargin_n = self.dmargin / self.n
        self.width = width

    def _flipped(self, margin):
        return (margin < 0.0) | ((margin == 0.0) & (self.y == 1))

    def _eval(self, z0, rest, delta):
        lanes, width, d = delta.shape
        z1 = z0 + (delta.reshape(-1, d) @ self.W1T).reshape(lanes, width, -1)
        pooled = rest + np.maximum(z1, 0.0).sum(axis=1)
        z2 = (pooled / self.n) @ self.W2T + self.model.b2
        margin = np.maximum(z2, 0.0) @ self.dmargin + self.bmargin
        return z1, z2, margin

    def _direction(self, z1, z2):
        lanes, width, h = z1.shape
        dp = (self.dmargin_n * (z2 > 0.0)) @ self.W2
        g = ((dp[:, None, :] * (z1 > 0.0)).reshape(-1, h) @ self.W1).reshape(lanes, width, -1)
        gnorm = np.sqrt(np.einsum("lij,lij->l", g, g))
        bad = ~((gnorm > 0.0) & np.isfinite(gnorm))
        if bad.any():
            # underflow or overflow: take the careful path for those lanes
            for j in np.flatnonzero(bad):
                g[j] = unit_direction(g[j])
            gnorm = np.where(bad, 1.0, gnorm)
        return g / gnorm[:, None, None]

    def run(self, eps, iters: int = 100, step: float = 1.0):
        """Attack every lane at its own radius; return ``(success[L], deltas[L, width, d])``."""
        return self._drive([iter([float(e)]) for e in np.broadcast_to(eps, (len(self.sets),))],
                           iters, step, single=True)

    def search(self, cfg: AttackConfig) -> list[RadiusSearch]:
        return self._drive([_search_steps(cfg) for _ in self.sets], cfg.iters, cfg.step)

    def _drive(self, plans, iters, step, single=False):
        """Run one attack per requested radius on each lane until every plan is exhausted.

        ``plans`` are coroutines (radius searches) or, when ``single``, plain
        one-radius iterators whose outcome and final perturbation are returned.
        """
        lanes = len(plans)
        d = self.embeds.shape[1]
        clean_z1, clean_z2, clean_margin = self._eval(self.z0, self.rest_sum, np.zeros((lanes, self.width, d)))
        clean_flip = self._flipped(clean_margin)
        results: list = [None] * lanes
        final_delta = np.zeros((lanes, self.width, d))
        success = np.zeros(lanes, dtype=bool)

        def start(j, outcome):
            """Feed ``outcome`` to lane ``j``'s plan; return its next radius or None when done."""
            plan = plans[j]
            try:
                eps = next(plan) if outcome is None else plan.send(outcome)
            except StopIteration as stop:
                results[j] = stop.value
                return None
            return eps

        # lanes whose attack finishes without iterating (clean flip or zero radius)
        def settle(j, eps):
            while eps is not None and (clean_flip[j] or eps <= 0.0):
                if single:
                    success[j] = bool(clean_flip[j])
                    return None
                eps = start(j, bool(clean_flip[j]))
            return eps

        active, radii = [], []
        for j in range(lanes):
            eps = settle(j, start(j, None) if not single else next(plans[j]))
            if eps is not None:
                active.append(j)
                radii.append(eps)
        if not active:
            return (success, final_delta) if single else results

        act = np.array(active)
        eps = np.array(radii)
        delta = np.zeros((act.size, self.width, d))
        z1, z2 = clean_z1[act], clean_z2[act]
        z0, rest = self.z0[act], self.rest_sum[act]
        count = np.zeros(act.size, dtype=np.int64)
        while act.size:
            new = delta - step * self._direction(z1, z2)
            norm = np.sqrt(np.einsum("lij,lij->l", new, new))
            over = norm > eps
            if over.any():
                new[over] *= (eps[over] / norm[over])[:, None, None]
            fixed = (new == delta).reshape(act.size, -1).all(axis=1)
            delta = new
            z1, z2, margin = self._eval(z0, rest, delta)
            count += 1
            flipped = self._flipped(margin) & ~fixed
            done = flipped | fixed | (count >= iters)
            if not done.any():
                continue
            keep = np.ones(act.size, dtype=bool)
            for i in np.flatnonzero(done):
                j = int(act[i])
                if single:
                    success[j] = bool(flipped[i])
                    final_delta[j] = delta[i]
                    keep[i] = False
                    continue
                nxt = settle(j, start(j, bool(flipped[i])))
                if nxt is None:
                    keep[i] = False
                    continue
                eps[i] = nxt
                delta[i] = 0.0
                z1[i], z2[i] = clean_z1[j], clean_z2[j]
                count[i] = 0
            if not keep.all():
                act, eps, delta, count = act[keep], eps[keep], delta[keep], count[keep]
                z0, rest, z1, z2 = z0[keep], rest[keep], z1[keep], z2[keep]
        return (success, final_delta) if single else results

    def full(self, lane: int, delta):
        out = self.embeds.copy()
        s = self.sets[lane]
        out[s] += delta[: s.size]
        return out


def _clean_target(model, embeds, target):
    return int(forward(model, embeds).label) if target is None else int(target)


def pgd_attack(model, x, indices, eps, iters=100, step=1.0, target=None):
    """Attack rows ``indices`` within radius ``eps``.

    Returns ``(success, adversarial embeddings)``; success means some iterate
    changed the predicted label. Stops at the first success.
    """
    embeds = as_embeddings(model, x)
    attack = BatchedAttack(model, embeds, [indices], _clean_target(model, embeds, target))
    success, deltas = attack.run(eps, iters, step)
    return bool(success[0]), attack.full(0, deltas[0])


def search_radii(model, x, sets, cfg: AttackConfig = AttackConfig(), target=None) -> list[RadiusSearch]:
    embeds = as_embeddings(model, x)
    return BatchedAttack(model, embeds, sets, _clean_target(model, embeds, target)).search(cfg)


def radius_for_set(model, x, indices, cfg: AttackConfig = AttackConfig(), target=None) -> float:
    """Smallest flipping radius for a fixed token set; ``inf`` when the cap is hit."""
    return search_radii(model, x, [indices], cfg, target)[0].radius


def sensitivity_radius(model, x, attribution, q: float, cfg: AttackConfig = AttackConfig(), target=None) -> float:
    return radius_for_set(model, x, relevant_set(attribution, q), cfg, target)


@dataclass
class SensitivityResult:
    radii: np.ndarray
    thresholds: tuple[float, ...]
    success: np.ndarray = field(init=False)

    def __post_init__(self):
        self.radii = np.asarray(self.radii, dtype=np.float64)
        self.success = np.isfinite(self.radii)

    @property
    def n_failed(self) -> int:
        return int(np.sum(~self.success))

    @property
    def defined(self) -> bool:
        return bool(self.success.any())

    @property
    def auc(self) -> float:
        """Mean of the finite radii; NaN when every attack failed."""
        return float(self.radii[self.success].mean()) if self.defined else float("nan")


def sensitivity_auc(model, x, attribution, thresholds=THRESHOLDS, cfg: AttackConfig = AttackConfig(), target=None) -> SensitivityResult:
    embeds = as_embeddings(model, x)
    y = int(_forward(model, embeds).label) if target is None else int(target)
    keys = [tuple(sorted(relevant_set(attribution, q).tolist())) for q in thresholds]
    distinct = list(dict.fromkeys(keys))
    found = dict(zip(distinct, search_radii(model, embeds, distinct, cfg, y)))
    return SensitivityResult(np.array([found[k].radius for k in keys]), tuple(thresholds))
