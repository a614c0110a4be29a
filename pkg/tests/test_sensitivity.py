import numpy as np
import pytest

from builders import constant_model, end_to_end_map, random_ids, random_model, stable_model, with_margin
from faithkit.attribution import Attribution
from faithkit.metrics.sensitivity import (
    AttackConfig,
    BatchedAttack,
    SensitivityResult,
    pgd_attack,
    radius_for_set,
    search_radii,
    sensitivity_auc,
)


def margin_case(rng, n, margin):
    """Stable model with a prescribed clean margin; returns the margin weight block too."""
    m = stable_model(rng)
    E = m.embed(random_ids(rng, m, n))
    m = with_margin(m, E, margin)
    A, _ = end_to_end_map(m, n)
    y = 0 if margin > 0 else 1
    return m, E, A[y] - A[1 - y]


def test_constant_model_never_flips(rng):
    m = constant_model(rng)
    E = m.embed(random_ids(rng, m, 5))
    for eps in (0.0, 1.0, 100.0):
        assert not pgd_attack(m, E, [0, 1, 2], eps)[0]
    assert radius_for_set(m, E, [0, 1]) == float("inf")


def test_zero_radius_fails(rng):
    m, E, _ = margin_case(rng, 5, 1.0)
    ok, adv = pgd_attack(m, E, [0, 1], 0.0)
    assert not ok
    np.testing.assert_array_equal(adv, E)


def test_attack_stays_on_mask_and_in_ball(rng):
    m = random_model(rng, scale=2.0)
    E = m.embed(random_ids(rng, m, 8))
    _, adv = pgd_attack(m, E, [1, 4], 0.8)
    untouched = np.setdiff1d(np.arange(8), [1, 4])
    np.testing.assert_array_equal(adv[untouched], E[untouched])
    assert np.linalg.norm(adv - E) <= 0.8 + 1e-9


@pytest.mark.parametrize("case", range(10))
def test_full_set_hits_hyperplane_distance(case):
    r = np.random.default_rng(case)
    n = int(r.integers(2, 15))
    margin = float(r.choice([-1, 1]) * r.uniform(0.2, 2.0))
    m, E, w = margin_case(r, n, margin)
    expected = abs(margin) / np.linalg.norm(w)
    got = radius_for_set(m, E, np.arange(n))
    assert got == pytest.approx(expected, rel=0.02)
    assert pgd_attack(m, E, np.arange(n), expected * 1.01)[0]
    assert not pgd_attack(m, E, np.arange(n), expected * 0.99)[0]


def test_subset_distance(rng):
    m, E, w = margin_case(rng, 10, 1.5)
    s = [2, 5, 7]
    expected = 1.5 / np.linalg.norm(w[s])
    assert radius_for_set(m, E, s) == pytest.approx(expected, rel=0.02)


def test_bracketing_and_nesting(rng):
    for _ in range(5):
        m = random_model(rng, scale=3.0)
        E = m.embed(random_ids(rng, m, 10))
        full = radius_for_set(m, E, np.arange(10))
        sub = radius_for_set(m, E, [0, 3, 6])
        for r, s in ((full, np.arange(10)), (sub, [0, 3, 6])):
            if np.isfinite(r):
                assert pgd_attack(m, E, s, r)[0]
                assert not pgd_attack(m, E, s, 0.999 * r * (1 - 1e-6))[0]
        assert full <= sub * 1.02 or not np.isfinite(sub)


def test_lanes_do_not_interact(rng):
    m = random_model(rng, scale=3.0)
    E = m.embed(random_ids(rng, m, 12))
    sets = [[0], [1, 2], list(range(6)), [11, 3, 5, 7]]
    together = search_radii(m, E, sets)
    for s, res in zip(sets, together):
        alone = search_radii(m, E, [s])[0]
        assert (alone.radius, alone.found, alone.attacks) == (res.radius, res.found, res.attacks)


def test_batched_run_matches_single(rng):
    m = random_model(rng, scale=3.0)
    E = m.embed(random_ids(rng, m, 9))
    attack = BatchedAttack(m, E, [[0, 1], [4]], 0)
    flags, _ = attack.run(np.array([0.5, 3.0]))
    assert flags[0] == pgd_attack(m, E, [0, 1], 0.5, target=0)[0]
    assert flags[1] == pgd_attack(m, E, [4], 3.0, target=0)[0]


def test_empty_mask_rejected(rng):
    m = random_model(rng)
    with pytest.raises(ValueError):
        pgd_attack(m, m.embed(random_ids(rng, m, 3)), [], 1.0)


def test_auc_and_sentinels(rng):
    m, E, w = margin_case(rng, 10, 1.0)
    a = Attribution("x", np.arange(10.0)[::-1])
    res = sensitivity_auc(m, E, a)
    assert res.n_failed == 0 and len(res.radii) == 5
    assert res.auc == pytest.approx(np.mean(res.radii))
    # radii shrink as the set grows
    assert np.all(np.diff(res.radii) <= 1e-6)

    c = constant_model(rng)
    dead = sensitivity_auc(c, c.embed(random_ids(rng, c, 6)), Attribution("x", np.zeros(6)),
                           cfg=AttackConfig(max_radius=8.0))
    assert dead.n_failed == 5 and not dead.defined and np.isnan(dead.auc)


def test_auc_of_equal_radii():
    assert SensitivityResult(np.full(5, 0.7), (0.1,) * 5).auc == pytest.approx(0.7)
    mixed = SensitivityResult(np.array([1.0, np.inf, 3.0]), (0.1, 0.2, 0.3))
    assert mixed.auc == 2.0 and mixed.n_failed == 1
