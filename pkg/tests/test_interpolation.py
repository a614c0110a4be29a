import numpy as np
import pytest

from builders import end_to_end_map, random_ids, random_model, stable_model
from faithkit.attribution import attribute_gradinp, attribute_random
from faithkit.metrics.interpolation import interpolation_curve, interpolation_sets


def additive_case(rng, n=10):
    """Stable model whose tokens push the margin by distinct positive amounts."""
    m = stable_model(rng)
    A, _ = end_to_end_map(m, n)
    w = A[0, 0] - A[1, 0]
    unit = w / np.linalg.norm(w)
    amounts = rng.permutation(np.linspace(0.3, 2.0, n))
    E = amounts[:, None] * unit[None] + rng.normal(scale=0.01, size=(n, m.dim))
    E -= np.outer(E @ unit - amounts, unit)  # keep contributions exactly proportional to amounts
    return m, E


def test_sets_structure():
    order = np.array([5, 2, 7, 0, 1, 3, 4, 6, 8])
    sets = interpolation_sets(order, np.random.default_rng(0))
    assert sets[0] == (5, 2, 7, 0)
    for i, s in enumerate(sets):
        assert len(set(s)) == 4
        assert s[: 4 - i] == (5, 2, 7, 0)[: 4 - i]
        assert set(s[4 - i:]) <= {1, 3, 4, 6, 8}
    with pytest.raises(ValueError):
        interpolation_sets(order[:7], np.random.default_rng(0))


def test_additive_comprehensiveness_strictly_increases(rng):
    for _ in range(5):
        m, E = additive_case(rng)
        curve = interpolation_curve(m, E, attribute_gradinp(m, E), "comp", np.random.default_rng(1))
        assert not curve.degenerate
        assert curve.values[0] == 0.0 and curve.values[-1] == 1.0
        assert np.all(np.diff(curve.values) > 0)


def test_sensitivity_endpoints(rng):
    # a mean-pooled linear model weighs every row alike, so use a nonlinear one here
    m = random_model(rng, scale=3.0)
    E = m.embed(random_ids(rng, m, 12))
    curve = interpolation_curve(m, E, attribute_gradinp(m, E), "sens", np.random.default_rng(2))
    if not curve.degenerate:
        assert curve.values[0] == 0.0 and curve.values[-1] == 1.0
        assert np.all(curve.values >= 0.0)


def test_same_seed_same_curve(rng):
    m = random_model(rng, scale=2.0)
    E = m.embed(random_ids(rng, m, 12))
    a = attribute_random(E, np.random.default_rng(3))
    c1 = interpolation_curve(m, E, a, "comp", np.random.default_rng(9))
    c2 = interpolation_curve(m, E, a, "comp", np.random.default_rng(9))
    np.testing.assert_array_equal(c1.values, c2.values)
    assert c1.sets == c2.sets


def test_degenerate_denominator(rng):
    from builders import constant_model

    m = constant_model(rng)
    E = m.embed(random_ids(rng, m, 9))
    curve = interpolation_curve(m, E, attribute_gradinp(m, E), "comp", np.random.default_rng(0))
    assert curve.degenerate and np.all(np.isnan(curve.values))


def test_unknown_metric(rng):
    m = random_model(rng)
    E = m.embed(random_ids(rng, m, 9))
    with pytest.raises(ValueError):
        interpolation_curve(m, E, attribute_gradinp(m, E), "stab", np.random.default_rng(0))
