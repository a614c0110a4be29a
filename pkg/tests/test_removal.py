import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from builders import end_to_end_map, random_ids, random_model, stable_model
from faithkit.attribution import Attribution, attribute_gradinp
from faithkit.metrics import (
    comprehensiveness,
    comprehensiveness_auc,
    relevant_set,
    relevant_size,
    removal_auc,
    sufficiency,
)
from faithkit.model import forward


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


@pytest.mark.parametrize("n,q,size", [(1, 0.1, 1), (10, 0.1, 1), (10, 0.5, 5), (5, 0.1, 1),
                                      (5, 0.3, 2), (15, 0.1, 2), (25, 0.1, 3), (7, 1.0, 7)])
def test_relevant_size(n, q, size):
    # 15 * 0.1 = 1.5 rounds half up to 2; 5 * 0.3 = 1.5 likewise
    assert relevant_size(n, q) == size


def test_relevant_size_rejects_bad_threshold():
    with pytest.raises(ValueError):
        relevant_size(5, 0.0)


def test_relevant_set_is_top_of_rank():
    a = Attribution("x", np.array([0.1, 0.7, 0.3, 0.9]))
    assert relevant_set(a, 0.5).tolist() == [3, 1]


def linear_setup(rng, n=10):
    m = stable_model(rng)
    E = m.embed(random_ids(rng, m, n))
    A, c = end_to_end_map(m, n)
    logits = np.einsum("cnd,nd->c", A, E) + c
    y = int(np.argmax(logits))
    w = A[y] - A[1 - y]
    return m, E, w, float(logits[y] - logits[1 - y]), y


def test_comprehensiveness_closed_form(rng):
    m, E, w, margin, y = linear_setup(rng)
    a = attribute_gradinp(m, E)
    contrib = np.sum(w * E, axis=1)
    for q in (0.1, 0.2, 0.3, 0.4, 0.5, 1.0):
        s = relevant_set(a, q)
        expected = sigmoid(margin) - sigmoid(margin - contrib[s].sum())
        assert comprehensiveness(m, E, a, q) == pytest.approx(expected, abs=1e-12)


def test_sufficiency_closed_form(rng):
    m, E, w, margin, y = linear_setup(rng)
    a = attribute_gradinp(m, E)
    contrib = np.sum(w * E, axis=1)
    for q in (0.1, 0.3, 0.5):
        outside = np.setdiff1d(np.arange(len(E)), relevant_set(a, q))
        expected = sigmoid(margin) - sigmoid(margin - contrib[outside].sum())
        assert sufficiency(m, E, a, q) == pytest.approx(expected, abs=1e-12)


def test_boundaries(rng):
    m = random_model(rng)
    E = m.embed(random_ids(rng, m, 6))
    a = attribute_gradinp(m, E)
    y = int(forward(m, E).label)
    assert sufficiency(m, E, a, 1.0) == 0.0
    full = forward(m, E).probs[y] - forward(m, np.zeros_like(E)).probs[y]
    assert comprehensiveness(m, E, a, 1.0) == pytest.approx(full, abs=1e-15)
    one = E[:1]
    assert sufficiency(m, one, attribute_gradinp(m, one), 0.5) == 0.0


def test_removing_pad_row_changes_nothing(rng):
    m = random_model(rng)
    E = m.embed(random_ids(rng, m, 5))
    E[3] = 0.0
    a = Attribution("x", np.eye(5)[3])
    assert comprehensiveness(m, E, a, 0.1) == 0.0


@given(st.integers(0, 2**32 - 1))
def test_values_are_probability_differences(seed):
    r = np.random.default_rng(seed)
    m = random_model(r, vocab=12, dim=6, hidden=8, scale=3.0)
    E = m.embed(random_ids(r, m, int(r.integers(1, 15))))
    a = Attribution("r", r.random(len(E)))
    for q in (0.1, 0.5):
        assert -1.0 <= comprehensiveness(m, E, a, q) <= 1.0
        assert -1.0 <= sufficiency(m, E, a, q) <= 1.0


def test_auc_is_mean():
    assert removal_auc([0.3] * 5) == pytest.approx(0.3)
    assert removal_auc([0, 0, 0, 0, 1]) == pytest.approx(0.2)
    assert removal_auc([1, 0, 0, 0, 0]) == removal_auc([0, 0, 0, 0, 1])


def test_auc_matches_per_threshold_values(rng):
    m = random_model(rng)
    E = m.embed(random_ids(rng, m, 12))
    a = attribute_gradinp(m, E)
    per = [comprehensiveness(m, E, a, q) for q in (0.1, 0.2, 0.3, 0.4, 0.5)]
    assert comprehensiveness_auc(m, E, a) == pytest.approx(np.mean(per), abs=1e-15)
