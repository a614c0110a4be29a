import numpy as np
import pytest

from builders import end_to_end_map, random_ids, random_model, stable_model
from faithkit.attribution import attribute_gradinp
from faithkit.certify import (
    CertifyConfig,
    attribute_certify,
    backward_bounds,
    concretize,
    ibp_bounds,
    relu_relaxation,
)
from faithkit.model import forward


def ball_samples(rng, shape, delta, count):
    """Points in the Frobenius ball: random directions, radii spread up to the surface."""
    dirs = rng.normal(size=(count,) + shape)
    dirs /= np.linalg.norm(dirs.reshape(count, -1), axis=1)[:, None, None]
    radii = delta * rng.random(count) ** (1.0 / 8)
    radii[: count // 10] = delta
    return dirs * radii[:, None, None]


def test_zero_radius_collapses(rng):
    m = random_model(rng, scale=2.0)
    E = m.embed(random_ids(rng, m, 9))
    trace = forward(m, E)
    ib = ibp_bounds(m, E, 0.0)
    np.testing.assert_allclose(ib.z1_lower, trace.z1, atol=1e-12)
    np.testing.assert_allclose(ib.z2_upper, trace.z2, atol=1e-12)
    np.testing.assert_allclose(ib.logits_lower, trace.logits, atol=1e-12)
    lo, up = concretize(backward_bounds(m, E, CertifyConfig(0.0)), E, 0.0)
    y = int(trace.label)
    assert lo == pytest.approx(trace.logits[y], abs=1e-9)
    assert up == pytest.approx(trace.logits[y], abs=1e-9)


def test_first_layer_is_dual_norm_ball(rng):
    m = random_model(rng)
    E = m.embed(random_ids(rng, m, 4))
    ib = ibp_bounds(m, E, 0.3)
    center = E @ m.W1.T + m.b1
    np.testing.assert_allclose(ib.z1_upper - center, 0.3 * np.linalg.norm(m.W1, axis=1)[None].repeat(4, 0))


def test_widths_monotone_in_delta(rng):
    m = random_model(rng, scale=2.0)
    E = m.embed(random_ids(rng, m, 7))
    prev_ibp, prev_lin = None, None
    for delta in (0.0, 0.01, 0.1, 0.5, 1.0, 3.0):
        ib = ibp_bounds(m, E, delta)
        width = ib.logits_upper - ib.logits_lower
        lo, up = concretize(backward_bounds(m, E, CertifyConfig(delta)), E, delta)
        assert np.all(ib.z2_lower <= ib.z2_upper) and lo <= up
        if prev_ibp is not None:
            assert np.all(width >= prev_ibp - 1e-12)
            assert up - lo >= prev_lin - 1e-12
        prev_ibp, prev_lin = width, up - lo


def test_relu_envelopes_hold(rng):
    lower = rng.normal(size=200) * 2
    upper = lower + rng.random(200) * 3
    up_s, up_c, lo_s = relu_relaxation(lower, upper)
    for t in np.linspace(0, 1, 11):
        z = lower + t * (upper - lower)
        assert np.all(lo_s * z <= np.maximum(z, 0) + 1e-12)
        assert np.all(np.maximum(z, 0) <= up_s * z + up_c + 1e-12)


def test_stable_input_gives_exact_affine_map(rng):
    m = stable_model(rng)
    E = m.embed(random_ids(rng, m, 6))
    A, c = end_to_end_map(m, 6)
    b = backward_bounds(m, E, CertifyConfig(0.5))
    y = b.target
    np.testing.assert_allclose(b.lower_coef, A[y], rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(b.upper_coef, A[y], rtol=1e-10, atol=1e-14)
    assert b.lower_bias == pytest.approx(c[y], rel=1e-10)
    assert b.upper_bias == pytest.approx(c[y], rel=1e-10)


def test_linear_tightness(rng):
    m = stable_model(rng)
    E = m.embed(random_ids(rng, m, 6))
    A, c = end_to_end_map(m, 6)
    delta = 0.7
    b = backward_bounds(m, E, CertifyConfig(delta))
    clean = float(np.sum(A[b.target] * E) + c[b.target])
    lo, up = concretize(b, E, delta)
    reach = delta * np.linalg.norm(A[b.target])
    assert lo == pytest.approx(clean - reach, abs=1e-9)
    assert up == pytest.approx(clean + reach, abs=1e-9)
    # the extreme point on the ball attains the bound
    worst = E - delta * A[b.target] / np.linalg.norm(A[b.target])
    assert forward(m, worst).logits[b.target] == pytest.approx(lo, abs=1e-9)


@pytest.mark.parametrize("case", range(20))
def test_monte_carlo_soundness(case):
    r = np.random.default_rng(100 + case)
    m = random_model(r, dim=10, hidden=12, scale=2.0)
    E = m.embed(random_ids(r, m, int(r.integers(1, 12))))
    delta = float(r.choice([0.01, 0.1, 0.5, 2.0]))
    b = backward_bounds(m, E, CertifyConfig(delta))
    lo, up = concretize(b, E, delta)
    ib = ibp_bounds(m, E, delta)
    pts = E[None] + ball_samples(r, E.shape, delta, 10_000)
    logits = forward(m, pts).logits[:, b.target]
    assert np.all(logits >= lo - 1e-9) and np.all(logits <= up + 1e-9)
    assert np.all(logits >= ib.logits_lower[b.target] - 1e-9)
    # the linear functions themselves bound the logit pointwise
    lin_lo = np.einsum("knd,nd->k", pts, b.lower_coef) + b.lower_bias
    lin_up = np.einsum("knd,nd->k", pts, b.upper_coef) + b.upper_bias
    assert np.all(lin_lo <= logits + 1e-9) and np.all(logits <= lin_up + 1e-9)


def test_certify_equals_logit_gradinp_on_stable_inputs(rng):
    m = stable_model(rng)
    for _ in range(5):
        E = m.embed(random_ids(rng, m, 8))
        np.testing.assert_allclose(attribute_certify(m, E, CertifyConfig(0.0)).scores,
                                   attribute_gradinp(m, E, kind="logit").scores, rtol=1e-10, atol=1e-14)
        np.testing.assert_allclose(attribute_certify(m, E, CertifyConfig(0.3)).scores,
                                   attribute_gradinp(m, E, kind="logit").scores, rtol=1e-10, atol=1e-14)


def test_zero_row_scores_zero(rng):
    m = random_model(rng)
    E = m.embed(random_ids(rng, m, 5))
    E[1] = 0.0
    assert attribute_certify(m, E).scores[1] == 0.0


def test_negative_delta_rejected():
    with pytest.raises(ValueError):
        CertifyConfig(-0.1)
