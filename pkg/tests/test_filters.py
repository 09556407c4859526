import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corrfilt.filters import (NumericalFault, error_nonlinearity, gain_vector,
                              iplms_step, ipmcc_step, lms_step, make_state,
                              mcc_step, mcc_weight, prmcc_step,
                              proportionate_gains, rmcc_step, update_P)


def rng(seed=0):
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# scalar primitives

def test_mcc_weight_values():
    assert mcc_weight(0.0, 1.7) == 1.0
    assert mcc_weight(5.0, math.inf) == 1.0
    assert mcc_weight(1.0, 1.0) == pytest.approx(0.6065306597, abs=1e-10)
    # underflow for huge errors is the outlier-rejection mechanism
    assert mcc_weight(1e9, 1.0) == 0.0


def test_error_nonlinearity_values():
    assert error_nonlinearity(0.0, 2.0) == 0.0
    assert error_nonlinearity(1.0, 1.0) == pytest.approx(0.6065306597, abs=1e-10)
    assert error_nonlinearity(3.0, math.inf) == 3.0


def test_error_nonlinearity_peak_by_grid_search():
    sigma = 1.3
    grid = np.linspace(0, 10 * sigma, 200001)
    values = np.exp(-grid**2 / (2 * sigma**2)) * grid
    peak = grid[np.argmax(values)]
    assert peak == pytest.approx(sigma, rel=1e-4)
    assert values.max() == pytest.approx(sigma * math.exp(-0.5), rel=1e-8)


@given(st.floats(-50, 50), st.floats(0.1, 10))
def test_error_nonlinearity_is_odd_and_bounded(e, sigma):
    f = error_nonlinearity(e, sigma)
    assert f == pytest.approx(-error_nonlinearity(-e, sigma), abs=1e-12)
    assert abs(f) <= sigma * math.exp(-0.5) * (1 + 1e-12)


# ---------------------------------------------------------------------------
# proportionate gains

def test_proportionate_gains_uniform_when_alpha_is_minus_one():
    g = proportionate_gains(np.array([0.5, 0.5]), 2.0, -1.0, 0.123)
    assert np.allclose(g, [1.0, 1.0], rtol=0, atol=0)


def test_proportionate_gains_sparse_eight_taps():
    w = np.array([0.7071, 0, 0, 0, 0, 0, 0, 0.7071])
    g = proportionate_gains(w, 1.0, 0.0, 1e-12)
    # 1/16 floor plus 0.7071 / (2 * 1.4142) share on the active taps
    assert g[0] == pytest.approx(0.3125, abs=1e-9)
    assert g[-1] == pytest.approx(0.3125, abs=1e-9)
    assert np.allclose(g[1:-1], 0.0625, atol=1e-12)


def test_proportionate_gains_all_zero_weights():
    g = proportionate_gains(np.zeros(4), 4.0, 0.0, 1e-4)
    assert np.allclose(g, 0.5, rtol=0, atol=0)


@given(st.integers(1, 16), st.floats(0.01, 100), st.floats(-1, 1,
       exclude_max=True), st.floats(1e-8, 1e-2), st.integers(0, 2**32 - 1))
@settings(max_examples=200)
def test_proportionate_trace_bounds(n, theta, alpha, epsilon, seed):
    w = np.random.default_rng(seed).standard_normal(n)
    g = proportionate_gains(w, theta, alpha, epsilon)
    assert np.all(g > 0)
    total = g.sum()
    l1 = np.abs(w).sum()
    assert 0 < total <= theta * (1 + 1e-12)
    assert theta - total <= theta * (1 + alpha) * epsilon / (2 * l1 + epsilon) + 1e-12


# ---------------------------------------------------------------------------
# gain vector and inverse-correlation recursion

def test_gain_vector_unit_case():
    state = make_state(2, lam=1.0, delta=1.0)
    x = np.array([1.0, 0.0])
    k = gain_vector(state, x, 123.0)  # sigma = inf: error value irrelevant
    assert np.allclose(k, [0.5, 0.0], rtol=0, atol=0)


def test_gain_vector_zero_regressor():
    state = make_state(3, lam=0.9, sigma=1.0)
    assert np.all(gain_vector(state, np.zeros(3), 1.0) == 0.0)


def test_gain_vector_matches_dense_formula():
    r = rng(1)
    state = make_state(2, lam=0.97, sigma=1.3)
    A = r.standard_normal((2, 2))
    state.P = A @ A.T + np.eye(2)  # symmetric positive definite
    x = r.standard_normal(2)
    e = 0.7
    kw = math.exp(-e**2 / (2 * 1.3**2))
    expected = state.P @ x / (0.97 + kw * x @ state.P @ x)
    assert np.allclose(gain_vector(state, x, e), expected, rtol=1e-12)


def test_update_P_identity_cases():
    state = make_state(3, lam=1.0, sigma=2.0)
    P0 = state.P.copy()
    x = np.zeros(3)
    k = gain_vector(state, x, 0.5)
    assert np.allclose(update_P(state, x, k, 0.5), P0, rtol=0, atol=0)

    # scalar least-squares: accumulated correlation 1 + 1 = 2
    state = make_state(1, lam=1.0, delta=1.0)
    x = np.array([1.0])
    k = gain_vector(state, x, 0.0)
    assert update_P(state, x, k, 0.0)[0, 0] == pytest.approx(0.5, abs=1e-15)


def test_inverse_identity_over_random_steps():
    # P(n) must invert the explicitly accumulated weighted autocorrelation
    r = rng(7)
    n_taps, lam, sigma, delta = 3, 0.98, 1.1, 2.0
    state = make_state(n_taps, lam=lam, sigma=sigma, delta=delta, theta=2.0)
    A = delta * np.eye(n_taps)
    for _ in range(50):
        x = r.standard_normal(n_taps)
        d = r.standard_normal()
        _, out = prmcc_step(state, x, d)
        kw = math.exp(-out.e_prior**2 / (2 * sigma**2))
        A = lam * A + kw * np.outer(x, x)
        assert np.max(np.abs(state.P @ A - np.eye(n_taps))) < 1e-8


def test_gain_equals_P_times_x_after_step():
    r = rng(3)
    state = make_state(4, lam=0.99, sigma=1.5, theta=4.0)
    for _ in range(100):
        x = r.standard_normal(4)
        _, out = prmcc_step(state, x, r.standard_normal())
        post = state.P @ x
        assert np.allclose(out.k, post, rtol=1e-8, atol=1e-12)


# ---------------------------------------------------------------------------
# full steps

def test_prmcc_single_step_hand_oracle():
    # one step from initialization, evaluated line by line with scalars
    lam, delta, sigma, theta, alpha, eps = 0.995, 1.0, 1.0, 2.0, 0.0, 1e-4
    state = make_state(2, lam=lam, sigma=sigma, delta=delta, theta=theta,
                       alpha=alpha, epsilon=eps)
    x = np.array([1.0, 0.0])
    d = 1.0

    e = d - 0.0
    kw = math.exp(-e * e / (2 * sigma * sigma))
    k1 = 1.0 / (lam + kw * 1.0)        # P(0) = I, x = e1
    g = theta * (1 - alpha) / 4        # zero weights: share term vanishes
    w1 = g * k1 * (kw * e)
    p11 = (1.0 - kw * k1) / lam
    p22 = 1.0 / lam

    _, out = prmcc_step(state, x, d)
    assert out.e_prior == e
    assert out.y == 0.0
    assert state.w[0] == pytest.approx(w1, rel=1e-15)
    assert state.w[1] == 0.0
    assert np.allclose(out.k, [k1, 0.0], rtol=1e-15)
    assert np.allclose(out.g, [g, g], rtol=0, atol=0)
    assert state.P[0, 0] == pytest.approx(p11, rel=1e-15)
    assert state.P[1, 1] == pytest.approx(p22, rel=1e-15)
    assert state.P[0, 1] == 0.0
    assert out.e_post == pytest.approx(d - w1, rel=1e-15)
    assert state.n == 1


def test_rmcc_zero_error_leaves_weights():
    state = make_state(3, lam=0.99, sigma=1.0)
    state.w = np.array([0.2, -0.1, 0.4])
    x = np.array([1.0, 2.0, -1.0])
    d = float(state.w @ x)
    _, out = rmcc_step(state, x, d)
    assert out.e_prior == 0.0
    assert np.allclose(state.w, [0.2, -0.1, 0.4], rtol=0, atol=0)


def test_rmcc_noiseless_scalar_convergence():
    # initialization bias decays like lam^n, so a short run needs lam well
    # below one
    state = make_state(1, lam=0.8, sigma=1.0, delta=1.0)
    w_true = 0.8
    r = rng(11)
    for _ in range(100):
        x = r.standard_normal(1)
        rmcc_step(state, x, w_true * x[0])
    assert abs(state.w[0] - w_true) < 1e-6


def test_prmcc_reduces_to_rmcc_with_uniform_gains():
    # theta = N, alpha = -1 makes every proportionate gain exactly one
    r = rng(5)
    n = 4
    sp = make_state(n, lam=0.99, sigma=1.2, theta=float(n), alpha=-1.0,
                    epsilon=0.37)
    sr = make_state(n, lam=0.99, sigma=1.2)
    for _ in range(300):
        x = r.standard_normal(n)
        d = r.standard_normal()
        prmcc_step(sp, x, d)
        rmcc_step(sr, x, d)
        scale = max(1.0, np.max(np.abs(sr.w)))
        assert np.max(np.abs(sp.w - sr.w)) <= 1e-12 * scale


def test_least_squares_limit_of_recursive_filters():
    # sigma = 1e8 must be indistinguishable from the exact inf sentinel
    r = rng(9)
    n = 8
    w_true = np.zeros(n)
    w_true[[0, 7]] = 0.7071
    huge = make_state(n, lam=0.995, sigma=1e8, theta=3.0)
    inf = make_state(n, lam=0.995, sigma=math.inf, theta=3.0)
    for i in range(1000):
        x = r.standard_normal(n)
        d = float(w_true @ x) + 0.1 * r.standard_normal()
        if i % 97 == 0:
            d += 30.0  # occasional outlier
        prmcc_step(huge, x, d)
        prmcc_step(inf, x, d)
        assert np.max(np.abs(huge.w - inf.w)) < 1e-6


def test_outlier_robustness_increment_bound():
    # per-step weight change is bounded uniformly in the desired output
    state_template = make_state(4, lam=0.99, sigma=1.5, theta=4.0)
    state_template.w = np.array([0.5, -0.2, 0.0, 0.1])
    x = np.array([1.0, -2.0, 0.5, 0.3])
    bound_sigma = 1.5 * math.exp(-0.5)
    for d in [0.0, 1.0, 1e3, -1e6, 1e12]:
        state = make_state(4, lam=0.99, sigma=1.5, theta=4.0)
        state.w = state_template.w.copy()
        w_before = state.w.copy()
        _, out = prmcc_step(state, x, d)
        increment = np.linalg.norm(state.w - w_before)
        assert increment <= np.linalg.norm(out.g * out.k) * bound_sigma + 1e-12


# ---------------------------------------------------------------------------
# gradient family

def test_lms_scalar_step():
    state = make_state(1, with_P=False)
    _, out = lms_step(state, np.array([1.0]), 1.0, mu=0.5)
    assert state.w[0] == 0.5
    assert out.e_prior == 1.0
    assert out.e_post == 0.5


def test_gradient_steps_zero_error_no_update():
    for fn in (lms_step, mcc_step, iplms_step, ipmcc_step):
        state = make_state(2, sigma=1.0, with_P=False)
        state.w = np.array([0.3, -0.4])
        x = np.array([2.0, 1.0])
        fn(state, x, float(state.w @ x), 0.1)
        assert np.allclose(state.w, [0.3, -0.4], rtol=0, atol=0)


def test_mcc_with_infinite_bandwidth_is_lms():
    r = rng(13)
    a = make_state(3, sigma=math.inf, with_P=False)
    b = make_state(3, sigma=math.inf, with_P=False)
    for _ in range(50):
        x = r.standard_normal(3)
        d = r.standard_normal()
        mcc_step(a, x, d, 0.05)
        lms_step(b, x, d, 0.05)
    assert np.array_equal(a.w, b.w)


def test_iplms_alpha_minus_one_is_lms_with_scaled_step():
    r = rng(17)
    n = 4
    a = make_state(n, alpha=-1.0, with_P=False)
    b = make_state(n, with_P=False)
    for _ in range(50):
        x = r.standard_normal(n)
        d = r.standard_normal()
        iplms_step(a, x, d, 0.4)
        lms_step(b, x, d, 0.4 / n)
    assert np.allclose(a.w, b.w, rtol=1e-12)


def test_ipmcc_single_step_hand_oracle():
    mu, sigma, alpha, eps = 0.6, 1.0, 0.0, 1e-4
    state = make_state(2, sigma=sigma, alpha=alpha, epsilon=eps, with_P=False)
    state.w = np.array([0.5, 0.0])
    x = np.array([1.0, 1.0])
    d = 1.0
    e = d - 0.5
    g0 = 1.0 / 4 + 0.5 / (2 * 0.5 + eps)
    g1 = 1.0 / 4
    f = math.exp(-e * e / 2) * e
    _, out = ipmcc_step(state, x, d, mu)
    assert state.w[0] == pytest.approx(0.5 + mu * f * g0, rel=1e-14)
    assert state.w[1] == pytest.approx(mu * f * g1, rel=1e-14)
    assert out.g[0] == pytest.approx(g0, rel=1e-14)


# ---------------------------------------------------------------------------
# validation and faults

def test_make_state_validation():
    with pytest.raises(ValueError):
        make_state(0)
    with pytest.raises(ValueError):
        make_state(2, lam=0.0)
    with pytest.raises(ValueError):
        make_state(2, lam=1.2)
    with pytest.raises(ValueError):
        make_state(2, sigma=0.0)
    with pytest.raises(ValueError):
        make_state(2, alpha=1.0)
    with pytest.raises(ValueError):
        make_state(2, theta=-1.0)


def test_numerical_fault_on_nonfinite_state():
    state = make_state(2, lam=0.9)
    state.P = np.array([[np.inf, 0.0], [0.0, 1.0]])
    with pytest.raises(NumericalFault):
        gain_vector(state, np.array([1.0, 1.0]), 0.0)
