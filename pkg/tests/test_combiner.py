import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from corrfilt.combiner import (cprmcc_step, make_combiner, mixing_parameter,
                               update_b)
from corrfilt.filters import make_state, prmcc_step


def rng(seed=0):
    return np.random.default_rng(seed)


def test_mixing_parameter_values():
    assert mixing_parameter(0.0) == 0.5
    assert mixing_parameter(4.0) == pytest.approx(0.9820137900, abs=1e-10)
    assert mixing_parameter(-4.0) == pytest.approx(0.0179862100, abs=1e-10)
    # overflow-safe far into the tails
    assert mixing_parameter(-1000.0) == 0.0
    assert mixing_parameter(1000.0) == 1.0


@given(st.floats(-30, 30), st.floats(-30, 30))
def test_mixing_parameter_monotone_and_symmetric(a, b):
    if a < b:
        assert mixing_parameter(a) <= mixing_parameter(b)
    if a + 1e-6 < b:
        assert mixing_parameter(a) < mixing_parameter(b)
    assert mixing_parameter(-a) == pytest.approx(1 - mixing_parameter(a),
                                                 abs=1e-12)


def combiner(**overrides):
    kw = dict(theta1=8.0, theta2=2.0, lam=0.99, sigma=2.0, delta=1.0,
              alpha=0.0, epsilon=1e-4, mu_b=50.0, sigma_b=2.0, b_plus=4.0,
              beta=0.999, gamma=2.0, transfer_enabled=False)
    kw.update(overrides)
    return make_combiner(4, **kw)


def test_update_b_no_drive_cases():
    state = combiner(b0=0.7)
    update_b(state, 1.5, 0.3, 0.3, 0.6)   # y1 == y2
    assert state.b == 0.7
    update_b(state, 0.0, 0.9, 0.3, 0.6)   # zero error
    assert state.b == 0.7


def test_update_b_clamps():
    state = combiner(b0=3.9)
    update_b(state, 1.0, 10.0, -10.0, 0.5)
    assert state.b == 4.0
    state = combiner(b0=-3.9)
    update_b(state, 1.0, -10.0, 10.0, 0.5)
    assert state.b == -4.0


def test_update_b_matches_hand_formula():
    state = combiner(b0=0.2, mu_b=3.0, sigma_b=1.5)
    e, y1, y2, rho = 0.4, 1.0, 0.25, 0.7
    expected = 0.2 + 3.0 * math.exp(-e * e / (2 * 1.5**2)) * e * (y1 - y2) \
        * rho * (1 - rho)
    update_b(state, e, y1, y2, rho)
    assert state.b == pytest.approx(expected, rel=1e-14)


def test_fast_filter_convention_enforced():
    with pytest.raises(ValueError):
        make_combiner(4, theta1=2.0, theta2=8.0)
    make_combiner(4, theta1=2.0, theta2=2.0)  # equality is allowed


def test_frozen_mixing_combines_with_constant_rho():
    r = rng(2)
    state = combiner(b0=4.0, mu_b=0.0)
    rho_plus = mixing_parameter(4.0)
    for _ in range(50):
        x = r.standard_normal(4)
        d = r.standard_normal()
        _, out = cprmcc_step(state, x, d)
        assert out.rho == rho_plus
        assert np.allclose(out.w, rho_plus * state.f1.w
                           + (1 - rho_plus) * state.f2.w, rtol=1e-14)


def test_identical_components_stay_identical():
    r = rng(3)
    state = combiner(theta1=4.0, theta2=4.0)
    for _ in range(100):
        x = r.standard_normal(4)
        d = r.standard_normal()
        _, out = cprmcc_step(state, x, d)
        assert out.out1.y == out.out2.y
        assert np.array_equal(state.f1.w, state.f2.w)
    assert state.b == 0.0


def test_full_transfer_copies_fast_weights():
    # beta = 0 with a satisfied trigger replaces the slow weights entirely
    r = rng(4)
    state = combiner(beta=0.0, gamma=1.5, transfer_enabled=True, b0=3.0)
    # warm the fast filter so the components disagree
    for _ in range(20):
        x = r.standard_normal(4)
        cprmcc_step(state, x, float(np.array([1, 0, 0, 1]) @ x))
    x = r.standard_normal(4)
    d = float(np.array([1, 0, 0, 1]) @ x)
    y2 = float(state.f2.w @ x)
    y = mixing_parameter(state.b) * float(state.f1.w @ x) \
        + (1 - mixing_parameter(state.b)) * y2
    triggered = (d - y) ** 2 > 0 and (d - y2) ** 2 / (d - y) ** 2 > 1.5
    cprmcc_step(state, x, d)
    if triggered:
        assert np.array_equal(state.f2.w, state.f1.w)


def test_clamping_invariant_under_aggressive_mixing_steps():
    r = rng(5)
    state = combiner(mu_b=1e4, b_plus=2.5)
    for _ in range(300):
        x = r.standard_normal(4)
        d = 5.0 * r.standard_normal()
        _, out = cprmcc_step(state, x, d)
        assert abs(state.b) <= 2.5
        assert mixing_parameter(-2.5) <= out.rho <= mixing_parameter(2.5)


def test_combined_weights_are_convex_combination():
    r = rng(6)
    state = combiner()
    for _ in range(100):
        x = r.standard_normal(4)
        d = r.standard_normal()
        _, out = cprmcc_step(state, x, d)
        w = out.rho * state.f1.w + (1 - out.rho) * state.f2.w
        assert np.allclose(out.w, w, rtol=0, atol=0)
        assert 0.0 < out.rho < 1.0


def test_output_consistency_with_pre_update_weights():
    r = rng(7)
    state = combiner()
    for _ in range(50):
        x = r.standard_normal(4)
        d = r.standard_normal()
        w1_before = state.f1.w.copy()
        w2_before = state.f2.w.copy()
        b_before = state.b
        _, out = cprmcc_step(state, x, d)
        rho = mixing_parameter(b_before)
        assert out.rho == rho
        y = rho * float(w1_before @ x) + (1 - rho) * float(w2_before @ x)
        assert out.y == pytest.approx(y, rel=1e-14)
        assert out.e_prior == pytest.approx(d - y, rel=1e-12)


def test_components_follow_standalone_filters_when_no_transfer():
    # without transfer each component evolves exactly like a lone filter
    r = rng(8)
    state = combiner(theta1=6.0, theta2=2.0)
    lone1 = make_state(4, lam=0.99, sigma=2.0, theta=6.0)
    lone2 = make_state(4, lam=0.99, sigma=2.0, theta=2.0)
    for _ in range(100):
        x = r.standard_normal(4)
        d = r.standard_normal()
        cprmcc_step(state, x, d)
        prmcc_step(lone1, x, d)
        prmcc_step(lone2, x, d)
    assert np.allclose(state.f1.w, lone1.w, rtol=0, atol=0)
    assert np.allclose(state.f2.w, lone2.w, rtol=0, atol=0)
    assert np.allclose(state.f1.P, lone1.P, rtol=0, atol=0)
