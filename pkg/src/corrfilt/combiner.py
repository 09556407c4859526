"""Adaptive convex combination of two proportionate recursive filters.

A fast filter (large trace controller) and a slow one (small trace
controller) run in parallel on the same data; a sigmoid-mapped mixing state
blends their outputs and weights.  The mixing state is driven by a
correntropy-weighted stochastic-gradient rule and clamped to a symmetric
interval so its update never stalls at the sigmoid saturation.  Optionally,
when the slow filter's error is much larger than the combined error, part of
the fast weights is copied over to the slow filter.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .filters import (FilterState, NumericalFault, StepOutput,
                      error_nonlinearity, gain_vector, make_state, mcc_weight,
                      proportionate_gains, update_P)


@dataclasses.dataclass
class CombinerState:
    """Two component filter states plus the mixing state and its parameters.

    Component 1 is the fast filter: theta1 >= theta2 is enforced.  ``b`` is
    clamped to [-b_plus, +b_plus] at every update.
    """

    f1: FilterState
    f2: FilterState
    b: float = 0.0
    b_plus: float = 4.0
    mu_b: float = 50.0
    sigma_b: float = 2.0
    beta: float = 0.999
    gamma: float = 2.0
    transfer_enabled: bool = True

    def __post_init__(self):
        if self.f1.theta < self.f2.theta:
            raise ValueError("component 1 must be the fast filter "
                             "(theta1 >= theta2)")
        if not self.b_plus > 0.0:
            raise ValueError("b_plus must be positive")
        if abs(self.b) > self.b_plus:
            raise ValueError("b must start inside [-b_plus, b_plus]")
        if not self.mu_b >= 0.0:
            raise ValueError("mu_b must be >= 0")
        if not self.sigma_b > 0.0:
            raise ValueError("sigma_b must be positive")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must lie in [0, 1)")
        if not self.gamma > 1.0:
            raise ValueError("gamma must be > 1")


def make_combiner(n_taps: int, *, theta1: float, theta2: float,
                  lam: float = 0.995, sigma: float = math.inf,
                  delta: float = 1.0, alpha: float = 0.0,
                  epsilon: float = 1e-4, mu_b: float = 50.0,
                  sigma_b: float = 2.0, b_plus: float = 4.0,
                  beta: float = 0.999, gamma: float = 2.0,
                  transfer_enabled: bool = True, b0: float = 0.0) -> CombinerState:
    """Freshly initialized combination of two filters sharing all parameters
    except the trace controller."""
    common = dict(lam=lam, sigma=sigma, delta=delta, alpha=alpha,
                  epsilon=epsilon)
    return CombinerState(f1=make_state(n_taps, theta=theta1, **common),
                         f2=make_state(n_taps, theta=theta2, **common),
                         b=b0, b_plus=b_plus, mu_b=mu_b, sigma_b=sigma_b,
                         beta=beta, gamma=gamma,
                         transfer_enabled=transfer_enabled)


def mixing_parameter(b: float) -> float:
    """Sigmoid rho = 1 / (1 + exp(-b)), evaluated overflow-safely."""
    if b >= 0.0:
        return 1.0 / (1.0 + math.exp(-b))
    eb = math.exp(b)
    return eb / (1.0 + eb)


def update_b(state: CombinerState, e_prior_overall: float, y1: float,
             y2: float, rho: float) -> float:
    """Clamped stochastic-gradient update of the mixing state.

    The driving term vanishes when the components agree (y1 = y2) or when
    the overall error is zero.
    """
    e = e_prior_overall
    step = (state.mu_b * mcc_weight(e, state.sigma_b) * e * (y1 - y2)
            * rho * (1.0 - rho))
    b = state.b + step
    state.b = min(max(b, -state.b_plus), state.b_plus)
    return state.b


@dataclasses.dataclass
class CombinerOutput:
    """Combined prediction and error, the mixing value used this step, both
    component step outputs, and the combined weight vector."""

    y: float
    e_prior: float
    rho: float
    out1: StepOutput
    out2: StepOutput
    w: np.ndarray


def cprmcc_step(state: CombinerState, x: np.ndarray, d: float):
    """One combined step.

    Order: component predictions, mixing value from the previous b, combined
    output and error, mixing-state update, then the two component updates and
    the convex weight combination.  The same mixing value rho (from the b
    before this step's update) is used for both the output and the weight
    combination.  When the transfer rule triggers, the slow filter keeps a
    fraction beta of its own update and receives 1 - beta of the fast
    weights.
    """
    f1, f2 = state.f1, state.f2
    w1, w2 = f1.w, f2.w
    y1 = float(w1 @ x)
    y2 = float(w2 @ x)
    rho = mixing_parameter(state.b)
    y = rho * y1 + (1.0 - rho) * y2
    e = d - y
    update_b(state, e, y1, y2, rho)

    e1 = d - y1
    e2 = d - y2
    Px1 = f1.P @ x
    Px2 = f2.P @ x
    k1 = gain_vector(f1, x, e1, Px=Px1)
    k2 = gain_vector(f2, x, e2, Px=Px2)
    f1.P = update_P(f1, x, k1, e1, Px=Px1)
    f2.P = update_P(f2, x, k2, e2, Px=Px2)
    g1 = proportionate_gains(w1, f1.theta, f1.alpha, f1.epsilon)
    g2 = proportionate_gains(w2, f2.theta, f2.alpha, f2.epsilon)
    f1.w = w1 + g1 * (k1 * error_nonlinearity(e1, f1.sigma))
    w2_own = w2 + g2 * (k2 * error_nonlinearity(e2, f2.sigma))
    # a zero overall error gives no evidence for a transfer
    if state.transfer_enabled and e * e > 0.0 and (e2 * e2) / (e * e) > state.gamma:
        f2.w = state.beta * w2_own + (1.0 - state.beta) * f1.w
    else:
        f2.w = w2_own
    f1.n += 1
    f2.n += 1
    if not (np.isfinite(f1.w).all() and np.isfinite(f2.w).all()):
        raise NumericalFault("combiner weights are not finite after update")

    w = rho * f1.w + (1.0 - rho) * f2.w
    out1 = StepOutput(e_prior=e1, e_post=d - float(f1.w @ x), y=y1, k=k1, g=g1)
    out2 = StepOutput(e_prior=e2, e_post=d - float(f2.w @ x), y=y2, k=k2, g=g2)
    return state, CombinerOutput(y=y, e_prior=e, rho=rho, out1=out1,
                                 out2=out2, w=w)
