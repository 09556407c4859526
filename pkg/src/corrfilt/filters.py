"""Single-filter adaptive algorithms built around a correntropy error weighting.

The recursive family (RMCC, PRMCC) maintains an inverse input-correlation
matrix through the matrix-inversion-lemma recursion; the gradient family
(LMS, MCC, IPLMS, IPMCC) is stateless apart from the weight vector.  The
least-squares variants (RLS, PRLS) are not separate code paths: they are the
``sigma = inf`` limit, where the kernel weight is identically one.

All step functions mutate the passed state in place and return it together
with a :class:`StepOutput`, so trajectories can be compared step by step.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np


class NumericalFault(ArithmeticError):
    """A filter recursion produced non-finite state."""


@dataclasses.dataclass
class FilterState:
    """State of one adaptive filter instance.

    ``P`` is None for the gradient family.  ``sigma = math.inf`` disables the
    correntropy weighting (least-squares behaviour).  ``lam = 1`` is the
    growing-window limit (no forgetting).
    """

    w: np.ndarray
    P: np.ndarray | None
    lam: float
    sigma: float
    delta: float
    theta: float
    alpha: float
    epsilon: float
    n: int = 0


def make_state(n_taps: int, *, lam: float = 0.995, sigma: float = math.inf,
               delta: float = 1.0, theta: float = 1.0, alpha: float = 0.0,
               epsilon: float = 1e-4, with_P: bool = True) -> FilterState:
    """Zero-initialized filter state: w = 0 and P = I / delta."""
    if n_taps < 1:
        raise ValueError("n_taps must be >= 1")
    if not 0.0 < lam <= 1.0:
        raise ValueError("lam must lie in (0, 1]")
    if not sigma > 0.0:
        raise ValueError("sigma must be positive (inf allowed)")
    if not delta > 0.0:
        raise ValueError("delta must be positive")
    if not theta > 0.0:
        raise ValueError("theta must be positive")
    if not -1.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [-1, 1)")
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    P = np.eye(n_taps) / delta if with_P else None
    return FilterState(w=np.zeros(n_taps), P=P, lam=lam, sigma=sigma,
                       delta=delta, theta=theta, alpha=alpha, epsilon=epsilon)


@dataclasses.dataclass
class StepOutput:
    """Per-step diagnostics: errors, prediction, gain and proportionate gains.

    ``e_prior`` uses the pre-update weights, ``e_post`` the post-update ones.
    ``k`` and ``g`` are None for algorithms that do not form them.
    """

    e_prior: float
    e_post: float
    y: float
    k: np.ndarray | None
    g: np.ndarray | None


def mcc_weight(e: float, sigma: float) -> float:
    """Gaussian kernel weight exp(-e^2 / 2 sigma^2); exactly 1 at sigma = inf.

    Underflow to 0 for huge errors is the outlier-rejection mechanism, not a
    fault.
    """
    if math.isinf(sigma):
        return 1.0
    return math.exp(-(e * e) / (2.0 * sigma * sigma))


def error_nonlinearity(e: float, sigma: float) -> float:
    """Correntropy-weighted error f(e) = exp(-e^2 / 2 sigma^2) * e.

    Odd in e, with |f| maximized at |e| = sigma where it equals
    sigma * exp(-1/2); the identity when sigma = inf.
    """
    return mcc_weight(e, sigma) * e


def proportionate_gains(w: np.ndarray, theta: float, alpha: float,
                        epsilon: float) -> np.ndarray:
    """Per-tap update gains mixing a uniform floor with a magnitude share.

    g_k = theta (1 - alpha) / 2N + theta (1 + alpha) |w_k| / (2 ||w||_1 + eps).
    epsilon keeps the gains defined at the all-zero initialization.
    """
    n = len(w)
    aw = np.abs(w)
    floor = theta * (1.0 - alpha) / (2.0 * n)
    return floor + theta * (1.0 + alpha) * aw / (2.0 * aw.sum() + epsilon)


def gain_vector(state: FilterState, x: np.ndarray, e_prior: float,
                Px: np.ndarray | None = None) -> np.ndarray:
    """Gain k = P x / (lam + kernel_weight * x^T P x).

    ``Px`` may be supplied to avoid recomputing P @ x.
    """
    if Px is None:
        Px = state.P @ x
    denom = state.lam + mcc_weight(e_prior, state.sigma) * float(x @ Px)
    if not math.isfinite(denom):
        raise NumericalFault("gain denominator is not finite")
    return Px / denom


def update_P(state: FilterState, x: np.ndarray, k: np.ndarray, e_prior: float,
             Px: np.ndarray | None = None) -> np.ndarray:
    """Inverse-correlation update (P - kw * k x^T P) / lam, symmetrized.

    ``k`` must come from :func:`gain_vector` for the same (state, x, e_prior).
    Since P is kept symmetric, x^T P equals (P x)^T and ``Px`` can stand in
    for it.
    """
    if Px is None:
        Px = state.P @ x
    P = state.P - mcc_weight(e_prior, state.sigma) * np.outer(k, Px)
    # rank-one floating-point asymmetry is removed before it can accumulate
    P += P.T
    P *= 0.5 / state.lam
    if not np.isfinite(P).all():
        raise NumericalFault("inverse-correlation matrix is not finite")
    return P


def _finish(state: FilterState, x: np.ndarray, d: float, e: float, y: float,
            k: np.ndarray | None, g: np.ndarray | None):
    state.n += 1
    if not np.isfinite(state.w).all():
        raise NumericalFault("weights are not finite after update")
    e_post = d - float(state.w @ x)
    return state, StepOutput(e_prior=e, e_post=e_post, y=y, k=k, g=g)


def _recursive_step(state: FilterState, x: np.ndarray, d: float,
                    proportionate: bool):
    w = state.w
    y = float(w @ x)
    e = d - y
    Px = state.P @ x
    k = gain_vector(state, x, e, Px=Px)
    if proportionate:
        g = proportionate_gains(w, state.theta, state.alpha, state.epsilon)
    else:
        g = np.ones_like(w)
    state.w = w + g * (k * error_nonlinearity(e, state.sigma))
    state.P = update_P(state, x, k, e, Px=Px)
    return _finish(state, x, d, e, y, k, g)


def prmcc_step(state: FilterState, x: np.ndarray, d: float):
    """One proportionate recursive step: error, gain, per-tap gains, update.

    The proportionate gains are formed from the pre-update weights; the P
    recursion uses the a-priori error, consistently with the gain vector.
    With sigma = inf this is exactly a PRLS step.
    """
    return _recursive_step(state, x, d, proportionate=True)


def rmcc_step(state: FilterState, x: np.ndarray, d: float):
    """One recursive step with uniform (identity) tap gains.

    With sigma = inf this is exactly an RLS step.
    """
    return _recursive_step(state, x, d, proportionate=False)


def lms_step(state: FilterState, x: np.ndarray, d: float, mu: float):
    """Plain stochastic-gradient step w += mu * e * x."""
    y = float(state.w @ x)
    e = d - y
    state.w = state.w + (mu * e) * x
    return _finish(state, x, d, e, y, None, None)


def mcc_step(state: FilterState, x: np.ndarray, d: float, mu: float):
    """Gradient step with the correntropy weighting, w += mu * f(e) * x."""
    y = float(state.w @ x)
    e = d - y
    state.w = state.w + (mu * error_nonlinearity(e, state.sigma)) * x
    return _finish(state, x, d, e, y, None, None)


def iplms_step(state: FilterState, x: np.ndarray, d: float, mu: float):
    """Proportionate gradient step with unit-trace gains, w += mu * G x e."""
    y = float(state.w @ x)
    e = d - y
    g = proportionate_gains(state.w, 1.0, state.alpha, state.epsilon)
    state.w = state.w + (mu * e) * (g * x)
    return _finish(state, x, d, e, y, None, g)


def ipmcc_step(state: FilterState, x: np.ndarray, d: float, mu: float):
    """Proportionate gradient step with the correntropy weighting."""
    y = float(state.w @ x)
    e = d - y
    g = proportionate_gains(state.w, 1.0, state.alpha, state.epsilon)
    state.w = state.w + (mu * error_nonlinearity(e, state.sigma)) * (g * x)
    return _finish(state, x, d, e, y, None, g)
