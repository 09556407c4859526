"""Closed-form steady-state and tracking predictors for the recursive filters.

All predictors are pure functions of :class:`TheoryInputs`.  They rest on a
small-noise expansion of the kernel weighting, summarized by six moment
combinations (:func:`taylor_terms`).  When the noise power is not small
relative to the kernel bandwidth the expansion degrades; predictors then emit
a :class:`TaylorValidityWarning` but still evaluate the formulas as written.
"""

from __future__ import annotations

import dataclasses
import math
import warnings

import numpy as np

from .noise import MomentSet


class InvalidRegimeError(ValueError):
    """A predictor was evaluated where its formula is meaningless
    (non-positive denominator, non-contracting mean recursion, ...)."""


class TaylorValidityWarning(UserWarning):
    """The small-noise expansion behind a predictor is unreliable here."""


@dataclasses.dataclass(frozen=True)
class TheoryInputs:
    """Symbol set feeding every predictor.

    ``theta``, ``alpha`` and ``w_true`` define the steady-state proportionate
    gain profile; ``sigma_q2 = 0`` means a stationary system.  ``c`` is the
    target mean-error norm for the iteration-count bound and ``h0_norm`` the
    initial mean-error norm (defaults to ||w_true|| for a zero-initialized
    filter).
    """

    n_taps: int
    w_true: np.ndarray
    lam: float
    theta: float
    alpha: float
    sigma: float
    sigma_x2: float
    moments: MomentSet
    sigma_q2: float = 0.0
    c: float | None = None
    h0_norm: float | None = None

    def __post_init__(self):
        w = np.asarray(self.w_true, dtype=float)
        object.__setattr__(self, "w_true", w)
        if w.shape != (self.n_taps,):
            raise ValueError("w_true must have length n_taps")
        if not 0.0 < self.lam <= 1.0:
            raise ValueError("lam must lie in (0, 1]")
        if not self.theta > 0.0:
            raise ValueError("theta must be positive")
        if not -1.0 <= self.alpha < 1.0:
            raise ValueError("alpha must lie in [-1, 1)")
        if not self.sigma > 0.0:
            raise ValueError("sigma must be positive (inf allowed)")
        if not self.sigma_x2 > 0.0:
            raise ValueError("sigma_x2 must be positive")
        if self.sigma_q2 < 0.0:
            raise ValueError("sigma_q2 must be >= 0")
        if self.alpha > -1.0 and not np.any(np.abs(w) > 0.0):
            raise ValueError("w_true must not be all-zero when alpha > -1")

    @property
    def h0(self) -> float:
        if self.h0_norm is not None:
            return self.h0_norm
        return float(np.linalg.norm(self.w_true))


def sparsity_profile(w_true: np.ndarray, alpha: float) -> np.ndarray:
    """Normalized steady-state gain profile t (sums to one).

    t_i = (1 - alpha) / 2N + (1 + alpha) |w_i| / (2 ||w||_1).  The per-tap
    steady-state gains are theta * t_i.
    """
    w = np.asarray(w_true, dtype=float)
    n = len(w)
    aw = np.abs(w)
    if alpha == -1.0:
        return np.full(n, 1.0 / n)
    l1 = aw.sum()
    if not l1 > 0.0:
        raise ValueError("w_true is all-zero: profile undefined for alpha > -1")
    return (1.0 - alpha) / (2.0 * n) + (1.0 + alpha) * aw / (2.0 * l1)


@dataclasses.dataclass(frozen=True)
class TaylorTerms:
    """Moment combinations of the small-noise expansion.

    kernel_mean        mean kernel weight at the noise level
    slope_mean         mean slope of the weighted error
    error_power        effective noise power through the weighting
    slope_power        mean squared slope (same-filter product)
    cross_error_power  effective noise power for two distinct filters
    cross_slope_power  mean slope product for two distinct filters
    """

    kernel_mean: float
    slope_mean: float
    error_power: float
    slope_power: float
    cross_error_power: float
    cross_slope_power: float
    valid: bool
    notes: tuple[str, ...] = ()


def taylor_terms(moments: MomentSet, sigma: float) -> TaylorTerms:
    """Evaluate the six expansion terms; sigma = inf gives the exact
    least-squares values (1, 1, m2, 1, m2, 1)."""
    m2, m4, m6 = moments.m2, moments.m4, moments.m6
    inv2 = 0.0 if math.isinf(sigma) else 1.0 / (sigma * sigma)
    inv4 = inv2 * inv2
    t1 = 1.0 - m2 * inv2 / 2.0 + m4 * inv4 / 8.0
    t2 = 1.0 - 3.0 * m2 * inv2 / 2.0 + 5.0 * m4 * inv4 / 8.0
    t3 = m2 - m4 * inv2 + m6 * inv4 / 2.0
    t4 = 1.0 - 6.0 * m2 * inv2 + 15.0 * m4 * inv4 / 2.0
    t5 = m2 - m4 * inv2 + m6 * inv4 / 4.0
    t6 = 1.0 - 3.0 * m2 * inv2 + 9.0 * m4 * inv4 / 4.0
    notes = []
    if m2 * inv2 / 2.0 > 0.5:
        notes.append("noise power is large relative to the kernel bandwidth")
    if min(t1, t2, t4) <= 0.0:
        notes.append("an expansion term is non-positive")
    for note in notes:
        warnings.warn(note, TaylorValidityWarning, stacklevel=2)
    return TaylorTerms(t1, t2, t3, t4, t5, t6, valid=not notes,
                       notes=tuple(notes))


def _gains(inputs: TheoryInputs) -> np.ndarray:
    return inputs.theta * sparsity_profile(inputs.w_true, inputs.alpha)


def mean_error_trajectory(inputs: TheoryInputs, n: int) -> np.ndarray:
    """Mean weight-error vector after n steps, component-wise geometric decay
    from the initial error w_true (zero-initialized filter)."""
    tt = taylor_terms(inputs.moments, inputs.sigma)
    g = _gains(inputs)
    factor = 1.0 - (1.0 - inputs.lam) * (tt.slope_mean / tt.kernel_mean) * g
    return factor**n * inputs.w_true


def stability_bound_theta(inputs: TheoryInputs) -> float:
    """Largest trace controller for which the mean error recursion contracts.

    The binding tap is the one with the largest profile value, i.e.
    (1 - alpha) / 2N + (1 + alpha) ||w||_inf / (2 ||w||_1).
    """
    tt = taylor_terms(inputs.moments, inputs.sigma)
    if tt.slope_mean <= 0.0:
        raise InvalidRegimeError("mean slope term is non-positive: "
                                 "no meaningful stability bound")
    t_max = float(np.max(sparsity_profile(inputs.w_true, inputs.alpha)))
    if inputs.lam == 1.0:
        return math.inf
    return 2.0 * tt.kernel_mean / ((1.0 - inputs.lam) * tt.slope_mean * t_max)


def iterations_to_steady_state(inputs: TheoryInputs) -> float:
    """Iterations for the mean error norm to fall below the target c.

    Uses the worst-tap contraction factor of the diagonal mean recursion.
    """
    if inputs.c is None:
        raise ValueError("c (target error) is required")
    if not 0.0 < inputs.c <= inputs.h0:
        raise ValueError("c must lie in (0, h0_norm]")
    tt = taylor_terms(inputs.moments, inputs.sigma)
    g = _gains(inputs)
    contraction = float(np.max(np.abs(
        1.0 - (1.0 - inputs.lam) * (tt.slope_mean / tt.kernel_mean) * g)))
    if inputs.c == inputs.h0:
        return 0.0
    if contraction >= 1.0:
        raise InvalidRegimeError("mean recursion does not contract "
                                 f"(factor {contraction:.6g} >= 1)")
    return (math.log(inputs.c) - math.log(inputs.h0)) / math.log(contraction)


@dataclasses.dataclass(frozen=True)
class MSDPrediction:
    per_tap: np.ndarray
    total: float

    @property
    def total_db(self) -> float:
        return 10.0 * math.log10(self.total)


def _stationary_per_tap(g: np.ndarray, lam: float, sigma_x2: float,
                        tt: TaylorTerms, sigma_q2: float) -> np.ndarray:
    one_minus = 1.0 - lam
    num = one_minus * g * tt.error_power / (sigma_x2 * tt.kernel_mean)
    if sigma_q2 > 0.0:
        num = num + sigma_q2 * tt.kernel_mean / (one_minus * g)
    den = 2.0 * tt.slope_mean - one_minus * g * tt.slope_power / tt.kernel_mean
    if np.any(den <= 0.0):
        raise InvalidRegimeError("steady-state denominator is non-positive "
                                 "for at least one tap")
    return num / den


def msd_stationary(inputs: TheoryInputs) -> MSDPrediction:
    """Steady-state mean-square deviation for a stationary system."""
    tt = taylor_terms(inputs.moments, inputs.sigma)
    per_tap = _stationary_per_tap(_gains(inputs), inputs.lam, inputs.sigma_x2,
                                  tt, 0.0)
    return MSDPrediction(per_tap, float(per_tap.sum()))


@dataclasses.dataclass(frozen=True)
class TrackingMSD:
    per_tap: np.ndarray
    total: float
    simplified: float

    @property
    def total_db(self) -> float:
        return 10.0 * math.log10(self.total)


def msd_tracking(inputs: TheoryInputs) -> TrackingMSD:
    """Steady-state MSD under a random-walk system.

    ``total`` keeps the per-tap denominators; ``simplified`` drops the
    per-tap gain correction in the denominator, which makes the trade-off in
    theta (and lam) explicit and is the form behind the optimal parameters.
    """
    if not inputs.sigma_q2 > 0.0:
        raise ValueError("sigma_q2 must be positive for tracking analysis")
    tt = taylor_terms(inputs.moments, inputs.sigma)
    t = sparsity_profile(inputs.w_true, inputs.alpha)
    g = inputs.theta * t
    per_tap = _stationary_per_tap(g, inputs.lam, inputs.sigma_x2, tt,
                                  inputs.sigma_q2)
    one_minus = 1.0 - inputs.lam
    inv_sum = float(np.sum(1.0 / t))
    simplified = ((one_minus * inputs.theta * tt.error_power
                   / (inputs.sigma_x2 * tt.kernel_mean)
                   + inputs.sigma_q2 * tt.kernel_mean * inv_sum
                   / (one_minus * inputs.theta))
                  / (2.0 * tt.slope_mean))
    return TrackingMSD(per_tap, float(per_tap.sum()), simplified)


@dataclasses.dataclass(frozen=True)
class OptimalParameters:
    theta_opt: float
    lambda_opt: float
    lambda_opt_in_range: bool


def optimal_parameters(inputs: TheoryInputs) -> OptimalParameters:
    """Minimizers of the simplified tracking MSD.

    theta_opt treats lam as fixed; lambda_opt treats theta as fixed.  Both
    balance the gradient-noise term (growing in theta, shrinking in lam)
    against the lag term.  lambda_opt is reported raw with a flag when it
    falls outside (0, 1).
    """
    if not inputs.sigma_q2 > 0.0:
        raise ValueError("sigma_q2 must be positive for tracking analysis")
    tt = taylor_terms(inputs.moments, inputs.sigma)
    if tt.error_power <= 0.0:
        raise InvalidRegimeError("effective noise power is non-positive")
    t = sparsity_profile(inputs.w_true, inputs.alpha)
    inv_sum = float(np.sum(1.0 / t))
    scale = (math.sqrt(inputs.sigma_x2) * math.sqrt(inputs.sigma_q2)
             * tt.kernel_mean * math.sqrt(inv_sum)
             / math.sqrt(tt.error_power))
    theta_opt = scale / (1.0 - inputs.lam)
    lambda_opt = 1.0 - scale / inputs.theta
    return OptimalParameters(theta_opt, lambda_opt,
                             lambda_opt_in_range=0.0 < lambda_opt < 1.0)


@dataclasses.dataclass(frozen=True)
class CrossMSD:
    per_tap: np.ndarray
    total: float
    theta_12: float


def msd_cross(inputs: TheoryInputs, theta1: float, theta2: float) -> CrossMSD:
    """Steady-state cross mean-square deviation of two component filters.

    The cross term behaves like a single filter with the harmonic-style
    effective controller theta_12 = theta1 theta2 / (theta1 + theta2).  For a
    random-walk system the lag contribution enters per tap without the
    controller.
    """
    tt = taylor_terms(inputs.moments, inputs.sigma)
    t = sparsity_profile(inputs.w_true, inputs.alpha)
    theta_12 = theta1 * theta2 / (theta1 + theta2)
    one_minus = 1.0 - inputs.lam
    g12 = theta_12 * t
    num = one_minus * g12 * tt.cross_error_power / (inputs.sigma_x2 * tt.kernel_mean)
    if inputs.sigma_q2 > 0.0:
        num = num + inputs.sigma_q2 * tt.kernel_mean / (one_minus * t)
    den = tt.slope_mean - one_minus * g12 * tt.cross_slope_power / tt.kernel_mean
    if np.any(den <= 0.0):
        raise InvalidRegimeError("cross-term denominator is non-positive "
                                 "for at least one tap")
    per_tap = num / den
    return CrossMSD(per_tap, float(per_tap.sum()), theta_12)


@dataclasses.dataclass(frozen=True)
class CombinedMSD:
    """Steady-state prediction for the convex combination of two filters.

    case 1: component 1 dominates (mixing saturates high),
    case 2: component 2 dominates (mixing saturates low),
    case 3: interior mixing, strictly better than both components.
    """

    case: int
    rho_inf: float
    msd: float
    msd1: float
    msd2: float
    msd12: float

    @property
    def msd_db(self) -> float:
        return 10.0 * math.log10(self.msd)


def combined_msd(inputs: TheoryInputs, theta1: float, theta2: float,
                 b_plus: float = 4.0) -> CombinedMSD:
    """Classify the combination regime and predict its steady-state MSD.

    The interior mixing value is clamped to the reachable interval
    [1 - rho_plus, rho_plus] implied by the clamp on the mixing state.
    """

    def component(theta_j: float) -> float:
        sub = dataclasses.replace(inputs, theta=theta_j)
        if inputs.sigma_q2 > 0.0:
            return msd_tracking(sub).total
        return msd_stationary(sub).total

    msd1 = component(theta1)
    msd2 = component(theta2)
    msd12 = msd_cross(inputs, theta1, theta2).total
    d1 = msd1 - msd12
    d2 = msd2 - msd12
    rho_plus = 1.0 / (1.0 + math.exp(-b_plus))
    if d1 <= 0.0 and d2 <= 0.0:
        # only reachable through equality edges: all three coincide
        return CombinedMSD(3, 0.5, msd12, msd1, msd2, msd12)
    if d1 <= 0.0:
        return CombinedMSD(1, rho_plus, msd1, msd1, msd2, msd12)
    if d2 <= 0.0:
        return CombinedMSD(2, 1.0 - rho_plus, msd2, msd1, msd2, msd12)
    rho_inf = d2 / (d1 + d2)
    rho_inf = min(max(rho_inf, 1.0 - rho_plus), rho_plus)
    msd = msd12 + d1 * d2 / (d1 + d2)
    return CombinedMSD(3, rho_inf, msd, msd1, msd2, msd12)
