"""Noise and input-signal generators with exact central-moment calculators.

Every distribution here is zero mean.  The closed-form second, fourth and
sixth central moments are the bridge between Monte-Carlo simulation and the
steady-state predictors in :mod:`corrfilt.theory`.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Union

import numpy as np

ROLE_INPUT = 0
ROLE_NOISE = 1
ROLE_SYSTEM = 2


def stream(seed: int, trial: int, role: int) -> np.random.Generator:
    """Independent, reproducible generator for one (seed, trial, role) triple.

    Trials own disjoint streams per signal role, so trials can run in any
    order (or in parallel) and still draw identical sequences.
    """
    return np.random.default_rng([seed, trial, role])


@dataclasses.dataclass(frozen=True)
class MomentSet:
    """Exact central moments (m2, m4, m6) of a zero-mean distribution."""

    m2: float
    m4: float
    m6: float

    def __post_init__(self):
        if not self.m2 > 0.0:
            raise ValueError("m2 must be positive (degenerate distribution)")
        if self.m4 < self.m2 * self.m2 * (1.0 - 1e-12):
            raise ValueError("m4 must satisfy m4 >= m2^2")
        if self.m6 < 0.0:
            raise ValueError("m6 must be non-negative")


def _gaussian_moments(variance: float) -> tuple[float, float, float]:
    return variance, 3.0 * variance**2, 15.0 * variance**3


@dataclasses.dataclass(frozen=True)
class Gaussian:
    """Zero-mean Gaussian noise.  variance=0 is allowed for noiseless runs."""

    variance: float

    def __post_init__(self):
        if self.variance < 0.0:
            raise ValueError("variance must be >= 0")

    def moments(self) -> MomentSet:
        return MomentSet(*_gaussian_moments(self.variance))

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        return rng.standard_normal(size) * math.sqrt(self.variance)


@dataclasses.dataclass(frozen=True)
class MixedGaussian:
    """Two-component Gaussian mixture, the usual impulsive-noise model.

    Component 1 (probability ``p1``, variance ``var1``) is the nominal noise,
    component 2 the occasional large outliers.
    """

    p1: float
    var1: float
    p2: float
    var2: float

    def __post_init__(self):
        if not (0.0 <= self.p1 <= 1.0 and 0.0 <= self.p2 <= 1.0):
            raise ValueError("mixture probabilities must lie in [0, 1]")
        if abs(self.p1 + self.p2 - 1.0) > 1e-12:
            raise ValueError("mixture probabilities must sum to 1")
        if self.var1 < 0.0 or self.var2 < 0.0:
            raise ValueError("component variances must be >= 0")

    def moments(self) -> MomentSet:
        m1 = _gaussian_moments(self.var1)
        m2 = _gaussian_moments(self.var2)
        return MomentSet(*(self.p1 * a + self.p2 * b for a, b in zip(m1, m2)))

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        # Bernoulli(p2) picks the outlier component, then one normal draw
        # is scaled by the selected component's standard deviation.
        outlier = rng.random(size) < self.p2
        scale = np.where(outlier, math.sqrt(self.var2), math.sqrt(self.var1))
        return rng.standard_normal(size) * scale


@dataclasses.dataclass(frozen=True)
class Uniform:
    """Uniform noise on [-half_width, +half_width]."""

    half_width: float

    def __post_init__(self):
        if self.half_width < 0.0:
            raise ValueError("half_width must be >= 0")

    def moments(self) -> MomentSet:
        a = self.half_width
        return MomentSet(a**2 / 3.0, a**4 / 5.0, a**6 / 7.0)

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        return rng.uniform(-self.half_width, self.half_width, size)


NoiseModel = Union[Gaussian, MixedGaussian, Uniform]


def white_gaussian_input(sigma_x2: float, rng: np.random.Generator,
                         size: int | None = None) -> np.ndarray:
    """i.i.d. zero-mean Gaussian input samples with variance ``sigma_x2``."""
    if sigma_x2 < 0.0:
        raise ValueError("sigma_x2 must be >= 0")
    return rng.standard_normal(size) * math.sqrt(sigma_x2)
