"""Monte-Carlo experiment engine.

A declarative :class:`ExperimentConfig` (system model, input power, noise
model, algorithm list, run lengths, seed) maps to ensemble-averaged
mean-square-deviation learning curves.  Trials are deterministic functions of
(seed, trial index) and embarrassingly parallel; the reduction is sequential
in ascending trial order so any worker count reproduces the serial result
bit for bit.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Union

import numpy as np

from . import combiner as _combiner
from . import filters as _filters
from . import noise as _noise
from . import theory as _theory

DB_FLOOR = 1e-30


# ---------------------------------------------------------------------------
# true-system models

@dataclasses.dataclass(frozen=True)
class StaticSystem:
    """Fixed impulse response."""

    weights: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(v) for v in self.weights))

    @property
    def n_taps(self) -> int:
        return len(self.weights)


@dataclasses.dataclass(frozen=True)
class RandomWalkSystem:
    """Impulse response receiving i.i.d. Gaussian increments each iteration
    (variance ``increment_variance`` per tap)."""

    weights: tuple[float, ...]
    increment_variance: float

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(v) for v in self.weights))
        if self.increment_variance < 0.0:
            raise ValueError("increment_variance must be >= 0")

    @property
    def n_taps(self) -> int:
        return len(self.weights)


@dataclasses.dataclass(frozen=True)
class Stage:
    """One stage of a piecewise-constant system.

    Either explicit ``weights``, or ``active_taps`` non-zero coefficients
    drawn per trial (standard Gaussian values at uniformly random positions).
    """

    start: int
    weights: tuple[float, ...] | None = None
    active_taps: int | None = None

    def __post_init__(self):
        if (self.weights is None) == (self.active_taps is None):
            raise ValueError("stage needs exactly one of weights/active_taps")
        if self.weights is not None:
            object.__setattr__(self, "weights",
                               tuple(float(v) for v in self.weights))


@dataclasses.dataclass(frozen=True)
class StagedSystem:
    """Abruptly changing system: piecewise constant over stages."""

    order: int
    stages: tuple[Stage, ...]

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if not self.stages:
            raise ValueError("stages must not be empty")
        if self.stages[0].start != 0:
            raise ValueError("first stage must start at iteration 0")
        starts = [s.start for s in self.stages]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("stage starts must be strictly increasing")
        for s in self.stages:
            if s.weights is not None and len(s.weights) != self.order:
                raise ValueError("stage weights must match the system order")
            if s.active_taps is not None and not 0 < s.active_taps <= self.order:
                raise ValueError("active_taps must lie in [1, order]")

    @property
    def n_taps(self) -> int:
        return self.order


SystemModel = Union[StaticSystem, RandomWalkSystem, StagedSystem]


# ---------------------------------------------------------------------------
# experiment configuration

#: per-algorithm hyperparameter schema: required names and optional defaults
ALGORITHM_PARAMS = {
    "lms": (("mu",), {}),
    "mcc": (("mu", "sigma"), {}),
    "rls": (("lambda",), {"delta": 1.0}),
    "rmcc": (("lambda", "sigma"), {"delta": 1.0}),
    "prls": (("lambda", "theta"),
             {"delta": 1.0, "alpha": 0.0, "epsilon": 1e-4}),
    "prmcc": (("lambda", "sigma", "theta"),
              {"delta": 1.0, "alpha": 0.0, "epsilon": 1e-4}),
    "iplms": (("mu",), {"alpha": 0.0, "epsilon": 1e-4}),
    "ipmcc": (("mu", "sigma"), {"alpha": 0.0, "epsilon": 1e-4}),
    "cprmcc": (("lambda", "sigma", "theta1", "theta2", "mu_b", "sigma_b",
                "b_plus"),
               {"delta": 1.0, "alpha": 0.0, "epsilon": 1e-4, "beta": 0.999,
                "gamma": 2.0, "transfer": True}),
}


def resolve_params(name: str, params: dict) -> dict:
    """Validate and complete an algorithm's hyperparameters."""
    if name not in ALGORITHM_PARAMS:
        raise ValueError(f"unknown algorithm '{name}'")
    required, optional = ALGORITHM_PARAMS[name]
    resolved = {}
    for key in required:
        if key not in params:
            raise ValueError(f"{name}: missing parameter '{key}'")
    for key, value in params.items():
        if key not in required and key not in optional:
            raise ValueError(f"{name}: unexpected parameter '{key}'")
        resolved[key] = value
    for key, default in optional.items():
        resolved.setdefault(key, default)
    if name == "cprmcc" and resolved["theta1"] < resolved["theta2"]:
        raise ValueError("cprmcc: theta1 must be >= theta2 "
                         "(component 1 is the fast filter)")
    return resolved


@dataclasses.dataclass(frozen=True)
class AlgorithmSpec:
    """An algorithm name, its hyperparameters and a curve label."""

    name: str
    params: dict
    label: str | None = None

    @property
    def effective_label(self) -> str:
        return self.label if self.label is not None else self.name


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    system: SystemModel
    input_variance: float
    noise: _noise.NoiseModel
    algorithms: tuple[AlgorithmSpec, ...]
    iterations: int
    trials: int
    seed: int
    steady_window_fraction: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if self.input_variance < 0.0:
            raise ValueError("input_variance must be >= 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0.0 < self.steady_window_fraction <= 0.5:
            raise ValueError("steady_window_fraction must lie in (0, 0.5]")
        if not self.algorithms:
            raise ValueError("algorithms must not be empty")
        labels = [a.effective_label for a in self.algorithms]
        if len(set(labels)) != len(labels):
            raise ValueError("algorithm labels must be unique")
        for spec in self.algorithms:
            resolve_params(spec.name, spec.params)

    @property
    def steady_window(self) -> int:
        return max(1, int(round(self.steady_window_fraction * self.iterations)))


# ---------------------------------------------------------------------------
# algorithm steppers

class _FilterStepper:
    is_combiner = False

    def __init__(self, state, step_fn):
        self._state = state
        self._step = step_fn

    def step(self, x, d):
        self._step(self._state, x, d)
        return self._state.w, None


class _CombinerStepper:
    is_combiner = True

    def __init__(self, state):
        self._state = state

    def step(self, x, d):
        _, out = _combiner.cprmcc_step(self._state, x, d)
        return out.w, out.rho


def build_stepper(name: str, params: dict, n_taps: int):
    """Instantiate a zero-initialized stepper for one algorithm."""
    p = resolve_params(name, params)
    if name == "cprmcc":
        state = _combiner.make_combiner(
            n_taps, theta1=p["theta1"], theta2=p["theta2"], lam=p["lambda"],
            sigma=p["sigma"], delta=p["delta"], alpha=p["alpha"],
            epsilon=p["epsilon"], mu_b=p["mu_b"], sigma_b=p["sigma_b"],
            b_plus=p["b_plus"], beta=p["beta"], gamma=p["gamma"],
            transfer_enabled=bool(p["transfer"]))
        return _CombinerStepper(state)
    if name in ("rls", "rmcc", "prls", "prmcc"):
        sigma = math.inf if name in ("rls", "prls") else p["sigma"]
        theta = p.get("theta", 1.0)
        alpha = p.get("alpha", 0.0)
        epsilon = p.get("epsilon", 1e-4)
        state = _filters.make_state(n_taps, lam=p["lambda"], sigma=sigma,
                                    delta=p["delta"], theta=theta,
                                    alpha=alpha, epsilon=epsilon)
        if name in ("prls", "prmcc"):
            return _FilterStepper(state, _filters.prmcc_step)
        return _FilterStepper(state, _filters.rmcc_step)
    # gradient family
    mu = p["mu"]
    sigma = p.get("sigma", math.inf)
    state = _filters.make_state(n_taps, sigma=sigma,
                                alpha=p.get("alpha", 0.0),
                                epsilon=p.get("epsilon", 1e-4), with_P=False)
    fn = {"lms": _filters.lms_step, "mcc": _filters.mcc_step,
          "iplms": _filters.iplms_step, "ipmcc": _filters.ipmcc_step}[name]
    return _FilterStepper(state, lambda s, x, d: fn(s, x, d, mu))


# ---------------------------------------------------------------------------
# trial and ensemble runners

def msd_instant(w_true: np.ndarray, w_est: np.ndarray) -> float:
    """Squared Euclidean distance between true and estimated weights."""
    if len(w_true) != len(w_est):
        raise ValueError("weight vectors differ in length")
    diff = w_true - w_est
    return float(diff @ diff)


@dataclasses.dataclass(frozen=True)
class TrialTrace:
    msd: np.ndarray
    rho: np.ndarray | None = None


def run_trial(config: ExperimentConfig, algorithm: AlgorithmSpec,
              trial_index: int) -> TrialTrace:
    """Run one algorithm over one trial's signals; per-iteration MSD trace.

    The random-walk system advances before the desired output is formed at
    each iteration; staged systems switch at their stage boundaries.
    Regressors are zero-prepadded for the first N - 1 iterations.
    """
    system = config.system
    n_taps = system.n_taps
    iters = config.iterations
    rng_x = _noise.stream(config.seed, trial_index, _noise.ROLE_INPUT)
    rng_v = _noise.stream(config.seed, trial_index, _noise.ROLE_NOISE)
    rng_s = _noise.stream(config.seed, trial_index, _noise.ROLE_SYSTEM)
    x = _noise.white_gaussian_input(config.input_variance, rng_x, iters)
    v = config.noise.sample(rng_v, iters)
    x_pad = np.concatenate([np.zeros(n_taps - 1), x])

    walk_scale = 0.0
    stage_weights = None
    if isinstance(system, RandomWalkSystem):
        w_true = np.array(system.weights, dtype=float)
        walk_scale = math.sqrt(system.increment_variance)
    elif isinstance(system, StagedSystem):
        stage_weights = []
        for stage in system.stages:
            if stage.weights is not None:
                stage_weights.append(np.array(stage.weights, dtype=float))
            else:
                w = np.zeros(system.order)
                pos = rng_s.choice(system.order, size=stage.active_taps,
                                   replace=False)
                w[pos] = rng_s.standard_normal(stage.active_taps)
                stage_weights.append(w)
        w_true = stage_weights[0]
        stage_starts = [s.start for s in system.stages]
    else:
        w_true = np.array(system.weights, dtype=float)

    stepper = build_stepper(algorithm.name, algorithm.params, n_taps)
    msd = np.empty(iters)
    rho = np.empty(iters) if stepper.is_combiner else None
    stage_idx = 0
    try:
        for n in range(iters):
            if walk_scale > 0.0:
                w_true = w_true + walk_scale * rng_s.standard_normal(n_taps)
            elif stage_weights is not None:
                while (stage_idx + 1 < len(stage_weights)
                       and n >= stage_starts[stage_idx + 1]):
                    stage_idx += 1
                    w_true = stage_weights[stage_idx]
            reg = x_pad[n:n + n_taps][::-1]
            d = float(w_true @ reg) + v[n]
            w_est, rho_n = stepper.step(reg, d)
            diff = w_true - w_est
            msd[n] = diff @ diff
            if rho is not None:
                rho[n] = rho_n
    except _filters.NumericalFault as exc:
        raise _filters.NumericalFault(
            f"{algorithm.effective_label}: trial {trial_index}, "
            f"iteration {n}: {exc}") from exc
    return TrialTrace(msd=msd, rho=rho)


@dataclasses.dataclass(frozen=True)
class LearningCurve:
    """Ensemble-averaged MSD per iteration, with steady-state summaries."""

    iterations: int
    labels: tuple[str, ...]
    msd: dict
    rho: dict
    steady_state: dict
    steady_window: int

    def msd_db(self, label: str) -> np.ndarray:
        return 10.0 * np.log10(np.maximum(self.msd[label], DB_FLOOR))

    def steady_state_db(self, label: str) -> float:
        return 10.0 * math.log10(max(self.steady_state[label], DB_FLOOR))


def _trial_worker(task):
    config, spec, trial = task
    return run_trial(config, spec, trial)


def run_ensemble(config: ExperimentConfig, workers: int = 1) -> LearningCurve:
    """Average per-iteration MSD over all trials for every algorithm.

    A pure function of the config (seed included): parallel and serial
    execution accumulate trials in the same fixed order.
    """
    tasks = [(config, spec, t)
             for spec in config.algorithms for t in range(config.trials)]
    if workers > 1:
        executor = ProcessPoolExecutor(max_workers=workers)
        chunk = max(1, len(tasks) // (workers * 8))
        results = executor.map(_trial_worker, tasks, chunksize=chunk)
    else:
        executor = None
        results = map(_trial_worker, tasks)

    msd_acc: dict[str, np.ndarray] = {}
    rho_acc: dict[str, np.ndarray] = {}
    try:
        for (cfg, spec, trial), trace in zip(tasks, results):
            label = spec.effective_label
            if label not in msd_acc:
                msd_acc[label] = np.zeros(config.iterations)
            msd_acc[label] += trace.msd
            if trace.rho is not None:
                if label not in rho_acc:
                    rho_acc[label] = np.zeros(config.iterations)
                rho_acc[label] += trace.rho
    finally:
        if executor is not None:
            executor.shutdown()

    msd = {k: v / config.trials for k, v in msd_acc.items()}
    rho = {k: v / config.trials for k, v in rho_acc.items()}
    window = config.steady_window
    steady = {k: float(np.mean(v[-window:])) for k, v in msd.items()}
    return LearningCurve(iterations=config.iterations,
                         labels=tuple(s.effective_label
                                      for s in config.algorithms),
                         msd=msd, rho=rho, steady_state=steady,
                         steady_window=window)


# ---------------------------------------------------------------------------
# parameter sweeps

SWEEPABLE = ("theta", "lambda")


@dataclasses.dataclass(frozen=True)
class SweepPoint:
    value: float
    msd: float
    msd_db: float
    status: str
    theory_msd: float
    theory_msd_db: float
    theory_status: str


@dataclasses.dataclass(frozen=True)
class SweepResult:
    parameter: str
    points: tuple[SweepPoint, ...]
    empirical_argmin: float
    theory_optimum: dict | None


def theory_inputs_for(config: ExperimentConfig, name: str,
                      params: dict) -> _theory.TheoryInputs:
    """Build predictor inputs from an experiment config and one algorithm.

    Only systems with explicit nominal weights support predictions; the
    uniform-gain algorithms (rls, rmcc) map to alpha = -1 with theta = N.
    """
    system = config.system
    if isinstance(system, StaticSystem):
        w_true, sigma_q2 = np.array(system.weights), 0.0
    elif isinstance(system, RandomWalkSystem):
        w_true, sigma_q2 = np.array(system.weights), system.increment_variance
    else:
        raise ValueError("staged systems have no single nominal weight "
                         "vector for theory predictions")
    p = resolve_params(name, params)
    if name in ("rls", "rmcc"):
        theta, alpha = float(len(w_true)), -1.0
    elif name in ("prls", "prmcc"):
        theta, alpha = p["theta"], p["alpha"]
    else:
        raise ValueError(f"no steady-state predictor for algorithm '{name}'")
    sigma = math.inf if name in ("rls", "prls") else p["sigma"]
    return _theory.TheoryInputs(n_taps=len(w_true), w_true=w_true,
                                lam=p["lambda"], theta=theta, alpha=alpha,
                                sigma=sigma, sigma_x2=config.input_variance,
                                moments=config.noise.moments(),
                                sigma_q2=sigma_q2)


def _theory_msd_total(inputs: _theory.TheoryInputs) -> float:
    if inputs.sigma_q2 > 0.0:
        return _theory.msd_tracking(inputs).total
    return _theory.msd_stationary(inputs).total


def sweep(config: ExperimentConfig, parameter: str, grid,
          workers: int = 1) -> SweepResult:
    """One ensemble per grid value of a single algorithm's parameter.

    Numerical faults and invalid theory regimes flag the affected point
    instead of aborting the sweep.
    """
    if parameter not in SWEEPABLE:
        raise ValueError(f"parameter must be one of {SWEEPABLE}")
    if len(config.algorithms) != 1:
        raise ValueError("sweep requires exactly one algorithm in the config")
    spec = config.algorithms[0]
    required, optional = ALGORITHM_PARAMS[spec.name]
    if parameter not in required and parameter not in optional:
        raise ValueError(f"algorithm '{spec.name}' has no parameter "
                         f"'{parameter}'")
    grid = [float(v) for v in grid]
    if not grid:
        raise ValueError("grid must not be empty")

    points = []
    for value in grid:
        new_params = dict(spec.params, **{parameter: value})
        new_spec = dataclasses.replace(spec, params=new_params)
        cfg = dataclasses.replace(config, algorithms=(new_spec,))
        try:
            curve = run_ensemble(cfg, workers=workers)
            msd = curve.steady_state[new_spec.effective_label]
            msd_db = curve.steady_state_db(new_spec.effective_label)
            status = "ok"
        except _filters.NumericalFault:
            msd, msd_db, status = math.nan, math.nan, "numerical_fault"
        try:
            inputs = theory_inputs_for(cfg, new_spec.name, new_params)
            theory_msd = _theory_msd_total(inputs)
            theory_db = 10.0 * math.log10(max(theory_msd, DB_FLOOR))
            theory_status = "ok"
        except (ValueError, _theory.InvalidRegimeError):
            theory_msd, theory_db = math.nan, math.nan
            theory_status = "invalid_regime"
        points.append(SweepPoint(value, msd, msd_db, status,
                                 theory_msd, theory_db, theory_status))

    valid = [p for p in points if p.status == "ok"]
    if not valid:
        raise _filters.NumericalFault("every sweep point faulted")
    argmin = min(valid, key=lambda p: p.msd).value

    optimum = None
    try:
        inputs = theory_inputs_for(config, spec.name, spec.params)
        if inputs.sigma_q2 > 0.0:
            opt = _theory.optimal_parameters(inputs)
            optimum = {"theta_opt": opt.theta_opt,
                       "lambda_opt": opt.lambda_opt,
                       "lambda_opt_in_range": opt.lambda_opt_in_range}
    except (ValueError, _theory.InvalidRegimeError):
        optimum = None
    return SweepResult(parameter=parameter, points=tuple(points),
                       empirical_argmin=argmin, theory_optimum=optimum)
