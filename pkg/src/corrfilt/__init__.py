"""Robust sparse adaptive filtering under the maximum correntropy criterion.

The package pairs recursive correntropy filters with proportionate per-tap
updating (and their least-squares / gradient-descent relatives), an adaptive
convex combination of two such filters, closed-form steady-state and
tracking predictors, and a deterministic Monte-Carlo experiment lab that can
cross-validate the two.
"""

from .combiner import (CombinerOutput, CombinerState, cprmcc_step,
                       make_combiner, mixing_parameter, update_b)
from .filters import (FilterState, NumericalFault, StepOutput,
                      error_nonlinearity, gain_vector, iplms_step, ipmcc_step,
                      lms_step, make_state, mcc_step, mcc_weight, prmcc_step,
                      proportionate_gains, rmcc_step, update_P)
from .noise import (Gaussian, MixedGaussian, MomentSet, NoiseModel, Uniform,
                    stream, white_gaussian_input)
from .simlab import (AlgorithmSpec, ExperimentConfig, LearningCurve,
                     RandomWalkSystem, Stage, StagedSystem, StaticSystem,
                     SweepResult, SystemModel, TrialTrace, msd_instant,
                     run_ensemble, run_trial, sweep)
from .theory import (CombinedMSD, CrossMSD, InvalidRegimeError, MSDPrediction,
                     OptimalParameters, TaylorTerms, TaylorValidityWarning,
                     TheoryInputs, TrackingMSD, combined_msd,
                     iterations_to_steady_state, mean_error_trajectory,
                     msd_cross, msd_stationary, msd_tracking,
                     optimal_parameters, sparsity_profile,
                     stability_bound_theta, taylor_terms)

__version__ = "0.1.0"

__all__ = [
    "AlgorithmSpec", "CombinedMSD", "CombinerOutput", "CombinerState",
    "CrossMSD", "ExperimentConfig", "FilterState", "Gaussian",
    "InvalidRegimeError", "LearningCurve", "MixedGaussian", "MomentSet",
    "MSDPrediction", "NoiseModel", "NumericalFault", "OptimalParameters",
    "RandomWalkSystem", "Stage", "StagedSystem", "StaticSystem", "StepOutput",
    "SweepResult", "SystemModel", "TaylorTerms", "TaylorValidityWarning",
    "TheoryInputs", "TrackingMSD", "TrialTrace", "Uniform", "combined_msd",
    "cprmcc_step", "error_nonlinearity", "gain_vector",
    "iterations_to_steady_state", "iplms_step", "ipmcc_step", "lms_step",
    "make_combiner", "make_state", "mcc_step", "mcc_weight",
    "mean_error_trajectory", "mixing_parameter", "msd_cross", "msd_instant",
    "msd_stationary", "msd_tracking", "optimal_parameters", "prmcc_step",
    "proportionate_gains", "rmcc_step", "run_ensemble", "run_trial",
    "sparsity_profile", "stability_bound_theta", "stream", "sweep",
    "taylor_terms", "update_P", "update_b", "white_gaussian_input",
]
