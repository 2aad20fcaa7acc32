"""Diffusion surrogate of one-pass noisy SGD on ridge regression.

Risk trajectories, exact Gaussian laws and Renyi-DP loss of the surrogate,
plus direct simulators used to validate them.
"""

from .errors import (DimensionMismatch, ExhaustedData, HorizonExceeded, HsgdError, MixtureNotPD,
                     NegativeEigenvalue, NotSymmetric, SingularCovariance, TimeOrder, UnstableStep)
from .hsgd import GaussianLaw, HsgdSamples, LinearizedHsgd, hsgd_law, sample_hsgd_paths
from .privacy import (DifferentiatingUpdate, NeighborPair, RdpResult, ReleaseSpec, adversarial_pairs,
                      couple_at, default_s_grid, differentiating_update, epsilon_curve, mixed_epsilon,
                      mixture_bound, pair_direction, propagate, rdp_release, renyi_gaussian)
from .problem import (ProblemInstance, from_arrays, generate_synthetic, gradient_flow, initial_point,
                      load_csv, default_noise_std, population_risk)
from .schedule import Schedule
from .sgd import DoobReport, EnsembleSummary, SgdTrajectory, doob_diagnostic, run_ensemble, run_sgd
from .spectral import SpectralCache, build_cache, kernel_traces, transition, transition_diag
from .volterra import RiskCurves, solve_volterra

__all__ = [
    "DifferentiatingUpdate", "DimensionMismatch", "DoobReport", "EnsembleSummary", "ExhaustedData",
    "GaussianLaw", "HorizonExceeded", "HsgdError", "HsgdSamples", "LinearizedHsgd", "MixtureNotPD",
    "NegativeEigenvalue", "NeighborPair", "NotSymmetric", "ProblemInstance", "RdpResult", "ReleaseSpec",
    "RiskCurves", "Schedule", "SgdTrajectory", "SingularCovariance", "SpectralCache", "TimeOrder",
    "UnstableStep", "adversarial_pairs", "build_cache", "couple_at", "default_s_grid",
    "differentiating_update", "doob_diagnostic", "epsilon_curve", "from_arrays", "generate_synthetic",
    "gradient_flow", "hsgd_law", "initial_point", "kernel_traces", "load_csv", "mixed_epsilon",
    "mixture_bound", "pair_direction", "default_noise_std", "population_risk", "propagate", "rdp_release",
    "renyi_gaussian", "run_ensemble", "run_sgd", "sample_hsgd_paths", "solve_volterra", "transition",
    "transition_diag",
]
