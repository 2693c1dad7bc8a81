"""Conditional-Gaussian nonlinear state estimation and sampling toolkit.

Simulation, closed-form optimal filtering and smoothing, conditional
trajectory sampling, and skill diagnostics for coupled SDE systems whose
hidden variables are exactly conditionally Gaussian given the observed path.
"""

__version__ = "0.1.0"

from .errors import (CgnsError, CovarianceBlowup, DegenerateSeries,
                     FilterCovSingular, InvalidParams, NonFiniteCoefficient,
                     NonFiniteState, NotPsd, SingularObservationGramian)
from .filtering import (GaussianState, PosteriorSeries, SeriesKind,
                        default_init, run_filter)
from .linalg import psd_sqrt
from .model import (AuxiliaryMatrices, CgnsModel, CoefficientSnapshot,
                    GramianSet, auxiliary, build_model, evaluate, gramians,
                    linear_model)
from .sampler import (Direction, TrajectoryEnsemble, run_backward_sampler,
                      run_forward_sampler)
from .simulate import TimeGrid, Trajectory, simulate_ensemble, simulate_path
from .smoothing import run_smoother
from .triad import TriadParams, default_params, triad_model

__all__ = [
    "__version__",
    "CgnsError", "CovarianceBlowup", "DegenerateSeries", "FilterCovSingular",
    "InvalidParams", "NonFiniteCoefficient", "NonFiniteState", "NotPsd",
    "SingularObservationGramian",
    "GaussianState", "PosteriorSeries", "SeriesKind", "default_init",
    "run_filter",
    "psd_sqrt",
    "AuxiliaryMatrices", "CgnsModel", "CoefficientSnapshot", "GramianSet",
    "auxiliary", "build_model", "evaluate", "gramians", "linear_model",
    "Direction", "TrajectoryEnsemble", "run_backward_sampler",
    "run_forward_sampler",
    "TimeGrid", "Trajectory", "simulate_ensemble", "simulate_path",
    "run_smoother",
    "TriadParams", "default_params", "triad_model",
]
