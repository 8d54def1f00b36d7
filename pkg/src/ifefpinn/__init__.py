"""Bi-level PINN training on a hidden basis extended with Random Fourier Features."""

__version__ = "0.1.0"

from .errors import (ConfigurationError, DivergenceError, NumericError, SingularSystemError,
                     UndefinedMetricError)
from .features import FeatureBasis, RffMatrix, feature_jets, sample_rff
from .jets import Jet2, NetworkParams, forward_jets, hidden_jets, param_gradient
from .kernels import BACKEND
from .lower import QpSystem, assemble, solve_regularized
from .trainer import TrainConfig, hypergradient_ift, run_training

__all__ = [
    "BACKEND", "ConfigurationError", "DivergenceError", "FeatureBasis", "Jet2", "NetworkParams",
    "NumericError", "QpSystem", "RffMatrix", "SingularSystemError", "TrainConfig",
    "UndefinedMetricError", "assemble", "feature_jets", "forward_jets", "hidden_jets",
    "hypergradient_ift", "param_gradient", "run_training", "sample_rff", "solve_regularized",
]
