"""EM algorithm toolkit: deterministic and stochastic variants, convergence
diagnostics, and mixture models, with a brute-force verification oracle."""

from ._kernels import BACKEND
from .core import (
    FitTrace,
    IterationRecord,
    StationaryEstimate,
    VariantConfig,
    em_map,
    run_fit,
)
from .errors import (
    ConfigurationError,
    DataError,
    DegenerateComponentError,
    EmkitError,
    InvalidParameterError,
)
from .model import LatentModel, MixtureStats
from .models import GaussianMixture, LatentScaleGaussian, MixtureModel, PoissonMixture
from .params import ParamVec, StoppingRule
from .rng import RngStream
from .variants import AnnealingSchedule, LatentScaleExpansion, NullExpansion

__version__ = "0.1.0"

__all__ = [
    "AnnealingSchedule",
    "BACKEND",
    "ConfigurationError",
    "DataError",
    "DegenerateComponentError",
    "EmkitError",
    "FitTrace",
    "GaussianMixture",
    "InvalidParameterError",
    "IterationRecord",
    "LatentModel",
    "LatentScaleExpansion",
    "LatentScaleGaussian",
    "MixtureModel",
    "MixtureStats",
    "NullExpansion",
    "ParamVec",
    "PoissonMixture",
    "RngStream",
    "StationaryEstimate",
    "StoppingRule",
    "VariantConfig",
    "em_map",
    "run_fit",
]
