from .base import MixtureModel
from .gaussian import GaussianMixture
from .latent_scale import LatentScaleGaussian
from .poisson import PoissonMixture

__all__ = ["MixtureModel", "GaussianMixture", "PoissonMixture", "LatentScaleGaussian"]
