"""The latent-variable model contract consumed by every fit driver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .params import ParamVec

ROW_SUM_TOL = 1e-12


@dataclass
class MixtureStats:
    """E-step output for finite mixtures: responsibilities plus moment sums.

    ``resp[i, k]`` is the posterior probability that item ``i`` belongs to
    component ``k``; each row is a probability vector.  ``moments`` holds the
    responsibility-weighted sums the M-step consumes (model-defined keys).
    """

    resp: np.ndarray
    moments: dict

    def __post_init__(self):
        rows = self.resp.sum(axis=1)
        if np.any(self.resp < -ROW_SUM_TOL) or np.max(np.abs(rows - 1.0)) > ROW_SUM_TOL:
            raise InvalidParameterError("responsibility rows must be probability vectors")

    @property
    def n_items(self) -> int:
        return self.resp.shape[0]

    @property
    def n_components(self) -> int:
        return self.resp.shape[1]


class LatentModel:
    """Behavioral contract a statistical model implements for the drivers.

    Subclasses provide the observed log-likelihood, the exact E- and M-steps,
    the complete-data log-likelihood, a posterior sampler and a hard
    classifier.  Models are immutable after construction; all methods are
    pure functions of ``(theta, rng)`` and safe for concurrent fits.
    """

    # --- required surface -------------------------------------------------

    @property
    def n_items(self) -> int:
        raise NotImplementedError

    def param_template(self) -> ParamVec:
        """A valid parameter vector defining the block layout."""
        raise NotImplementedError

    def check(self, theta: ParamVec) -> None:
        """Raise :class:`InvalidParameterError` unless ``theta`` is valid."""
        raise NotImplementedError

    def log_obs_lik(self, theta: ParamVec) -> float:
        raise NotImplementedError

    def e_stats(self, theta: ParamVec) -> MixtureStats:
        raise NotImplementedError

    def m_step(self, stats: MixtureStats) -> ParamVec:
        raise NotImplementedError

    # --- optional capabilities (label-based mixtures) ---------------------

    def log_comp_lik(self, labels: np.ndarray, theta: ParamVec) -> float:
        """Complete-data log-likelihood log p(z | theta) at hard labels."""
        raise NotImplementedError

    def sample_posterior(self, theta: ParamVec, rng: np.random.Generator) -> np.ndarray:
        """Draw one label per item from its responsibility row.

        Consumes exactly one uniform variate per item.
        """
        raise NotImplementedError

    def classify(self, theta: ParamVec) -> np.ndarray:
        """Hard assignment arg max_z p(z | y, theta); ties to lowest index."""
        raise NotImplementedError

    def stats_from_labels(self, labels: np.ndarray) -> MixtureStats:
        """Hard (0/1 responsibility) sufficient statistics for given labels."""
        raise NotImplementedError

    def stats_from_resp(self, resp: np.ndarray) -> MixtureStats:
        """Rebuild the moment sums from an arbitrary responsibility matrix."""
        raise NotImplementedError

    # --- block structure for coordinate-wise variants ---------------------

    def cm_step(self, stats: MixtureStats, theta: ParamVec, block: str) -> ParamVec:
        """Conditional maximizer of Q over one block, other blocks fixed."""
        raise NotImplementedError

    def free_params(self, theta: ParamVec) -> np.ndarray:
        """Minimal unconstrained-dimension coordinates (for derivatives)."""
        raise NotImplementedError

    def from_free(self, free: np.ndarray) -> ParamVec:
        raise NotImplementedError

    # --- simulation / Bayesian hooks ---------------------------------------

    def simulate(self, theta: ParamVec, rng: np.random.Generator) -> np.ndarray:
        """Draw a synthetic dataset of ``n_items`` observations from theta."""
        raise NotImplementedError

    def posterior_param_draw(self, labels: np.ndarray, rng: np.random.Generator) -> ParamVec:
        """Draw theta from the complete-data posterior (non-informative prior)."""
        raise NotImplementedError
