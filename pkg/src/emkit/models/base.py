"""Shared machinery for finite mixture models.

Subclasses supply the component log-densities and the exact M-step; the
E-step, posterior sampler, classifier and complete-data likelihood are
generic over the component family.
"""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateComponentError, InvalidParameterError
from ..model import LatentModel, MixtureStats
from ..params import ParamVec

WEIGHT_SUM_TOL = 1e-12
MASS_FLOOR_PER_ITEM = 1e-8


class MixtureModel(LatentModel):
    """K-component i.i.d. mixture with label latent variables."""

    def __init__(self, data, n_components: int):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        if self.data.ndim != 1 or self.data.size == 0:
            raise ValueError("data must be a non-empty 1-D array")
        self.k = int(n_components)
        if self.k < 1:
            raise ValueError("need at least one component")

    @property
    def n_items(self) -> int:
        return self.data.size

    # --- family hooks ------------------------------------------------------

    def _posterior(self, theta: ParamVec):
        """Return ``(loglik, resp)`` via the kernel backend."""
        raise NotImplementedError

    def component_log_density(self, theta: ParamVec, items: np.ndarray, comps: np.ndarray) -> np.ndarray:
        """log f(y_i | component k) for the requested item/component subsets."""
        raise NotImplementedError

    def _check_family(self, theta: ParamVec) -> None:
        raise NotImplementedError

    # --- contract ----------------------------------------------------------

    def weights(self, theta: ParamVec) -> np.ndarray:
        return theta.block("weights")

    def check(self, theta: ParamVec) -> None:
        if theta.block_names() != self.param_template().block_names():
            raise InvalidParameterError("parameter blocks do not match the model layout")
        w = self.weights(theta)
        if np.any(w <= 0.0) or np.any(w >= 1.0 + WEIGHT_SUM_TOL):
            raise InvalidParameterError("mixing proportions must lie in (0, 1)")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise InvalidParameterError("mixing proportions must sum to 1")
        self._check_family(theta)

    def log_obs_lik(self, theta: ParamVec) -> float:
        loglik, _ = self._posterior(theta)
        return loglik

    def e_stats(self, theta: ParamVec) -> MixtureStats:
        _, resp = self._posterior(theta)
        return self.stats_from_resp(resp)

    def stats_from_resp(self, resp: np.ndarray) -> MixtureStats:
        return MixtureStats(resp=resp, moments=self._moments(resp))

    def stats_from_labels(self, labels: np.ndarray) -> MixtureStats:
        resp = np.zeros((self.n_items, self.k))
        resp[np.arange(self.n_items), labels] = 1.0
        return self.stats_from_resp(resp)

    def _moments(self, resp: np.ndarray) -> dict:
        raise NotImplementedError

    def log_comp_lik(self, labels: np.ndarray, theta: ParamVec) -> float:
        labels = np.asarray(labels)
        items = np.arange(self.n_items)
        dens = self.component_log_density(theta, items, labels)
        return float(np.sum(np.log(self.weights(theta))[labels]) + dens.sum())

    def classify(self, theta: ParamVec) -> np.ndarray:
        _, resp = self._posterior(theta)
        return np.argmax(resp, axis=1)

    def sample_posterior(self, theta: ParamVec, rng: np.random.Generator) -> np.ndarray:
        _, resp = self._posterior(theta)
        return self.sample_labels(resp, rng)

    @staticmethod
    def sample_labels(resp: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        # one uniform per item, inverted through the row cdf
        cdf = np.cumsum(resp, axis=1)
        u = rng.random(resp.shape[0])
        return np.minimum((u[:, None] > cdf).sum(axis=1), resp.shape[1] - 1)

    def log_joint_matrix(self, theta: ParamVec, items=None, comps=None) -> np.ndarray:
        """log(pi_k f_k(y_i)) on an (items x comps) grid; default full."""
        items = np.arange(self.n_items) if items is None else np.asarray(items)
        comps = np.arange(self.k) if comps is None else np.asarray(comps)
        ii, kk = np.meshgrid(items, comps, indexing="ij")
        dens = self.component_log_density(theta, ii.ravel(), kk.ravel()).reshape(ii.shape)
        return np.log(self.weights(theta))[comps][None, :] + dens

    def q_function(self, theta: ParamVec, theta_ref: ParamVec) -> float:
        """Exact E[log p(Z | theta) | y, theta_ref] via a finite label sum."""
        _, resp = self._posterior(theta_ref)
        return float(np.sum(resp * self.log_joint_matrix(theta)))

    def _mass_check(self, n_k: np.ndarray) -> None:
        if np.any(n_k < MASS_FLOOR_PER_ITEM * self.n_items):
            bad = int(np.argmin(n_k))
            raise DegenerateComponentError(f"component {bad} mass {n_k[bad]:.3g} below floor")
