"""K-component Poisson mixture on nonnegative counts."""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

from .. import _kernels
from ..errors import ConfigurationError, DegenerateComponentError, InvalidParameterError
from ..model import MixtureStats
from ..params import ParamVec
from .base import MixtureModel

RATE_FLOOR = 1e-10


class PoissonMixture(MixtureModel):
    """Parameter layout: weights block, then one rate block per component."""

    def __init__(self, data, n_components):
        super().__init__(data, n_components)
        if np.any(self.data < 0) or np.any(self.data != np.floor(self.data)):
            raise ValueError("Poisson data must be nonnegative integer counts")

    def make_params(self, weights, rates) -> ParamVec:
        weights = np.asarray(weights, dtype=np.float64)
        rates = np.asarray(rates, dtype=np.float64)
        values = np.concatenate([weights, rates])
        blocks = [("weights", 0, self.k)]
        for j in range(self.k):
            blocks.append((f"comp{j + 1}", self.k + j, self.k + j + 1))
        return ParamVec(values, blocks)

    def param_template(self) -> ParamVec:
        rates = np.quantile(self.data, np.linspace(0.2, 0.8, self.k)) + 0.5
        return self.make_params(np.full(self.k, 1.0 / self.k), rates)

    def rates(self, theta: ParamVec) -> np.ndarray:
        return theta.values[self.k :]

    def _check_family(self, theta: ParamVec) -> None:
        if np.any(self.rates(theta) <= 0.0):
            raise InvalidParameterError("rates must be strictly positive")

    def _posterior(self, theta: ParamVec):
        w = np.ascontiguousarray(self.weights(theta))
        return _kernels.poisson_posterior(self.data, np.log(w), np.ascontiguousarray(self.rates(theta)))

    def component_log_density(self, theta, items, comps):
        lam = self.rates(theta)[comps]
        c = self.data[items]
        return c * np.log(lam) - lam - gammaln(c + 1.0)

    def _moments(self, resp: np.ndarray) -> dict:
        return {"n_k": resp.sum(axis=0), "sum_y": resp.T @ self.data}

    def m_step(self, stats: MixtureStats) -> ParamVec:
        n_k = stats.moments["n_k"]
        self._mass_check(n_k)
        rates = stats.moments["sum_y"] / n_k
        if np.any(rates < RATE_FLOOR):
            bad = int(np.argmin(rates))
            raise DegenerateComponentError(f"component {bad} rate {rates[bad]:.3g} below floor")
        w = n_k / n_k.sum()
        return self.make_params(w / w.sum(), rates)

    def cm_step(self, stats: MixtureStats, theta: ParamVec, block: str) -> ParamVec:
        if block == "all":
            return self.m_step(stats)
        n_k = stats.moments["n_k"]
        self._mass_check(n_k)
        if block == "weights":
            w = n_k / n_k.sum()
            return theta.with_block("weights", w / w.sum())
        if block.startswith("comp"):
            j = int(block[4:]) - 1
            rate = stats.moments["sum_y"][j] / n_k[j]
            if rate < RATE_FLOOR:
                raise DegenerateComponentError(f"component {j} rate {rate:.3g} below floor")
            return theta.with_block(block, [rate])
        raise ConfigurationError(f"unknown block {block!r}")

    def free_params(self, theta: ParamVec) -> np.ndarray:
        parts = [self.weights(theta)[:-1]] if self.k > 1 else []
        parts.append(self.rates(theta))
        return np.concatenate(parts) if parts else self.rates(theta)

    def free_coord_kinds(self):
        kinds = ["weight"] * (self.k - 1) if self.k > 1 else []
        return kinds + ["rate"] * self.k

    def from_free(self, free: np.ndarray) -> ParamVec:
        free = np.asarray(free, dtype=np.float64)
        if self.k > 1:
            w = np.concatenate([free[: self.k - 1], [1.0 - free[: self.k - 1].sum()]])
            rates = free[self.k - 1 :]
        else:
            w = np.array([1.0])
            rates = free
        return self.make_params(w, rates)

    def simulate(self, theta: ParamVec, rng: np.random.Generator) -> np.ndarray:
        w = self.weights(theta)
        labels = self.sample_labels(np.tile(w, (self.n_items, 1)), rng)
        return rng.poisson(self.rates(theta)[labels]).astype(np.float64)

    def batch_log_obs_lik(self, theta: ParamVec, datasets: np.ndarray) -> np.ndarray:
        w = self.weights(theta)
        lam = self.rates(theta)
        c = datasets[..., None]
        logp = np.log(w) + c * np.log(lam) - lam - gammaln(c + 1.0)
        m = logp.max(axis=-1)
        lse = m + np.log(np.exp(logp - m[..., None]).sum(axis=-1))
        return lse.sum(axis=-1)

    def posterior_param_draw(self, labels: np.ndarray, rng: np.random.Generator) -> ParamVec:
        """Conjugate draw under a flat rate prior: lambda_k ~ Gamma(S_k + 1, n_k).

        Draw order is fixed: weights, then each rate.
        """
        n_k = np.bincount(labels, minlength=self.k).astype(float)
        if np.any(n_k < 1):
            raise DegenerateComponentError("a class is empty")
        w = rng.dirichlet(n_k + 1.0) if self.k > 1 else np.array([1.0])
        sums = np.array([self.data[labels == j].sum() for j in range(self.k)])
        rates = np.array([rng.gamma(sums[j] + 1.0, 1.0 / n_k[j]) for j in range(self.k)])
        if np.any(rates < RATE_FLOOR):
            raise DegenerateComponentError("drew a vanishing rate")
        return self.make_params(w, rates)

    def grid_axis_names(self):
        names = []
        if self.k == 2:
            names.append("pi1")
        names += [f"rate{j + 1}" for j in range(self.k)]
        return names

    def params_from_grid(self, names, point, base: ParamVec) -> ParamVec:
        w = self.weights(base).copy()
        rates = self.rates(base).copy()
        for name, v in zip(names, point):
            if name == "pi1":
                if self.k != 2:
                    raise ConfigurationError("pi1 grid axis needs K=2")
                w = np.array([v, 1.0 - v])
            elif name.startswith("rate"):
                rates[int(name[4:]) - 1] = v
            else:
                raise ConfigurationError(f"unknown grid axis {name!r}")
        return self.make_params(w, rates)

    def grid_log_obs_lik(self, names, points: np.ndarray, base: ParamVec) -> np.ndarray:
        g = points.shape[0]
        w = np.tile(self.weights(base), (g, 1))
        lam = np.tile(self.rates(base), (g, 1))
        for col, name in enumerate(names):
            v = points[:, col]
            if name == "pi1":
                w = np.stack([v, 1.0 - v], axis=1)
            elif name.startswith("rate"):
                lam[:, int(name[4:]) - 1] = v
            else:
                raise ConfigurationError(f"unknown grid axis {name!r}")
        c = self.data[None, :, None]
        logp = np.log(w)[:, None, :] + c * np.log(lam)[:, None, :] - lam[:, None, :] - gammaln(c + 1.0)
        m = logp.max(axis=2)
        lse = m + np.log(np.exp(logp - m[:, :, None]).sum(axis=2))
        return lse.sum(axis=1)
