"""Univariate K-component Gaussian mixture with exact E- and M-steps."""

from __future__ import annotations

import numpy as np

from .. import _kernels
from ..errors import ConfigurationError, DegenerateComponentError, InvalidParameterError
from ..model import MixtureStats
from ..params import ParamVec
from .base import MixtureModel

VAR_FLOOR = 1e-10
_LOG_2PI = float(np.log(2.0 * np.pi))


class GaussianMixture(MixtureModel):
    """Parameter layout: weights block, then one (mean, variance) block per
    component.

    ``fixed_weights`` pins the mixing proportions to a constant vector (the
    M-step leaves them untouched); ``tied_variance`` pools a single variance
    across components.  Both together make CEM coincide with k-means.
    """

    def __init__(self, data, n_components, fixed_weights=None, tied_variance=False):
        super().__init__(data, n_components)
        self.tied_variance = bool(tied_variance)
        if fixed_weights is not None:
            fixed_weights = np.asarray(fixed_weights, dtype=np.float64)
            if fixed_weights.size != self.k or abs(fixed_weights.sum() - 1.0) > 1e-12:
                raise ConfigurationError("fixed_weights must be a length-K probability vector")
        self.fixed_weights = fixed_weights

    # --- parameter plumbing -------------------------------------------------

    def make_params(self, weights, means, variances) -> ParamVec:
        weights = np.asarray(weights, dtype=np.float64)
        means = np.asarray(means, dtype=np.float64)
        variances = np.asarray(variances, dtype=np.float64)
        values = np.concatenate([weights, np.stack([means, variances], axis=1).ravel()])
        blocks = [("weights", 0, self.k)]
        for j in range(self.k):
            a = self.k + 2 * j
            blocks.append((f"comp{j + 1}", a, a + 2))
        return ParamVec(values, blocks)

    def param_template(self) -> ParamVec:
        w = self.fixed_weights if self.fixed_weights is not None else np.full(self.k, 1.0 / self.k)
        means = np.quantile(self.data, np.linspace(0.1, 0.9, self.k))
        var = max(float(np.var(self.data)), 1.0)
        return self.make_params(w, means, np.full(self.k, var))

    def means(self, theta: ParamVec) -> np.ndarray:
        return theta.values[self.k::2]

    def variances(self, theta: ParamVec) -> np.ndarray:
        return theta.values[self.k + 1 :: 2]

    def _check_family(self, theta: ParamVec) -> None:
        if np.any(self.variances(theta) <= 0.0):
            raise InvalidParameterError("variances must be strictly positive")
        if self.fixed_weights is not None and np.max(np.abs(self.weights(theta) - self.fixed_weights)) > 1e-12:
            raise InvalidParameterError("weights are fixed for this model")

    # --- densities ----------------------------------------------------------

    def _posterior(self, theta: ParamVec):
        w = np.ascontiguousarray(self.weights(theta))
        return _kernels.gmm_posterior(
            self.data,
            np.log(w),
            np.ascontiguousarray(self.means(theta)),
            np.ascontiguousarray(self.variances(theta)),
        )

    def component_log_density(self, theta, items, comps):
        mu = self.means(theta)[comps]
        var = self.variances(theta)[comps]
        d = self.data[items] - mu
        return -0.5 * (_LOG_2PI + np.log(var) + d * d / var)

    # --- M-step -------------------------------------------------------------

    def _moments(self, resp: np.ndarray) -> dict:
        return {
            "n_k": resp.sum(axis=0),
            "sum_y": resp.T @ self.data,
            "sum_yy": resp.T @ (self.data * self.data),
        }

    def m_step(self, stats: MixtureStats) -> ParamVec:
        n_k = stats.moments["n_k"]
        self._mass_check(n_k)
        mu = stats.moments["sum_y"] / n_k
        var = stats.moments["sum_yy"] / n_k - mu * mu
        if self.tied_variance:
            pooled = float(np.sum(stats.moments["sum_yy"] - n_k * mu * mu)) / self.n_items
            var = np.full(self.k, pooled)
        if np.any(var < VAR_FLOOR):
            bad = int(np.argmin(var))
            raise DegenerateComponentError(f"component {bad} variance {var[bad]:.3g} below floor")
        if self.fixed_weights is not None:
            w = self.fixed_weights.copy()
        else:
            w = n_k / n_k.sum()
            w = w / w.sum()  # absorb rounding
        return self.make_params(w, mu, var)

    def cm_step(self, stats: MixtureStats, theta: ParamVec, block: str) -> ParamVec:
        if block == "all":
            return self.m_step(stats)
        if self.tied_variance:
            raise ConfigurationError("block-wise maximizers need untied variances")
        n_k = stats.moments["n_k"]
        self._mass_check(n_k)
        if block == "weights":
            if self.fixed_weights is not None:
                return theta.copy()
            w = n_k / n_k.sum()
            return theta.with_block("weights", w / w.sum())
        if block.startswith("comp"):
            j = int(block[4:]) - 1
            mu = stats.moments["sum_y"][j] / n_k[j]
            var = stats.moments["sum_yy"][j] / n_k[j] - mu * mu
            if var < VAR_FLOOR:
                raise DegenerateComponentError(f"component {j} variance {var:.3g} below floor")
            return theta.with_block(block, [mu, var])
        raise ConfigurationError(f"unknown block {block!r}")

    # --- reduced coordinates for derivative-based diagnostics ----------------

    def free_params(self, theta: ParamVec) -> np.ndarray:
        parts = []
        if self.fixed_weights is None and self.k > 1:
            parts.append(self.weights(theta)[:-1])
        parts.append(self.means(theta))
        if self.tied_variance:
            parts.append(self.variances(theta)[:1])
        else:
            parts.append(self.variances(theta))
        return np.concatenate(parts)

    def free_coord_kinds(self):
        kinds = []
        if self.fixed_weights is None and self.k > 1:
            kinds += ["weight"] * (self.k - 1)
        kinds += ["mean"] * self.k
        kinds += ["var"] if self.tied_variance else ["var"] * self.k
        return kinds

    def from_free(self, free: np.ndarray) -> ParamVec:
        free = np.asarray(free, dtype=np.float64)
        pos = 0
        if self.fixed_weights is not None:
            w = self.fixed_weights.copy()
        elif self.k > 1:
            w = np.concatenate([free[: self.k - 1], [1.0 - free[: self.k - 1].sum()]])
            pos = self.k - 1
        else:
            w = np.array([1.0])
        mu = free[pos : pos + self.k]
        pos += self.k
        if self.tied_variance:
            var = np.full(self.k, free[pos])
        else:
            var = free[pos : pos + self.k]
        return self.make_params(w, mu, var)

    # --- simulation and conjugate draws --------------------------------------

    def simulate(self, theta: ParamVec, rng: np.random.Generator) -> np.ndarray:
        w = self.weights(theta)
        labels = self.sample_labels(np.tile(w, (self.n_items, 1)), rng)
        return self.means(theta)[labels] + np.sqrt(self.variances(theta)[labels]) * rng.standard_normal(self.n_items)

    def batch_log_obs_lik(self, theta: ParamVec, datasets: np.ndarray) -> np.ndarray:
        """Vectorized log p(y | theta) over rows of ``datasets``."""
        w = self.weights(theta)
        mu = self.means(theta)
        var = self.variances(theta)
        d = datasets[..., None] - mu
        logp = np.log(w) - 0.5 * (_LOG_2PI + np.log(var) + d * d / var)
        m = logp.max(axis=-1)
        lse = m + np.log(np.exp(logp - m[..., None]).sum(axis=-1))
        return lse.sum(axis=-1)

    def posterior_param_draw(self, labels: np.ndarray, rng: np.random.Generator) -> ParamVec:
        """Complete-data conjugate draw under the Jeffreys prior 1/sigma^2.

        Needs every class to hold >= 2 items with positive spread; raises
        DegenerateComponentError otherwise (callers resample the labels).
        Draw order is fixed: weights, then per component (variance, mean).
        """
        n_k = np.bincount(labels, minlength=self.k).astype(float)
        if np.any(n_k < 2):
            raise DegenerateComponentError("a class holds fewer than 2 items")
        if self.fixed_weights is not None:
            w = self.fixed_weights.copy()
        else:
            w = rng.dirichlet(n_k + 1.0)
        mu = np.empty(self.k)
        var = np.empty(self.k)
        for j in range(self.k):
            y_j = self.data[labels == j]
            ybar = y_j.mean()
            ss = float(np.sum((y_j - ybar) ** 2))
            if ss <= 0.0:
                raise DegenerateComponentError("a class has zero spread")
            var[j] = ss / (2.0 * rng.gamma((n_k[j] - 1.0) / 2.0))
            mu[j] = ybar + np.sqrt(var[j] / n_k[j]) * rng.standard_normal()
        return self.make_params(w, mu, var)

    # --- grid evaluation for the brute-force oracle ---------------------------

    def grid_axis_names(self):
        names = []
        if self.k == 2:
            names.append("pi1")
        names += [f"mu{j + 1}" for j in range(self.k)]
        names += ["var"] + [f"var{j + 1}" for j in range(self.k)]
        return names

    def params_from_grid(self, names, point, base: ParamVec) -> ParamVec:
        w = self.weights(base).copy()
        mu = self.means(base).copy()
        var = self.variances(base).copy()
        for name, v in zip(names, point):
            if name == "pi1":
                if self.k != 2:
                    raise ConfigurationError("pi1 grid axis needs K=2")
                w = np.array([v, 1.0 - v])
            elif name == "var":
                var[:] = v
            elif name.startswith("mu"):
                mu[int(name[2:]) - 1] = v
            elif name.startswith("var"):
                var[int(name[3:]) - 1] = v
            else:
                raise ConfigurationError(f"unknown grid axis {name!r}")
        return self.make_params(w, mu, var)

    def grid_log_obs_lik(self, names, points: np.ndarray, base: ParamVec) -> np.ndarray:
        """log p(y | theta) for every grid point (rows of ``points``)."""
        g = points.shape[0]
        w = np.tile(self.weights(base), (g, 1))
        mu = np.tile(self.means(base), (g, 1))
        var = np.tile(self.variances(base), (g, 1))
        for col, name in enumerate(names):
            v = points[:, col]
            if name == "pi1":
                w = np.stack([v, 1.0 - v], axis=1)
            elif name == "var":
                var = np.tile(v[:, None], (1, self.k))
            elif name.startswith("mu"):
                mu[:, int(name[2:]) - 1] = v
            elif name.startswith("var"):
                var[:, int(name[3:]) - 1] = v
            else:
                raise ConfigurationError(f"unknown grid axis {name!r}")
        d = self.data[None, :, None] - mu[:, None, :]
        logp = np.log(w)[:, None, :] - 0.5 * (_LOG_2PI + np.log(var)[:, None, :] + d * d / var[:, None, :])
        m = logp.max(axis=2)
        lse = m + np.log(np.exp(logp - m[:, :, None]).sum(axis=2))
        return lse.sum(axis=1)
