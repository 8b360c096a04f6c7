"""Random-effect Gaussian model used by the parameter-expansion demo.

Observation model: y_i = z_i + e_i with latent z_i ~ N(0, v) and noise
e_i ~ N(0, noise_var), noise variance known.  The single parameter is v.
Plain EM on this model is notoriously slow when v is small relative to the
noise, which is exactly what the scale expansion (y_i = a z_i + e_i) fixes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParameterError
from ..model import LatentModel
from ..params import ParamVec

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class LatentScaleStats:
    """Posterior latent moments: sums of E[z_i^2 | y] and y_i E[z_i | y]."""

    sum_ez2: float
    sum_yez: float


class LatentScaleGaussian(LatentModel):
    def __init__(self, data, noise_var: float = 1.0):
        self.data = np.asarray(data, dtype=np.float64)
        self.noise_var = float(noise_var)
        if self.noise_var <= 0:
            raise ValueError("noise_var must be positive")

    @property
    def n_items(self) -> int:
        return self.data.size

    def make_params(self, v: float) -> ParamVec:
        return ParamVec([v], [("var_z", 0, 1)])

    def param_template(self) -> ParamVec:
        return self.make_params(max(float(np.var(self.data)) - self.noise_var, 0.5))

    def var_z(self, theta: ParamVec) -> float:
        return float(theta.values[0])

    def check(self, theta: ParamVec) -> None:
        if len(theta) != 1 or self.var_z(theta) <= 0.0:
            raise InvalidParameterError("latent variance must be a single positive value")

    def log_obs_lik(self, theta: ParamVec) -> float:
        s2 = self.var_z(theta) + self.noise_var
        return float(-0.5 * np.sum(_LOG_2PI + np.log(s2) + self.data**2 / s2))

    def posterior_moments(self, theta: ParamVec):
        """Per-item posterior z_i | y_i ~ N(b y_i, c)."""
        v = self.var_z(theta)
        b = v / (v + self.noise_var)
        c = v * self.noise_var / (v + self.noise_var)
        return b, c

    def e_stats(self, theta: ParamVec) -> LatentScaleStats:
        b, c = self.posterior_moments(theta)
        yy = float(np.sum(self.data**2))
        return LatentScaleStats(sum_ez2=self.n_items * c + b * b * yy, sum_yez=b * yy)

    def m_step(self, stats: LatentScaleStats) -> ParamVec:
        return self.make_params(stats.sum_ez2 / self.n_items)

    def q_function(self, theta: ParamVec, theta_ref: ParamVec) -> float:
        # E[log p(Z | theta) | y, theta_ref] where Z = (z, y); only the
        # N(z; 0, v) factor depends on theta, the noise factor is constant.
        v = self.var_z(theta)
        stats = self.e_stats(theta_ref)
        b, c = self.posterior_moments(theta_ref)
        noise_term = 0.0
        # E[(y_i - z_i)^2] under the reference posterior
        e_res2 = float(np.sum((self.data - b * self.data) ** 2)) + self.n_items * c
        noise_term = -0.5 * self.n_items * (_LOG_2PI + np.log(self.noise_var)) - e_res2 / (2 * self.noise_var)
        return -0.5 * self.n_items * (_LOG_2PI + np.log(v)) - stats.sum_ez2 / (2 * v) + noise_term

    def free_coord_kinds(self):
        return ["latent_var"]

    def free_params(self, theta: ParamVec) -> np.ndarray:
        return theta.values.copy()

    def from_free(self, free: np.ndarray) -> ParamVec:
        return self.make_params(float(free[0]))

    def log_joint_zy(self, z: np.ndarray, y: np.ndarray, v: float, alpha: float = 1.0) -> float:
        """log q(z, y | v, alpha) for the (possibly expanded) complete data."""
        lz = -0.5 * np.sum(_LOG_2PI + np.log(v) + z * z / v)
        r = y - alpha * z
        ly = -0.5 * np.sum(_LOG_2PI + np.log(self.noise_var) + r * r / self.noise_var)
        return float(lz + ly)
