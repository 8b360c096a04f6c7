"""Generic fit loop shared by every variant: run_fit, em_map, FitTrace."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateComponentError,
    InvalidParameterError,
)
from .model import LatentModel
from .params import ParamVec, StoppingRule
from .rng import RngStream

STATUS_CONVERGED = "converged"
STATUS_MAX_ITERS = "max-iters"
STATUS_DIVERGED = "diverged"
STATUS_INVALID = "invalid-param"


@dataclass(frozen=True)
class VariantConfig:
    """Names a fit driver plus its variant-specific options.

    Options are validated against the driver's declared option set; an
    option irrelevant to the chosen variant is a configuration error.
    """

    variant: str = "em"
    options: dict = field(default_factory=dict)


@dataclass
class IterationRecord:
    n: int
    theta: ParamVec
    loglik: float
    q_delta: float | None = None
    wall_time: float = 0.0
    rng_counter: int = 0
    note: str = ""


@dataclass
class StationaryEstimate:
    """Post-burn-in summary of a stochastic chain."""

    burn_in: int
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def from_records(cls, records, burn_in: int) -> "StationaryEstimate":
        if burn_in >= len(records):
            raise ValueError("burn_in must be smaller than the iteration count")
        tail = np.stack([r.theta.values for r in records[burn_in:]])
        return cls(burn_in=burn_in, mean=tail.mean(axis=0), std=tail.std(axis=0))


@dataclass
class FitTrace:
    records: list
    status: str
    variant: str
    seed: int
    stationary: StationaryEstimate | None = None

    @property
    def n_iters(self) -> int:
        return self.records[-1].n

    @property
    def final_params(self) -> ParamVec:
        return self.records[-1].theta

    @property
    def final_loglik(self) -> float:
        return self.records[-1].loglik

    def logliks(self) -> np.ndarray:
        return np.array([r.loglik for r in self.records])

    def thetas(self) -> np.ndarray:
        return np.stack([r.theta.values for r in self.records])


def em_map(model: LatentModel, theta: ParamVec) -> ParamVec:
    """One exact EM update: the fixed-point map whose limits are the MLEs."""
    model.check(theta)
    return model.m_step(model.e_stats(theta))


def run_fit(
    model: LatentModel,
    config: VariantConfig,
    theta0: ParamVec,
    stop: StoppingRule | None = None,
    seed: int = 0,
) -> FitTrace:
    """Run one seeded fit and record every iterate.

    Identical (model, config, theta0, stop, seed) inputs reproduce the trace
    bit for bit.  Non-finite likelihoods and collapsed components end the
    trace with status ``diverged`` rather than raising.
    """
    from .variants import make_driver  # deferred: variants import core types

    stop = stop or StoppingRule()
    model.check(theta0)  # precondition: raises InvalidParameterError
    rng = RngStream(seed)
    driver = make_driver(model, config, rng)

    t0 = time.perf_counter()
    loglik = model.log_obs_lik(theta0)
    if not np.isfinite(loglik):
        raise InvalidParameterError("log-likelihood not finite at theta0")
    records = [IterationRecord(0, theta0.copy(), loglik, wall_time=0.0, rng_counter=rng.counter)]
    status = STATUS_MAX_ITERS
    theta = theta0

    for n in range(1, stop.max_iters + 1):
        try:
            theta_next, info = driver.step(theta, n)
            model.check(theta_next)
            loglik_next = model.log_obs_lik(theta_next)
        except (DegenerateComponentError, FloatingPointError) as exc:
            records[-1].note = (records[-1].note + f" [{exc}]").strip()
            status = STATUS_DIVERGED
            break
        except InvalidParameterError as exc:
            records[-1].note = (records[-1].note + f" [{exc}]").strip()
            status = STATUS_INVALID
            break
        if not np.isfinite(loglik_next):
            status = STATUS_DIVERGED
            break
        records.append(
            IterationRecord(
                n,
                theta_next,
                loglik_next,
                q_delta=info.get("q_delta"),
                wall_time=time.perf_counter() - t0,
                rng_counter=rng.counter,
                note=info.get("note", ""),
            )
        )
        if stop.satisfied(loglik_next - loglik, theta.sup_distance(theta_next)):
            status = STATUS_CONVERGED
            theta = theta_next
            break
        theta, loglik = theta_next, loglik_next

    trace = FitTrace(records=records, status=status, variant=config.variant, seed=seed)
    if getattr(driver, "stochastic", False) and len(records) > 1:
        burn = driver.burn_in(len(records))
        trace.stationary = StationaryEstimate.from_records(records, burn)
    return trace
