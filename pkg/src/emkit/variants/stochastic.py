"""Stochastic EM variants: SEM, DA (Gibbs), the EM/SEM hybrid, MCEM and the
stochastic-approximation recursion with exact or Metropolis-Hastings
simulation kernels.

Every driver draws from per-(purpose, iteration) substreams of the fit's
seed, so a chain can be replayed from any iteration and variants sharing a
substream layout reduce to one another bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, DegenerateComponentError
from ..model import LatentModel
from ..params import ParamVec
from .base import Driver

RESAMPLE_TRIES = 10
MH_REJECTION_WARN = 10_000


@dataclass(frozen=True)
class AnnealingSchedule:
    """Step-size sequence gamma_n in [0, 1] plus a Monte Carlo sample count.

    Built-in kinds: ``constant`` (gamma = value), ``harmonic`` (1/n),
    ``power`` (gamma = 1 for n <= delay, then (n - delay)^-exponent), and
    ``table`` (explicit values, last entry repeated).
    """

    kind: str = "harmonic"
    value: float = 1.0
    exponent: float = 0.7
    delay: int = 0
    table: tuple = ()
    m_value: int = 1
    m_growth: str = "constant"  # or "quadratic"

    def __post_init__(self):
        if self.kind not in ("constant", "harmonic", "power", "table"):
            raise ConfigurationError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "constant" and not 0.0 <= self.value <= 1.0:
            raise ConfigurationError("constant gamma must lie in [0, 1]")
        if self.kind == "power" and self.exponent <= 0:
            raise ConfigurationError("power exponent must be positive")
        if self.kind == "table" and any(not 0.0 <= g <= 1.0 for g in self.table):
            raise ConfigurationError("table gammas must lie in [0, 1]")
        if self.m_value < 1:
            raise ConfigurationError("m must be >= 1")

    def gamma(self, n: int) -> float:
        if self.kind == "constant":
            return self.value
        if self.kind == "harmonic":
            return 1.0 / n
        if self.kind == "power":
            return 1.0 if n <= self.delay else float(n - self.delay) ** (-self.exponent)
        return float(self.table[min(n - 1, len(self.table) - 1)])

    def m(self, n: int) -> int:
        if self.m_growth == "quadratic":
            return self.m_value * n * n
        return self.m_value

    def is_convergent(self) -> bool:
        """Whether gamma_n -> 0, sum gamma_n = inf and gamma_n/gamma_{n+1} -> 1."""
        if self.kind == "harmonic":
            return True
        if self.kind == "power":
            return 0.0 < self.exponent <= 1.0
        return False


SAEM_DEFAULT = AnnealingSchedule(kind="harmonic")
SAEM2_DEFAULT = AnnealingSchedule(kind="power", exponent=0.7, delay=50, m_value=1)


# --------------------------------------------------------------------------
# step functions
# --------------------------------------------------------------------------


def _draw_labels(model, theta, gen) -> np.ndarray:
    return model.sample_posterior(theta, gen)


def sem_step(model: LatentModel, theta: ParamVec, gen: np.random.Generator) -> ParamVec:
    """Simulation step (posterior label draw) then hard-label M-step.

    The update reads only (theta, fresh randomness): the chain is Markov by
    construction.  Degenerate draws are resampled up to RESAMPLE_TRIES times.
    """
    last_exc = None
    for _ in range(RESAMPLE_TRIES):
        labels = _draw_labels(model, theta, gen)
        try:
            return model.m_step(model.stats_from_labels(labels))
        except DegenerateComponentError as exc:
            last_exc = exc
    raise last_exc


def da_step(model: LatentModel, theta: ParamVec, gen_labels, gen_params) -> ParamVec:
    """Gibbs sweep: z ~ p(z | y, theta), then theta ~ p(theta | z, y)."""
    last_exc = None
    for _ in range(RESAMPLE_TRIES):
        labels = _draw_labels(model, theta, gen_labels)
        try:
            return model.posterior_param_draw(labels, gen_params)
        except DegenerateComponentError as exc:
            last_exc = exc
    raise last_exc


def saem_hybrid_step(model: LatentModel, theta: ParamVec, gamma: float, gen) -> ParamVec:
    """Convex combination of the exact EM step and the SEM step."""
    theta_em = model.m_step(model.e_stats(theta))
    if gamma == 0.0:
        return theta_em
    theta_sem = sem_step(model, theta, gen)
    if gamma == 1.0:
        return theta_sem
    return theta.with_values((1.0 - gamma) * theta_em.values + gamma * theta_sem.values)


def mcem_step(model: LatentModel, theta: ParamVec, m: int, gen) -> ParamVec:
    """M-step on the average of m hard-label statistics (m = 1 is SEM)."""
    if m < 1:
        raise ConfigurationError("mcem needs m >= 1")
    last_exc = None
    for _ in range(RESAMPLE_TRIES):
        resp = np.zeros((model.n_items, model.k))
        for _j in range(m):
            labels = _draw_labels(model, theta, gen)
            resp[np.arange(model.n_items), labels] += 1.0
        try:
            return model.m_step(model.stats_from_resp(resp / m))
        except DegenerateComponentError as exc:
            last_exc = exc
    raise last_exc


def mh_label_chain(model, theta, labels, n_steps, gen, record=False):
    """Single-site Metropolis-Hastings chain targeting p(z | y, theta).

    Proposes a uniform item and a uniform replacement label per step.
    Returns (labels, n_accepted, history) where history stacks the label
    vector after every step when ``record`` is set.
    """
    logj = model.log_joint_matrix(theta)
    labels = labels.copy()
    n, k = logj.shape
    items = gen.integers(0, n, size=n_steps)
    props = gen.integers(0, k, size=n_steps)
    us = gen.random(n_steps)
    accepted = 0
    history = np.empty((n_steps, n), dtype=labels.dtype) if record else None
    for t in range(n_steps):
        i = items[t]
        new = props[t]
        if logj[i, new] - logj[i, labels[i]] >= np.log(us[t]):
            labels[i] = new
            accepted += 1
        if record:
            history[t] = labels
    return labels, accepted, history


class Saem2State:
    __slots__ = ("resp", "mh_labels", "consecutive_rejections", "warned")

    def __init__(self):
        self.resp = None
        self.mh_labels = None
        self.consecutive_rejections = 0
        self.warned = False


def saem2_step(model: LatentModel, state: Saem2State, theta: ParamVec, gamma: float, m: int, kernel: str, gen, mh_steps: int | None = None):
    """Stochastic-approximation recursion on the averaged statistics.

    stats_n = (1 - gamma) stats_{n-1} + (gamma / m) sum_j stats(z^(j));
    the new parameter is the M-step at stats_n.  The simulation kernel is
    either the exact posterior sampler or a Metropolis-Hastings label chain.
    """
    note = ""
    resp_mc = np.zeros((model.n_items, model.k))
    if kernel == "exact":
        for _ in range(m):
            labels = _draw_labels(model, theta, gen)
            resp_mc[np.arange(model.n_items), labels] += 1.0
    elif kernel == "mh":
        if state.mh_labels is None:
            state.mh_labels = model.classify(theta)
        steps = mh_steps or model.n_items
        for _ in range(m):
            state.mh_labels, accepted, _ = mh_label_chain(model, theta, state.mh_labels, steps, gen)
            if accepted == 0:
                state.consecutive_rejections += steps
            else:
                state.consecutive_rejections = 0
            resp_mc[np.arange(model.n_items), state.mh_labels] += 1.0
        if state.consecutive_rejections > MH_REJECTION_WARN and not state.warned:
            state.warned = True
            note = "mh-kernel: acceptance chronically zero"
    else:
        raise ConfigurationError(f"unknown saem2 kernel {kernel!r}")
    resp_mc /= m

    if gamma == 1.0:
        state.resp = resp_mc
    else:
        if state.resp is None:
            state.resp = model.e_stats(theta).resp  # seed the recursion exactly
        state.resp = (1.0 - gamma) * state.resp + gamma * resp_mc
    return model.m_step(model.stats_from_resp(state.resp)), state, note


# --------------------------------------------------------------------------
# drivers
# --------------------------------------------------------------------------


class _StochasticDriver(Driver):
    stochastic = True
    OPTIONS = {"burn_in_frac": 0.25}


class SemDriver(_StochasticDriver):
    tag = "sem"

    def step(self, theta, n):
        return sem_step(self.model, theta, self.rng.labels(n)), {}


class DaDriver(_StochasticDriver):
    tag = "da"

    def step(self, theta, n):
        return da_step(self.model, theta, self.rng.labels(n), self.rng.params(n)), {}


class SaemDriver(_StochasticDriver):
    tag = "saem"
    OPTIONS = {**_StochasticDriver.OPTIONS, "schedule": None}

    def step(self, theta, n):
        sched = self.options["schedule"] or SAEM_DEFAULT
        return saem_hybrid_step(self.model, theta, sched.gamma(n), self.rng.labels(n)), {}


class McemDriver(_StochasticDriver):
    tag = "mcem"
    OPTIONS = {**_StochasticDriver.OPTIONS, "m": 1, "m_schedule": None}

    def step(self, theta, n):
        sched = self.options["m_schedule"]
        m = sched.m(n) if sched is not None else int(self.options["m"])
        return mcem_step(self.model, theta, m, self.rng.labels(n)), {}


class Saem2Driver(_StochasticDriver):
    tag = "saem2"
    OPTIONS = {**_StochasticDriver.OPTIONS, "schedule": None, "kernel": "exact", "mh_steps": None}

    def __init__(self, model, options, rng):
        super().__init__(model, options, rng)
        self.state = Saem2State()

    def step(self, theta, n):
        sched = self.options["schedule"] or SAEM2_DEFAULT
        gen = self.rng.labels(n) if self.options["kernel"] == "exact" else self.rng.kernel(n)
        theta_next, self.state, note = saem2_step(
            self.model,
            self.state,
            theta,
            sched.gamma(n),
            sched.m(n),
            self.options["kernel"],
            gen,
            self.options["mh_steps"],
        )
        return theta_next, ({"note": note} if note else {})
