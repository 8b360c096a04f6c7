"""Deterministic EM variants: GEM, CEM, Aitken, AEM, ECM, ECME, SAGE,
incremental and sparse EM.  Each exists both as a step function and as a
driver usable by :func:`emkit.core.run_fit`.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize_scalar

from ..diagnostics import fd_hessian
from ..errors import ConfigurationError, DegenerateComponentError
from ..model import LatentModel
from ..params import ParamVec
from .base import Driver

WEIGHT_EPS = 1e-9
VAR_EPS = 1e-9


# --------------------------------------------------------------------------
# plain EM
# --------------------------------------------------------------------------


class EmDriver(Driver):
    tag = "em"

    def step(self, theta, n):
        return self.model.m_step(self.model.e_stats(theta)), {}


# --------------------------------------------------------------------------
# GEM: coordinate ascent on the auxiliary function
# --------------------------------------------------------------------------


def _free_bounds(model, free: np.ndarray):
    """Feasibility box per free coordinate, used by the 1-D maximizers."""
    kinds = model.free_coord_kinds()
    data = model.data
    span = float(data.max() - data.min()) + 1.0
    scale = float(np.var(data)) + span * span
    bounds = []
    for i, kind in enumerate(kinds):
        if kind == "weight":
            others = sum(free[j] for j, k in enumerate(kinds) if k == "weight" and j != i)
            bounds.append((WEIGHT_EPS, max(2 * WEIGHT_EPS, 1.0 - others - WEIGHT_EPS)))
        elif kind == "mean":
            bounds.append((float(data.min()) - span, float(data.max()) + span))
        elif kind in ("var", "latent_var"):
            bounds.append((VAR_EPS, 10.0 * scale))
        elif kind == "rate":
            bounds.append((VAR_EPS, float(data.max()) + 10.0 * (float(data.mean()) + 1.0)))
        else:
            raise ConfigurationError(f"unknown coordinate kind {kind!r}")
    return bounds


def gem_step(model: LatentModel, theta: ParamVec, ascent_passes: int):
    """One generalized-EM step: increase Q(. | theta) by coordinate ascent.

    Returns ``(theta_next, stalled)``; ``stalled`` is True when no coordinate
    improved the auxiliary function.
    """
    q_ref = lambda u: model.q_function(model.from_free(u), theta)
    u = model.free_params(theta).copy()
    q_cur = q_ref(u)
    improved = False
    for _ in range(ascent_passes):
        for i in range(u.size):
            lo, hi = _free_bounds(model, u)[i]

            def neg(t, i=i):
                v = u.copy()
                v[i] = t
                try:
                    return -q_ref(v)
                except Exception:
                    return np.inf

            res = minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
            if res.success and -res.fun > q_cur:
                u[i] = float(res.x)
                q_cur = -res.fun
                improved = True
    return model.from_free(u), not improved


class GemDriver(Driver):
    tag = "gem"
    OPTIONS = {"gem_ascent_steps": None}

    def step(self, theta, n):
        passes = self.options["gem_ascent_steps"]
        if passes is None:  # exact ascent: the full M-step
            return self.model.m_step(self.model.e_stats(theta)), {}
        theta_next, stalled = gem_step(self.model, theta, int(passes))
        return theta_next, ({"note": "stalled"} if stalled else {})


# --------------------------------------------------------------------------
# CEM: classify-then-maximize
# --------------------------------------------------------------------------


def cem_step(model: LatentModel, theta: ParamVec):
    """Hard-assignment step; returns (theta_next, labels)."""
    labels = model.classify(theta)
    return model.m_step(model.stats_from_labels(labels)), labels


class CemDriver(Driver):
    tag = "cem"

    def step(self, theta, n):
        theta_next, labels = cem_step(self.model, theta)
        return theta_next, {"cem_objective": self.model.log_comp_lik(labels, theta_next)}


# --------------------------------------------------------------------------
# Aitken acceleration
# --------------------------------------------------------------------------


def aitken_step(model: LatentModel, theta: ParamVec, guard_slack: float = 1e-6):
    """Accelerated update theta + S^{-1}(Phi(theta) - theta).

    Falls back to the plain EM step (with a note) whenever the observed-data
    information is singular/indefinite or the accelerated step decreases the
    log-likelihood by more than ``guard_slack``.
    """
    theta_star = model.m_step(model.e_stats(theta))
    u = model.free_params(theta)
    try:
        J_y = -fd_hessian(lambda v: model.log_obs_lik(model.from_free(v)), u)
        np.linalg.cholesky((J_y + J_y.T) / 2)  # demand positive definiteness
        Jz = -fd_hessian(lambda v: model.q_function(model.from_free(v), theta), u)
        s_inv = np.linalg.solve(J_y, Jz)
        u_next = u + s_inv @ (model.free_params(theta_star) - u)
        theta_next = model.from_free(u_next)
        model.check(theta_next)
        if model.log_obs_lik(theta_next) < model.log_obs_lik(theta) - guard_slack:
            return theta_star, "aitken-guard: likelihood decreased, plain EM step taken"
        return theta_next, ""
    except (np.linalg.LinAlgError, FloatingPointError, Exception) as exc:
        if isinstance(exc, KeyboardInterrupt):
            raise
        return theta_star, f"aitken-fallback: {type(exc).__name__}"


class AitkenDriver(Driver):
    tag = "aitken"
    OPTIONS = {"guard_slack": 1e-6}

    def step(self, theta, n):
        theta_next, note = aitken_step(self.model, theta, self.options["guard_slack"])
        return theta_next, ({"note": note} if note else {})


# --------------------------------------------------------------------------
# AEM: conjugate-gradient composition of generalized gradients
# --------------------------------------------------------------------------


class AemState:
    __slots__ = ("prev_grad", "prev_dir")

    def __init__(self):
        self.prev_grad = None
        self.prev_dir = None


def _max_feasible_lambda(model, u, d, cap: float = 8.0) -> float:
    kinds = model.free_coord_kinds()
    lam = cap
    weight_idx = [i for i, k in enumerate(kinds) if k == "weight"]
    for i, kind in enumerate(kinds):
        lo = WEIGHT_EPS if kind == "weight" else (VAR_EPS if kind in ("var", "latent_var", "rate") else None)
        if lo is not None and d[i] < 0:
            lam = min(lam, (lo - u[i]) / d[i])
    if weight_idx:
        dw = sum(d[i] for i in weight_idx)
        if dw > 0:
            lam = min(lam, (1.0 - WEIGHT_EPS - sum(u[i] for i in weight_idx)) / dw)
    return max(lam, 0.0)


def _golden_max(f, lo: float, hi: float, tol: float, max_iter: int):
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = f(d)
    return (c, fc) if fc > fd else (d, fd)


def aem_step(model: LatentModel, theta: ParamVec, state: AemState, line_tol: float = 1e-6, max_bracket: int = 60):
    """Conjugate-gradient accelerated EM step with a line maximization of L.

    The generalized gradient is Phi(theta) - theta; directions are composed
    with the Polak-Ribiere rule.  The line search keeps L non-decreasing; on
    failure the direction history is reset to steepest (the EM direction).
    """
    phi_theta = model.m_step(model.e_stats(theta))
    u = model.free_params(theta)
    g = model.free_params(phi_theta) - u

    d = g.copy()
    if state.prev_grad is not None:
        denom = float(state.prev_grad @ state.prev_grad)
        if denom > 0:
            beta = max(0.0, float(g @ (g - state.prev_grad)) / denom)
            d = g + beta * state.prev_dir

    def l_at(lam: float) -> float:
        try:
            cand = model.from_free(u + lam * d)
            model.check(cand)
            return model.log_obs_lik(cand)
        except Exception:
            return -np.inf

    l0 = model.log_obs_lik(theta)
    lam_hi = _max_feasible_lambda(model, u, d)
    best_lam, best_val = 0.0, l0
    if lam_hi > 0:
        lam, val = _golden_max(l_at, 0.0, lam_hi, line_tol, max_bracket)
        if val > best_val:
            best_lam, best_val = lam, val
    if best_lam == 0.0 or best_val < model.log_obs_lik(phi_theta):
        # bracket failure or worse than the plain EM point: restart steepest
        state.prev_grad, state.prev_dir = None, None
        return phi_theta, state, "aem-restart"
    state.prev_grad, state.prev_dir = g, d
    return model.from_free(u + best_lam * d), state, ""


class AemDriver(Driver):
    tag = "aem"
    OPTIONS = {
        "aem_line_tol": 1e-6,
        "aem_max_bracket": 60,
        "aem_force_unit_step": False,
        "aem_reset_history": False,
    }

    def __init__(self, model, options, rng):
        super().__init__(model, options, rng)
        self.state = AemState()

    def step(self, theta, n):
        if self.options["aem_force_unit_step"] and self.options["aem_reset_history"]:
            # degenerate configuration: exactly the plain EM step
            return self.model.m_step(self.model.e_stats(theta)), {}
        theta_next, self.state, note = aem_step(
            self.model, theta, self.state, self.options["aem_line_tol"], self.options["aem_max_bracket"]
        )
        return theta_next, ({"note": note} if note else {})


# --------------------------------------------------------------------------
# ECM / ECME / SAGE
# --------------------------------------------------------------------------


def _default_blocks(model) -> list:
    return model.param_template().block_names()


def ecm_step(model: LatentModel, theta: ParamVec, blocks=None) -> ParamVec:
    """Chain of CM-steps, one lower-dimensional Q-maximization per block."""
    stats = model.e_stats(theta)
    out = theta
    for block in blocks or _default_blocks(model):
        out = model.cm_step(stats, out, block)
    return out


class EcmDriver(Driver):
    tag = "ecm"
    OPTIONS = {"blocks": None}

    def step(self, theta, n):
        blocks = self.options["blocks"]
        if blocks == ["all"] or blocks == ("all",):
            return self.model.m_step(self.model.e_stats(theta)), {}
        return ecm_step(self.model, theta, blocks), {}


def _ecme_weight_newton(model, theta: ParamVec, max_halvings: int = 30):
    """One-step Newton-Raphson on mixing weights against L itself.

    Weights are parameterized by their first K-1 coordinates; the step is
    halved until L does not decrease and the simplex stays respected.
    """
    k = model.k
    if k < 2 or getattr(model, "fixed_weights", None) is not None:
        return theta, False
    w = model.weights(theta)
    dens = np.exp(model.log_joint_matrix(theta) - np.log(w)[None, :])  # f_k(y_i)
    p = dens @ w
    diff = dens[:, :-1] - dens[:, -1:]
    grad = (diff / p[:, None]).sum(axis=0)
    hess = -(diff / p[:, None]).T @ (diff / p[:, None])
    try:
        delta = -np.linalg.solve(hess, grad)
    except np.linalg.LinAlgError:
        return theta, False
    l0 = model.log_obs_lik(theta)
    for _ in range(max_halvings + 1):
        w_new = w.copy()
        w_new[:-1] = w[:-1] + delta
        w_new[-1] = 1.0 - w_new[:-1].sum()
        if np.all(w_new > 0) and np.all(w_new < 1):
            cand = theta.with_block("weights", w_new)
            try:
                model.check(cand)
                if model.log_obs_lik(cand) >= l0:
                    return cand, True
            except Exception:
                pass
        delta = delta / 2.0
    return theta, False


def ecme_step(model: LatentModel, theta: ParamVec) -> ParamVec:
    """Q-based CM-steps on the component blocks, then an L-based weight step.

    The L-step runs last; starting with the Q-maximizations is what keeps the
    observed-data likelihood monotone.
    """
    stats = model.e_stats(theta)
    out = theta
    for block in _default_blocks(model):
        if block != "weights":
            out = model.cm_step(stats, out, block)
    out = model.cm_step(stats, out, "weights")  # baseline Q-update first
    out, _ = _ecme_weight_newton(model, out)
    return out


class EcmeDriver(Driver):
    tag = "ecme"

    def step(self, theta, n):
        return ecme_step(self.model, theta), {}


def sage_cycle(model: LatentModel, theta: ParamVec, block: str) -> ParamVec:
    """One SAGE cycle: refresh the E-step at theta, maximize Q over one block."""
    if block == "all":
        return model.m_step(model.e_stats(theta))
    return model.cm_step(model.e_stats(theta), theta, block)


class SageDriver(Driver):
    tag = "sage"
    OPTIONS = {"sage_cycle_order": None}

    def step(self, theta, n):
        order = self.options["sage_cycle_order"] or _default_blocks(self.model)
        if list(order) == ["all"]:
            return self.model.m_step(self.model.e_stats(theta)), {}
        out = theta
        for block in order:
            out = sage_cycle(self.model, out, block)
        return out, {}


# --------------------------------------------------------------------------
# incremental EM
# --------------------------------------------------------------------------


def incremental_em_step(model: LatentModel, theta: ParamVec, cursor: int, cache: np.ndarray, batch: int):
    """Partial E-step on one item batch, then a full M-step on cached stats.

    ``cache`` holds the per-item responsibility rows from the last visit.
    Returns ``(theta_next, cursor_next, cache)``.
    """
    n = model.n_items
    batch = min(batch, n)
    if batch == n:
        cache = model.e_stats(theta).resp
        cursor_next = 0
    else:
        idx = (cursor + np.arange(batch)) % n
        logj = model.log_joint_matrix(theta, items=idx)
        m = logj.max(axis=1, keepdims=True)
        rows = np.exp(logj - m)
        cache = cache.copy()
        cache[idx] = rows / rows.sum(axis=1, keepdims=True)
        cursor_next = int((cursor + batch) % n)
    return model.m_step(model.stats_from_resp(cache)), cursor_next, cache


class IncrementalDriver(Driver):
    tag = "incremental"
    OPTIONS = {"incremental_batch": 1}

    def __init__(self, model, options, rng):
        super().__init__(model, options, rng)
        self.cache = None
        self.cursor = 0

    def step(self, theta, n):
        if self.cache is None:
            # first visit: one full pass seeds the per-item cache
            self.cache = self.model.e_stats(theta).resp
            return self.model.m_step(self.model.stats_from_resp(self.cache)), {}
        theta_next, self.cursor, self.cache = incremental_em_step(
            self.model, theta, self.cursor, self.cache, int(self.options["incremental_batch"])
        )
        return theta_next, {}


# --------------------------------------------------------------------------
# sparse EM
# --------------------------------------------------------------------------


class SparseState:
    __slots__ = ("resp", "plausible", "since_refresh", "eval_count")

    def __init__(self):
        self.resp = None
        self.plausible = None
        self.since_refresh = 0
        self.eval_count = 0


def sparse_em_step(model: LatentModel, theta: ParamVec, state: SparseState, threshold: float, refresh_period: int):
    """Sparse E-step: responsibilities below the threshold stay frozen at
    their last refreshed values; plausible entries are renormalized over the
    remaining mass.  A full refresh happens every ``refresh_period`` steps.
    """
    n, k = model.n_items, model.k
    refresh = state.resp is None or state.since_refresh >= refresh_period
    if refresh:
        state.resp = model.e_stats(theta).resp
        state.eval_count += n * k
        plausible = state.resp >= threshold
        empty = ~plausible.any(axis=1)
        plausible[empty, :] = True  # never freeze a whole row
        state.plausible = plausible
        state.since_refresh = 1
    elif state.plausible.all():
        # tau = 0 degenerate configuration: plain EM, full evaluation
        state.resp = model.e_stats(theta).resp
        state.eval_count += n * k
        state.since_refresh += 1
    else:
        resp = state.resp.copy()
        patterns = {}
        for i in range(n):
            patterns.setdefault(state.plausible[i].tobytes(), []).append(i)
        for key, items in patterns.items():
            comps = np.where(np.frombuffer(key, dtype=bool))[0]
            if comps.size == 0:
                continue
            sub = model.log_joint_matrix(theta, items=np.array(items), comps=comps)
            state.eval_count += len(items) * comps.size
            m = sub.max(axis=1, keepdims=True)
            p = np.exp(sub - m)
            p /= p.sum(axis=1, keepdims=True)
            frozen_mass = 1.0 - state.resp[np.array(items)][:, comps].sum(axis=1)
            resp[np.ix_(items, comps)] = (1.0 - frozen_mass)[:, None] * p
        state.resp = resp
        state.since_refresh += 1
    return model.m_step(model.stats_from_resp(state.resp)), state


class SparseDriver(Driver):
    tag = "sparse"
    OPTIONS = {"sparse_threshold": 1e-3, "sparse_refresh_period": 5}

    def __init__(self, model, options, rng):
        super().__init__(model, options, rng)
        self.state = SparseState()
        tau = self.options["sparse_threshold"]
        if not 0.0 <= tau <= 1.0:
            raise ConfigurationError("sparse_threshold must lie in [0, 1]")
        if self.options["sparse_refresh_period"] < 1:
            raise ConfigurationError("sparse_refresh_period must be >= 1")

    def step(self, theta, n):
        theta_next, self.state = sparse_em_step(
            self.model,
            theta,
            self.state,
            float(self.options["sparse_threshold"]),
            int(self.options["sparse_refresh_period"]),
        )
        return theta_next, {"resp_evals": self.state.eval_count}
