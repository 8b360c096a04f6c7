"""Convergence and information diagnostics, plus the brute-force oracle.

Everything here is an executable check: auxiliary-function values, the
Jensen bound, Kullback residuals, free energy, the speed matrix with its
fraction-of-missing-information reading, score/Fisher identities, and an
exhaustive grid search used as an independent verification oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import em_map
from .errors import ConfigurationError
from .model import LatentModel
from .params import ParamVec

FD_REL_STEP = 1e-4
RICHARDSON_TOL = 1e-3


# --------------------------------------------------------------------------
# finite differences
# --------------------------------------------------------------------------


def _steps(x: np.ndarray, rel_step: float) -> np.ndarray:
    return rel_step * np.maximum(1.0, np.abs(x))


def fd_gradient(f, x: np.ndarray, rel_step: float = FD_REL_STEP) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    h = _steps(x, rel_step)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        g[i] = (f(x + e) - f(x - e)) / (2 * h[i])
    return g


def fd_jacobian(f, x: np.ndarray, rel_step: float = FD_REL_STEP) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    h = _steps(x, rel_step)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h[i]))
    return np.stack(cols, axis=1)


def _fd_hessian_once(f, x: np.ndarray, h: np.ndarray) -> np.ndarray:
    n = x.size
    H = np.empty((n, n))
    f0 = f(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        H[i, i] = (f(x + ei) - 2 * f0 + f(x - ei)) / h[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (
                4 * h[i] * h[j]
            )
    return H


def fd_hessian(f, x: np.ndarray, rel_step: float = FD_REL_STEP) -> np.ndarray:
    """Central-difference Hessian with Richardson refinement where the
    half-step estimate disagrees by more than RICHARDSON_TOL relatively."""
    x = np.asarray(x, dtype=np.float64)
    h = _steps(x, rel_step)
    H1 = _fd_hessian_once(f, x, h)
    H2 = _fd_hessian_once(f, x, h / 2)
    disagree = np.abs(H1 - H2) > RICHARDSON_TOL * (np.abs(H2) + 1e-12)
    refined = (4.0 * H2 - H1) / 3.0
    return np.where(disagree, refined, H2)


# --------------------------------------------------------------------------
# auxiliary-function machinery
# --------------------------------------------------------------------------


def q_function(model: LatentModel, theta: ParamVec, theta_ref: ParamVec) -> float:
    """Q(theta | theta_ref): expected complete-data log-likelihood."""
    model.check(theta)
    model.check(theta_ref)
    return model.q_function(theta, theta_ref)


def jensen_gap(model: LatentModel, theta: ParamVec, theta_ref: ParamVec):
    """Return (L(theta) - L(theta_ref), Q(theta|theta_ref) - Q(theta_ref|theta_ref)).

    The auxiliary bound guarantees lhs >= rhs (up to roundoff).
    """
    lhs = model.log_obs_lik(theta) - model.log_obs_lik(theta_ref)
    rhs = model.q_function(theta, theta_ref) - model.q_function(theta_ref, theta_ref)
    return lhs, rhs


def kl_posterior(model: LatentModel, theta_ref: ParamVec, theta: ParamVec) -> float:
    """KL divergence between the label posteriors at theta_ref and theta."""
    r_ref = model.e_stats(theta_ref).resp
    r = model.e_stats(theta).resp
    mask = r_ref > 0
    return float(np.sum(r_ref[mask] * (np.log(r_ref[mask]) - np.log(r[mask]))))


def entropy(q: np.ndarray) -> float:
    mask = q > 0
    return float(-np.sum(q[mask] * np.log(q[mask])))


def free_energy(model: LatentModel, theta: ParamVec, q: np.ndarray) -> float:
    """E_q[log p(Z, y | theta)] + H(q); equals L(theta) - KL(q || posterior)."""
    rows = q.sum(axis=1)
    if np.max(np.abs(rows - 1.0)) > 1e-10:
        raise ValueError("q rows must sum to 1")
    return float(np.sum(q * model.log_joint_matrix(theta))) + entropy(q)


def proximal_objective(model: LatentModel, theta: ParamVec, theta_n: ParamVec) -> float:
    """L(theta) minus the KL proximity penalty anchored at theta_n."""
    return model.log_obs_lik(theta) - kl_posterior(model, theta_n, theta)


# --------------------------------------------------------------------------
# speed matrix / fraction of missing information
# --------------------------------------------------------------------------


@dataclass
class SpeedDiagnostics:
    S: np.ndarray
    J_y: np.ndarray
    Jz_bar: np.ndarray
    F_post: np.ndarray
    phi_jacobian: np.ndarray
    global_speed: float  # min |eigenvalue| of S
    predicted_rate: float  # max |eigenvalue| of I - S
    eigenvalues: np.ndarray
    info_identity_residual: float  # relative residual of Jz = J_y + F_post
    cross_check_rel_error: float  # entrywise S vs I - dPhi/dtheta


def speed_matrix(model: LatentModel, theta_hat: ParamVec, residual_tol: float = 1e-6) -> SpeedDiagnostics:
    """Speed matrix at a fixed point via finite-difference information matrices.

    Requires ``theta_hat`` to be near a fixed point of the EM map (sup-norm
    residual at most ``residual_tol``).
    """
    resid = em_map(model, theta_hat).sup_distance(theta_hat)
    if resid > residual_tol:
        raise ValueError(f"theta_hat is not a fixed point (residual {resid:.3g} > {residual_tol:.3g})")

    u_hat = model.free_params(theta_hat)
    J_y = -fd_hessian(lambda u: model.log_obs_lik(model.from_free(u)), u_hat)
    Jz_bar = -fd_hessian(lambda u: model.q_function(model.from_free(u), theta_hat), u_hat)

    resp_hat = model.e_stats(theta_hat).resp

    def posterior_cross_entropy(u):
        r = model.e_stats(model.from_free(u)).resp
        mask = resp_hat > 0
        return float(np.sum(resp_hat[mask] * np.log(r[mask])))

    F_post = -fd_hessian(posterior_cross_entropy, u_hat)

    eigs_jz = np.linalg.eigvalsh((Jz_bar + Jz_bar.T) / 2)
    if np.min(np.abs(eigs_jz)) < 1e-10 * max(1.0, np.max(np.abs(eigs_jz))):
        bad = np.where(np.abs(eigs_jz) < 1e-10 * max(1.0, np.max(np.abs(eigs_jz))))[0]
        raise np.linalg.LinAlgError(f"expected complete-data information is singular along directions {bad.tolist()}")
    S = np.linalg.solve(Jz_bar, J_y)

    phi_jac = fd_jacobian(lambda u: model.free_params(em_map(model, model.from_free(u))), u_hat)

    identity_res = np.max(np.abs(Jz_bar - J_y - F_post)) / max(1.0, np.max(np.abs(Jz_bar)))
    alt = np.eye(len(u_hat)) - phi_jac
    big = np.abs(S) > 1e-6
    cross = float(np.max(np.abs(S[big] - alt[big]) / np.abs(S[big]))) if big.any() else 0.0

    eigs = np.linalg.eigvals(S)
    return SpeedDiagnostics(
        S=S,
        J_y=J_y,
        Jz_bar=Jz_bar,
        F_post=F_post,
        phi_jacobian=phi_jac,
        global_speed=float(np.min(np.abs(eigs))),
        predicted_rate=float(np.max(np.abs(np.linalg.eigvals(np.eye(len(u_hat)) - S)))),
        eigenvalues=eigs,
        info_identity_residual=float(identity_res),
        cross_check_rel_error=cross,
    )


def observed_rate(thetas: np.ndarray, theta_hat: np.ndarray, window: int = 20, floor: float = 1e-11) -> float:
    """Per-iteration error contraction ratio estimated from an iterate path.

    Least-squares slope of log sup-norm error over the last ``window``
    iterations whose error is still above the noise floor.
    """
    errs = np.max(np.abs(thetas - theta_hat[None, :]), axis=1)
    idx = np.where(errs > floor)[0]
    if idx.size < 3:
        raise ValueError("not enough pre-convergence iterations to estimate a rate")
    idx = idx[-window:]
    slope = np.polyfit(idx.astype(float), np.log(errs[idx]), 1)[0]
    return float(np.exp(slope))


# --------------------------------------------------------------------------
# score / Fisher identities (Monte Carlo over simulated datasets)
# --------------------------------------------------------------------------


@dataclass
class ScoreFisherReport:
    n_mc: int
    mean_score: np.ndarray
    score_se: np.ndarray
    fisher_mc: np.ndarray  # empirical cov(S, S)
    fisher_se: np.ndarray  # entrywise standard error of fisher_mc
    fisher_hess: np.ndarray  # -E[dS/dtheta] via the averaged Hessian


def score_and_fisher(model: LatentModel, theta: ParamVec, rng: np.random.Generator, n_mc: int) -> ScoreFisherReport:
    """Monte Carlo check of E[S] = 0 and cov(S, S) = -E[dS/dtheta]."""
    model.check(theta)
    datasets = np.stack([model.simulate(theta, rng) for _ in range(n_mc)])
    u = model.free_params(theta)
    h = _steps(u, FD_REL_STEP)

    def batch(uv):
        return model.batch_log_obs_lik(model.from_free(uv), datasets)

    scores = np.empty((n_mc, u.size))
    for i in range(u.size):
        e = np.zeros_like(u)
        e[i] = h[i]
        scores[:, i] = (batch(u + e) - batch(u - e)) / (2 * h[i])

    mean_score = scores.mean(axis=0)
    score_se = scores.std(axis=0, ddof=1) / np.sqrt(n_mc)
    centered = scores - mean_score
    fisher_mc = centered.T @ centered / (n_mc - 1)
    prods = centered[:, :, None] * centered[:, None, :]
    fisher_se = prods.std(axis=0, ddof=1) / np.sqrt(n_mc)
    fisher_hess = -fd_hessian(lambda uv: float(batch(uv).mean()), u)
    return ScoreFisherReport(
        n_mc=n_mc,
        mean_score=mean_score,
        score_se=score_se,
        fisher_mc=fisher_mc,
        fisher_se=fisher_se,
        fisher_hess=fisher_hess,
    )


# --------------------------------------------------------------------------
# brute-force verification oracle
# --------------------------------------------------------------------------


@dataclass
class OracleResult:
    grid: list  # [(axis name, values array), ...]
    argmax: ParamVec
    max_loglik: float
    n_evaluated: int


def brute_force_mle(model, grid, base: ParamVec | None = None, chunk: int = 65536) -> OracleResult:
    """Exhaustive grid search over the named axes; ties break toward the
    lexicographically smallest grid point (row-major enumeration order)."""
    names = [name for name, _ in grid]
    axes = [np.asarray(vals, dtype=np.float64) for _, vals in grid]
    total = int(np.prod([a.size for a in axes]))
    if total > 10**8:
        raise ConfigurationError(f"grid has {total} points, above the 1e8 cap")
    base = base if base is not None else model.param_template()

    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    best_val = -np.inf
    best_idx = -1
    for start in range(0, total, chunk):
        vals = model.grid_log_obs_lik(names, points[start : start + chunk], base)
        j = int(np.argmax(vals))
        if vals[j] > best_val:
            best_val = float(vals[j])
            best_idx = start + j
    theta = model.params_from_grid(names, points[best_idx], base)
    return OracleResult(grid=list(grid), argmax=theta, max_loglik=best_val, n_evaluated=total)
