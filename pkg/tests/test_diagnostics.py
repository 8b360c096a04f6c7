import numpy as np
import pytest

from emkit import StoppingRule, VariantConfig, em_map, run_fit
from emkit import diagnostics as dg
from emkit.models import GaussianMixture, PoissonMixture

from conftest import random_gmm_instance


def random_pair(model, gen):
    k = model.k
    w = gen.dirichlet(np.ones(k) * 4)
    data = model.data
    theta = model.make_params(
        w, gen.uniform(data.min(), data.max(), k), gen.uniform(0.3, 3.0, k)
    )
    w2 = gen.dirichlet(np.ones(k) * 4)
    theta2 = model.make_params(
        w2, gen.uniform(data.min(), data.max(), k), gen.uniform(0.3, 3.0, k)
    )
    return theta, theta2


# --- auxiliary-function identities -----------------------------------------------


def test_jensen_gap_inequality_random_pairs():
    gen = np.random.default_rng(1)
    model = GaussianMixture(gen.normal(0, 3, 25), 2)
    for _ in range(200):
        theta, theta2 = random_pair(model, gen)
        lhs, rhs = dg.jensen_gap(model, theta2, theta)
        assert lhs >= rhs - 1e-12 * max(1.0, abs(rhs))


def test_kl_posterior_nonnegative_and_zero_at_same_point():
    gen = np.random.default_rng(2)
    model = GaussianMixture(gen.normal(0, 3, 25), 2)
    for _ in range(100):
        theta, theta2 = random_pair(model, gen)
        assert dg.kl_posterior(model, theta, theta2) >= -1e-12
        assert abs(dg.kl_posterior(model, theta, theta)) <= 1e-12


def test_loglik_residual_identity_two_paths():
    """L(theta) computed directly must match free energy plus posterior KL."""
    gen = np.random.default_rng(3)
    model = GaussianMixture(gen.normal(0, 3, 25), 2)
    for _ in range(100):
        theta, theta_ref = random_pair(model, gen)
        q_ref = model.e_stats(theta_ref).resp
        direct = model.log_obs_lik(theta)
        via_bound = dg.free_energy(model, theta, q_ref) + dg.kl_posterior(model, theta_ref, theta)
        assert abs(direct - via_bound) <= 1e-10 * max(1.0, abs(direct))


def test_free_energy_maximized_by_exact_posterior():
    gen = np.random.default_rng(4)
    model = GaussianMixture(gen.normal(0, 3, 20), 2)
    theta, _ = random_pair(model, gen)
    best = dg.free_energy(model, theta, model.e_stats(theta).resp)
    np.testing.assert_allclose(best, model.log_obs_lik(theta), rtol=1e-12)
    for _ in range(20):
        q = gen.dirichlet(np.ones(2), size=model.n_items)
        assert dg.free_energy(model, theta, q) <= best + 1e-12


def test_proximal_objective_peaks_at_em_update():
    gen = np.random.default_rng(5)
    model = GaussianMixture(gen.normal(0, 3, 20), 2)
    theta_n, _ = random_pair(model, gen)
    theta_next = em_map(model, theta_n)
    ref = dg.proximal_objective(model, theta_next, theta_n)
    for _ in range(30):
        cand = theta_next.values + gen.normal(0, 0.02, 6)
        cand[:2] = np.clip(cand[:2], 1e-6, None)
        cand[:2] /= cand[:2].sum()
        cand[3], cand[5] = abs(cand[3]), abs(cand[5])
        assert dg.proximal_objective(model, theta_next.with_values(cand), theta_n) <= ref + 1e-10


def test_q_function_value_against_direct_sum():
    gen = np.random.default_rng(6)
    model = PoissonMixture(gen.poisson(5, 12).astype(float), 2)
    theta = model.make_params([0.4, 0.6], [3.0, 8.0])
    theta2 = model.make_params([0.5, 0.5], [2.0, 9.0])
    resp = model.e_stats(theta).resp
    expected = float(np.sum(resp * model.log_joint_matrix(theta2)))
    np.testing.assert_allclose(dg.q_function(model, theta2, theta), expected, rtol=1e-12)


# --- finite differences ------------------------------------------------------------


def test_fd_gradient_on_polynomial():
    f = lambda x: x[0] ** 3 + 2 * x[0] * x[1]
    g = dg.fd_gradient(f, np.array([1.5, -2.0]))
    np.testing.assert_allclose(g, [3 * 1.5 ** 2 - 4.0, 3.0], rtol=1e-6)


def test_fd_hessian_on_quadratic_form():
    A = np.array([[2.0, 0.3], [0.3, 1.0]])
    f = lambda x: 0.5 * x @ A @ x
    H = dg.fd_hessian(f, np.array([0.7, -1.2]))
    np.testing.assert_allclose(H, A, atol=1e-6)


# --- speed matrix -------------------------------------------------------------------


@pytest.fixture(scope="module")
def overlap_fit(overlapping_model):
    model = overlapping_model
    theta0 = model.make_params([0.5, 0.5], [-1.0, 1.0], [np.var(model.data)] * 2)
    trace = run_fit(model, VariantConfig("em"), theta0, StoppingRule(20000, 1e-15, 1e-15, "all"))
    theta = trace.final_params
    for _ in range(500):  # polish to an exact floating-point fixed point
        nxt = em_map(model, theta)
        if np.array_equal(nxt.values, theta.values):
            break
        theta = nxt
    return model, theta0, theta


def test_speed_matrix_information_identity(overlap_fit):
    model, _, theta_hat = overlap_fit
    diag = dg.speed_matrix(model, theta_hat)
    # complete information = observed information + posterior information
    total = diag.J_y + diag.F_post
    scale = max(1.0, np.abs(diag.Jz_bar).max())
    assert np.abs(total - diag.Jz_bar).max() <= 1e-4 * scale
    assert diag.info_identity_residual <= 1e-4


def test_speed_matrix_cross_check_against_map_jacobian(overlap_fit):
    model, _, theta_hat = overlap_fit
    diag = dg.speed_matrix(model, theta_hat)
    implied = np.eye(diag.S.shape[0]) - diag.phi_jacobian
    big = np.abs(diag.S) > 1e-6
    rel = np.abs(implied - diag.S)[big] / np.abs(diag.S)[big]
    assert rel.max() <= 0.05


def test_predicted_rate_matches_observed(overlap_fit):
    model, theta0, theta_hat = overlap_fit
    diag = dg.speed_matrix(model, theta_hat)
    trace = run_fit(model, VariantConfig("em"), theta0, StoppingRule(20000, 0.0, 0.0, "all"))
    observed = dg.observed_rate(trace.thetas(), theta_hat.values)
    assert abs(observed - diag.predicted_rate) <= 0.10 * diag.predicted_rate


def test_speed_matrix_rejects_non_fixed_point(d1_model, d1_theta0):
    with pytest.raises(ValueError):
        dg.speed_matrix(d1_model, d1_theta0)


def test_global_speed_definition(overlap_fit):
    model, _, theta_hat = overlap_fit
    diag = dg.speed_matrix(model, theta_hat)
    eigs = np.abs(np.linalg.eigvals(diag.S))
    np.testing.assert_allclose(diag.global_speed, eigs.min(), rtol=1e-12)
    np.testing.assert_allclose(
        diag.predicted_rate,
        np.abs(np.linalg.eigvals(np.eye(len(diag.S)) - diag.S)).max(),
        rtol=1e-12,
    )


# --- score and Fisher ----------------------------------------------------------------


def test_single_gaussian_fisher_matches_closed_form():
    n, var = 30, 2.25
    data = np.random.default_rng(0).normal(1.0, np.sqrt(var), n)
    model = GaussianMixture(data, 1)
    theta = model.make_params([1.0], [1.0], [var])
    report = dg.score_and_fisher(model, theta, np.random.default_rng(7), 10_000)
    closed = np.diag([n / var, n / (2 * var * var)])
    assert np.all(np.abs(report.mean_score) <= 3 * report.score_se)
    np.testing.assert_allclose(report.fisher_mc, closed, rtol=0.05, atol=0.05)
    np.testing.assert_allclose(report.fisher_hess, closed, rtol=0.05, atol=0.05)
    # covariance and Hessian estimates agree within Monte Carlo error
    assert np.all(np.abs(report.fisher_mc - report.fisher_hess) <= 5 * report.fisher_se + 1e-8)


def test_cramer_rao_bound_on_mean_estimate():
    """Var(sample mean) equals the inverse Fisher information for the mean."""
    n, var = 30, 2.25
    model = GaussianMixture(np.zeros(n), 1)
    theta = model.make_params([1.0], [1.0], [var])
    gen = np.random.default_rng(3)
    means = np.array([model.simulate(theta, gen).mean() for _ in range(4000)])
    np.testing.assert_allclose(means.var(), var / n, rtol=0.1)


# --- brute-force oracle ----------------------------------------------------------------


def test_oracle_finds_grid_point_with_best_loglik():
    gen = np.random.default_rng(9)
    model = PoissonMixture(gen.poisson(3, 10).astype(float), 1)
    grid = [("rate1", np.linspace(0.5, 8.0, 64))]
    result = dg.brute_force_mle(model, grid)
    vals = [
        model.log_obs_lik(model.make_params([1.0], [r])) for r in grid[0][1]
    ]
    assert result.max_loglik == max(vals)
    assert result.n_evaluated == 64


def test_oracle_superset_never_worse():
    """Refining the grid can only improve (or tie) the best value found."""
    gen = np.random.default_rng(10)
    model = PoissonMixture(gen.poisson(4, 12).astype(float), 1)
    coarse = dg.brute_force_mle(model, [("rate1", np.linspace(1, 8, 8))])
    fine = dg.brute_force_mle(model, [("rate1", np.linspace(1, 8, 29))])  # superset
    assert fine.max_loglik >= coarse.max_loglik


def test_oracle_ties_break_lexicographically():
    model = GaussianMixture(np.array([-1.0, 1.0]), 2)
    base = model.make_params([0.5, 0.5], [-1.0, 1.0], [1.0, 1.0])
    # symmetric axes create exact ties; the first point in row-major order wins
    result = dg.brute_force_mle(model, [("mu1", np.array([-1.0, 1.0])), ("mu2", np.array([-1.0, 1.0]))], base)
    np.testing.assert_array_equal(model.means(result.argmax), [-1.0, 1.0])


def test_observed_rate_on_synthetic_geometric_sequence():
    theta_hat = np.array([1.0, 2.0])
    rate = 0.8
    thetas = np.stack([theta_hat + rate ** t * np.array([0.5, -0.3]) for t in range(40)])
    assert abs(dg.observed_rate(thetas, theta_hat) - rate) < 1e-6
