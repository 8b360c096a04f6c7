import numpy as np
import pytest

from emkit import StoppingRule, VariantConfig, em_map, run_fit
from emkit.core import STATUS_CONVERGED, STATUS_MAX_ITERS
from emkit.errors import ConfigurationError, InvalidParameterError

from conftest import D1_LOGLIK, D1_MLE, random_gmm_instance, random_poisson_instance


def test_em_map_matches_hand_rolled_update(d1_model, d1_theta0):
    """One fused update equals the explicit E-step followed by the M-step."""
    resp = d1_model.e_stats(d1_theta0).resp
    by_hand = d1_model.m_step(d1_model.stats_from_resp(resp))
    np.testing.assert_array_equal(em_map(d1_model, d1_theta0).values, by_hand.values)


def test_fit_reaches_known_optimum(d1_model, d1_theta0):
    trace = run_fit(d1_model, VariantConfig("em"), d1_theta0)
    assert trace.status == STATUS_CONVERGED
    np.testing.assert_allclose(trace.final_loglik, D1_LOGLIK, rtol=1e-12)
    np.testing.assert_allclose(trace.final_params.values, D1_MLE, atol=1e-10)


def test_loglik_trace_monotone(d1_model, d1_theta0):
    trace = run_fit(d1_model, VariantConfig("em"), d1_theta0)
    lls = trace.logliks()
    assert np.all(np.diff(lls) >= -1e-10 * np.maximum(1.0, np.abs(lls[:-1])))


def test_monotonicity_over_random_instances():
    gen = np.random.default_rng(99)
    stop = StoppingRule(40, 1e-12, 1e-12, "all")
    for i in range(20):
        maker = random_gmm_instance if i % 2 else random_poisson_instance
        model, theta0 = maker(gen)
        trace = run_fit(model, VariantConfig("em"), theta0, stop)
        lls = trace.logliks()
        assert np.all(np.diff(lls) >= -1e-10 * np.maximum(1.0, np.abs(lls[:-1])))


def test_fixed_point_is_stationary(d1_model, d1_theta0):
    trace = run_fit(d1_model, VariantConfig("em"), d1_theta0, StoppingRule(200, 0.0, 0.0, "all"))
    theta = trace.final_params
    assert em_map(d1_model, theta).sup_distance(theta) <= 1e-12


def test_same_seed_same_trace(d1_model, d1_theta0):
    stop = StoppingRule(60, 0.0, 0.0, "all")
    a = run_fit(d1_model, VariantConfig("sem"), d1_theta0, stop, seed=17)
    b = run_fit(d1_model, VariantConfig("sem"), d1_theta0, stop, seed=17)
    assert len(a.records) == len(b.records)
    for ra, rb in zip(a.records, b.records):
        assert np.array_equal(ra.theta.values, rb.theta.values)
        assert ra.loglik == rb.loglik


def test_different_seed_different_trace():
    # overlapping clusters keep the label draws genuinely random
    from emkit.models import GaussianMixture

    model = GaussianMixture(np.array([-1.5, -0.5, 0.5, 1.5, -1.0, 1.0]), 2)
    theta0 = model.make_params([0.5, 0.5], [-0.5, 0.5], [1.0, 1.0])
    stop = StoppingRule(30, 0.0, 0.0, "all")
    a = run_fit(model, VariantConfig("sem"), theta0, stop, seed=1)
    b = run_fit(model, VariantConfig("sem"), theta0, stop, seed=2)
    assert any(
        not np.array_equal(ra.theta.values, rb.theta.values)
        for ra, rb in zip(a.records, b.records)
    )


def test_invalid_theta0_raises(d1_model):
    bad = d1_model.make_params([0.9, 0.9], [-4.0, 4.0], [1.0, 1.0])
    with pytest.raises(InvalidParameterError):
        run_fit(d1_model, VariantConfig("em"), bad)


def test_unknown_variant_rejected(d1_model, d1_theta0):
    with pytest.raises(ConfigurationError):
        run_fit(d1_model, VariantConfig("nonsense"), d1_theta0)


def test_unknown_option_rejected(d1_model, d1_theta0):
    with pytest.raises(ConfigurationError):
        run_fit(d1_model, VariantConfig("em", {"bogus": 1}), d1_theta0)


def test_max_iters_status(d1_model, d1_theta0):
    trace = run_fit(d1_model, VariantConfig("em"), d1_theta0, StoppingRule(1, 0.0, 0.0, "all"))
    assert trace.status == STATUS_MAX_ITERS
    assert trace.n_iters == 1


def test_stochastic_trace_has_stationary_summary(d1_model, d1_theta0):
    trace = run_fit(d1_model, VariantConfig("sem"), d1_theta0, StoppingRule(80, 0.0, 0.0, "all"), seed=3)
    assert trace.stationary is not None
    assert trace.stationary.burn_in == 20  # default quarter of the chain
    assert trace.stationary.mean.shape == (6,)


def test_deterministic_trace_has_no_stationary_summary(d1_model, d1_theta0):
    trace = run_fit(d1_model, VariantConfig("em"), d1_theta0)
    assert trace.stationary is None
