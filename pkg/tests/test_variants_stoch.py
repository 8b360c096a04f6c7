import itertools

import numpy as np
import pytest

from emkit import AnnealingSchedule, RngStream, StoppingRule, VariantConfig, em_map, run_fit
from emkit.models import GaussianMixture, PoissonMixture
from emkit.rng import KERNEL, LABELS
from emkit.variants import SAEM2_DEFAULT, SAEM_DEFAULT, mh_label_chain, sem_step

from conftest import D1_MLE


def assert_traces_identical(a, b):
    assert len(a.records) == len(b.records)
    for ra, rb in zip(a.records, b.records):
        assert np.array_equal(ra.theta.values, rb.theta.values)
        assert ra.loglik == rb.loglik


# --- schedules ----------------------------------------------------------------


def test_harmonic_schedule():
    s = AnnealingSchedule(kind="harmonic")
    assert s.gamma(1) == 1.0
    assert s.gamma(4) == 0.25
    assert s.is_convergent()


def test_power_schedule_with_delay():
    s = AnnealingSchedule(kind="power", exponent=0.7, delay=3)
    assert s.gamma(1) == 1.0
    assert s.gamma(3) == 1.0
    assert s.gamma(4) == 1.0
    assert s.gamma(5) == pytest.approx(1.0 / 2 ** 0.7)
    assert s.is_convergent()


def test_constant_schedule_is_not_convergent():
    s = AnnealingSchedule(kind="constant", value=0.3)
    assert s.gamma(100) == 0.3
    assert not s.is_convergent()


def test_m_growth():
    s = AnnealingSchedule(kind="harmonic", m_value=2, m_growth="quadratic")
    assert s.m(1) == 2
    assert s.m(3) >= s.m(2) >= s.m(1)


# --- exact reduction identities -------------------------------------------------


STOP = StoppingRule(40, 0.0, 0.0, "all")


def test_mcem_single_draw_is_sem(d1_model, d1_theta0):
    a = run_fit(d1_model, VariantConfig("mcem", {"m": 1}), d1_theta0, STOP, seed=23)
    b = run_fit(d1_model, VariantConfig("sem"), d1_theta0, STOP, seed=23)
    assert_traces_identical(a, b)


def test_saem_zero_gamma_is_em(d1_model, d1_theta0):
    frozen = AnnealingSchedule(kind="constant", value=0.0)
    a = run_fit(d1_model, VariantConfig("saem", {"schedule": frozen}), d1_theta0, STOP, seed=23)
    b = run_fit(d1_model, VariantConfig("em"), d1_theta0, STOP, seed=23)
    assert_traces_identical(a, b)


def test_saem2_full_gamma_exact_kernel_is_mcem(d1_model, d1_theta0):
    hot = AnnealingSchedule(kind="constant", value=1.0, m_value=1)
    a = run_fit(
        d1_model,
        VariantConfig("saem2", {"schedule": hot, "kernel": "exact"}),
        d1_theta0,
        STOP,
        seed=23,
    )
    b = run_fit(d1_model, VariantConfig("mcem", {"m": 1}), d1_theta0, STOP, seed=23)
    assert_traces_identical(a, b)


# --- SEM ------------------------------------------------------------------------


def test_sem_step_uses_sampled_labels(d1_model, d1_theta0):
    gen_a = RngStream(5).generator(LABELS, 1)
    gen_b = RngStream(5).generator(LABELS, 1)
    labels = d1_model.sample_posterior(d1_theta0, gen_a)
    expected = d1_model.m_step(d1_model.stats_from_labels(labels))
    actual = sem_step(d1_model, d1_theta0, gen_b)
    np.testing.assert_array_equal(actual.values, expected.values)


def test_sem_stationary_mean_near_mle(d1_model, d1_theta0):
    trace = run_fit(d1_model, VariantConfig("sem"), d1_theta0, StoppingRule(300, 0.0, 0.0, "all"), seed=5)
    means = trace.stationary.mean[[2, 4]]
    np.testing.assert_allclose(np.sort(means), [-4.5, 4.5], atol=0.2)


def test_sem_replay_mid_chain(d1_model, d1_theta0):
    """Per-iteration substreams allow replaying any single iteration."""
    trace = run_fit(d1_model, VariantConfig("sem"), d1_theta0, StoppingRule(20, 0.0, 0.0, "all"), seed=9)
    n = 7
    theta_prev = trace.records[n - 1].theta
    gen = RngStream(9).generator(LABELS, n)
    replayed = sem_step(d1_model, theta_prev, gen)
    np.testing.assert_array_equal(replayed.values, trace.records[n].theta.values)


# --- DA -------------------------------------------------------------------------


def test_da_chain_runs_and_summarizes(d1_model, d1_theta0):
    trace = run_fit(d1_model, VariantConfig("da"), d1_theta0, StoppingRule(200, 0.0, 0.0, "all"), seed=2)
    assert trace.stationary is not None
    means = np.sort(trace.stationary.mean[[2, 4]])
    np.testing.assert_allclose(means, [-4.5, 4.5], atol=1.0)


def test_da_single_observation_posterior_is_gamma():
    """One Poisson count y with a flat rate prior gives rate | y ~ Gamma(y+1, 1)."""
    from scipy.stats import gamma as gamma_dist, kstest

    model = PoissonMixture(np.array([4.0]), 1)
    theta = model.make_params([1.0], [3.0])
    gen = np.random.default_rng(31)
    draws = np.array(
        [model.rates(model.posterior_param_draw(np.zeros(1, dtype=int), gen))[0] for _ in range(4000)]
    )
    assert kstest(draws, gamma_dist(a=5.0, scale=1.0).cdf).pvalue > 1e-4


# --- SAEM / MCEM / SAEM2 -----------------------------------------------------------


def test_saem_settles_at_fixed_point(d1_model, d1_theta0):
    trace = run_fit(d1_model, VariantConfig("saem"), d1_theta0, StoppingRule(400, 0.0, 0.0, "all"), seed=1)
    theta = trace.final_params
    assert em_map(d1_model, theta).sup_distance(theta) <= 1e-3


def test_saem2_default_schedule_settles(d1_model, d1_theta0):
    trace = run_fit(d1_model, VariantConfig("saem2"), d1_theta0, StoppingRule(400, 0.0, 0.0, "all"), seed=1)
    theta = trace.final_params
    assert em_map(d1_model, theta).sup_distance(theta) <= 1e-3


def test_saem2_mh_kernel_settles(d1_model, d1_theta0):
    trace = run_fit(
        d1_model,
        VariantConfig("saem2", {"kernel": "mh", "mh_steps": 8}),
        d1_theta0,
        StoppingRule(400, 0.0, 0.0, "all"),
        seed=1,
    )
    theta = trace.final_params
    assert em_map(d1_model, theta).sup_distance(theta) <= 1e-2


def test_mcem_more_draws_less_noise(d1_model, d1_theta0):
    stop = StoppingRule(150, 0.0, 0.0, "all")
    small = run_fit(d1_model, VariantConfig("mcem", {"m": 1}), d1_theta0, stop, seed=3)
    big = run_fit(d1_model, VariantConfig("mcem", {"m": 32}), d1_theta0, stop, seed=3)
    tail = slice(50, None)
    def wobble(trace):
        t = trace.thetas()[tail]
        return np.mean(np.std(t, axis=0))
    assert wobble(big) <= wobble(small)


# --- MH kernel --------------------------------------------------------------------


def test_mh_chain_matches_enumerated_posterior():
    model = GaussianMixture(np.array([-1.0, 1.0]), 2)
    theta = model.make_params([0.4, 0.6], [-1.2, 0.9], [1.0, 1.5])
    logj = model.log_joint_matrix(theta)
    probs = {}
    for z in itertools.product(range(2), repeat=2):
        probs[z] = np.exp(logj[0, z[0]] + logj[1, z[1]])
    total = sum(probs.values())
    probs = {z: p / total for z, p in probs.items()}

    gen = RngStream(3).generator(KERNEL, 0)
    _, accepted, history = mh_label_chain(model, theta, np.zeros(2, dtype=int), 200_000, gen, record=True)
    history = history[20_000:]  # burn-in
    tv = 0.5 * sum(
        abs(np.mean((history[:, 0] == z[0]) & (history[:, 1] == z[1])) - probs[z]) for z in probs
    )
    assert tv <= 0.02
    assert accepted > 0


def test_mh_chain_is_replayable():
    model = GaussianMixture(np.array([-1.0, 1.0, 2.0]), 2)
    theta = model.make_params([0.5, 0.5], [-1.0, 1.5], [1.0, 1.0])
    a = mh_label_chain(model, theta, np.zeros(3, dtype=int), 500, RngStream(7).generator(KERNEL, 4))
    b = mh_label_chain(model, theta, np.zeros(3, dtype=int), 500, RngStream(7).generator(KERNEL, 4))
    np.testing.assert_array_equal(a[0], b[0])
    assert a[1] == b[1]


# --- RngStream ----------------------------------------------------------------------


def test_substreams_are_independent_and_reproducible():
    s = RngStream(11)
    a = s.generator(LABELS, 3).random(5)
    b = RngStream(11).generator(LABELS, 3).random(5)
    np.testing.assert_array_equal(a, b)
    c = RngStream(11).generator(LABELS, 4).random(5)
    assert not np.array_equal(a, c)
    d = RngStream(11).generator(KERNEL, 3).random(5)
    assert not np.array_equal(a, d)
