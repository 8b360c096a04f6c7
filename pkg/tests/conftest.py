import numpy as np
import pytest

from emkit.models import GaussianMixture, PoissonMixture

D1_DATA = np.array([-5.0, -4.0, 4.0, 5.0])
D1_MLE = np.array([0.5, 0.5, -4.5, 0.25, 4.5, 0.25])
D1_LOGLIK = -5.675754132818691

POISSON_DATA = np.array([0.0, 1.0, 9.0, 11.0])


@pytest.fixture
def d1_model():
    return GaussianMixture(D1_DATA.copy(), 2)


@pytest.fixture
def d1_theta0(d1_model):
    return d1_model.make_params([0.5, 0.5], [-4.0, 4.0], [1.0, 1.0])


@pytest.fixture
def poisson_model():
    return PoissonMixture(POISSON_DATA.copy(), 2)


@pytest.fixture
def poisson_theta0(poisson_model):
    return poisson_model.make_params([0.5, 0.5], [1.0, 10.0])


def two_cluster_data(mean: float, sd: float, n: int = 400, seed: int = 2026) -> np.ndarray:
    """Balanced sample from 0.5 N(-mean, sd^2) + 0.5 N(mean, sd^2)."""
    gen = np.random.default_rng(seed)
    half = n // 2
    return np.concatenate([gen.normal(-mean, sd, half), gen.normal(mean, sd, n - half)])


@pytest.fixture(scope="session")
def separated_model():
    return GaussianMixture(two_cluster_data(4.5, 2.5, n=400), 2)


@pytest.fixture(scope="session")
def overlapping_model():
    return GaussianMixture(two_cluster_data(0.5, 0.5, n=500), 2)


def random_gmm_instance(gen, n_max=50, k_max=3):
    k = int(gen.integers(1, k_max + 1))
    n = int(gen.integers(max(4 * k, 8), n_max + 1))
    centers = gen.uniform(-6, 6, k)
    data = gen.normal(centers[gen.integers(0, k, n)], gen.uniform(0.5, 2.0))
    model = GaussianMixture(data, k)
    w = gen.dirichlet(np.ones(k) * 5)
    theta0 = model.make_params(
        w, gen.uniform(data.min(), data.max(), k), gen.uniform(0.3, 4.0, k)
    )
    return model, theta0


def random_poisson_instance(gen, n_max=50, k_max=3):
    k = int(gen.integers(1, k_max + 1))
    n = int(gen.integers(max(4 * k, 8), n_max + 1))
    rates = gen.uniform(0.5, 15.0, k)
    data = gen.poisson(rates[gen.integers(0, k, n)]).astype(float)
    model = PoissonMixture(data, k)
    w = gen.dirichlet(np.ones(k) * 5)
    theta0 = model.make_params(w, gen.uniform(0.5, 15.0, k))
    return model, theta0
