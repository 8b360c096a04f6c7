"""Pure-numpy responsibility kernels (fallback backend)."""

import numpy as np
from scipy.special import gammaln

_LOG_2PI = float(np.log(2.0 * np.pi))


def gmm_posterior(y, log_w, mu, var):
    """Log-likelihood and responsibilities of a univariate Gaussian mixture.

    Returns ``(loglik, resp)`` where ``resp[i, k]`` is the posterior
    probability that item ``i`` came from component ``k``.  Computed in the
    log domain (log-sum-exp) so well-separated components do not underflow.
    """
    d = y[:, None] - mu[None, :]
    logp = log_w[None, :] - 0.5 * (_LOG_2PI + np.log(var)[None, :] + d * d / var[None, :])
    return _normalize(logp)


def poisson_posterior(counts, log_w, rates):
    """Log-likelihood and responsibilities of a Poisson mixture."""
    c = counts[:, None]
    logp = log_w[None, :] + c * np.log(rates)[None, :] - rates[None, :] - gammaln(c + 1.0)
    return _normalize(logp)


def _normalize(logp):
    m = logp.max(axis=1)
    if not np.all(np.isfinite(m)):
        raise FloatingPointError("zero total posterior density at some item")
    lse = m + np.log(np.exp(logp - m[:, None]).sum(axis=1))
    resp = np.exp(logp - lse[:, None])
    return float(lse.sum()), resp
