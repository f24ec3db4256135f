"""Multivariate normal with unknown mean and known covariance (conjugate oracle)."""

import numpy as np

from amortflow.exceptions import ParameterError
from amortflow.numerics import RngStream
from amortflow.simulators.base import SimulatorModel


def random_covariance(dim, stream):
    """Random dense SPD matrix ``A A^T / dim + I / 2``."""
    a = stream.generator.standard_normal((dim, dim))
    return a @ a.T / dim + 0.5 * np.eye(dim)


def _cholesky(sigma):
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ParameterError("covariance must be a square matrix")
    if not np.allclose(sigma, sigma.T, rtol=0, atol=1e-12):
        raise ParameterError("covariance must be symmetric")
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise ParameterError("covariance must be positive definite") from None


def mvn_posterior_oracle(x, sigma):
    """Exact posterior of the mean under a N(0, I) prior.

    ``x`` is one observation ``(D,)`` or a set ``(N, D)``. Returns the
    posterior mean and covariance ``Lambda = (I + N Sigma^-1)^-1``,
    ``m = Lambda Sigma^-1 sum_i x_i``.
    """
    _cholesky(sigma)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, dim = x.shape
    sigma_inv = np.linalg.inv(sigma)
    cov = np.linalg.inv(np.eye(dim) + n * sigma_inv)
    cov = 0.5 * (cov + cov.T)
    mean = cov @ sigma_inv @ x.sum(axis=0)
    return mean, cov


class MVNModel(SimulatorModel):
    """``mu ~ N(0, I)``, ``x_i ~ N(mu, Sigma)``.

    ``Sigma`` defaults to a random dense SPD matrix drawn from ``cov_seed``.
    With ``n_range`` above one the observations form an exchangeable set.
    """

    name = "mvn"

    def __init__(self, dim=5, cov=None, cov_seed=0, n_range=(1, 1)):
        self.dim_ = int(dim)
        self.cov_seed = int(cov_seed)
        self._explicit_cov = cov is not None
        if cov is None:
            cov = random_covariance(self.dim_, RngStream(cov_seed, 0xC0))
        self.cov = np.asarray(cov, dtype=float)
        self.chol = _cholesky(self.cov)
        self.param_names = tuple(f"mu_{i + 1}" for i in range(self.dim_))
        self.data_names = tuple(f"x_{i + 1}" for i in range(self.dim_))
        self.size_range = tuple(int(v) for v in n_range)
        self.kind = "single" if self.size_range == (1, 1) else "iid"

    def sample_prior(self, n, stream):
        return stream.generator.standard_normal((n, self.dim_))

    def simulate(self, theta, size, stream):
        theta = self._check_theta(theta)
        eps = stream.generator.standard_normal((theta.shape[0], size, self.dim_))
        return theta[:, None, :] + eps @ self.chol.T

    def posterior(self, x):
        return mvn_posterior_oracle(x, self.cov)

    def options(self):
        opts = {"dim": self.dim_, "cov_seed": self.cov_seed, "n_range": list(self.size_range)}
        if self._explicit_cov:
            opts["cov"] = self.cov.tolist()
        return opts
