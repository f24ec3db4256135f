"""Stochastic Ricker population model with Poisson observations."""

import numpy as np

from amortflow.numerics import sample_poisson
from amortflow.simulators.base import SimulatorModel

PRIOR_LOW = np.array([0.0, 1.0, 0.05])
PRIOR_HIGH = np.array([15.0, 90.0, 0.7])


def ricker_latent_path(rho, r, sigma, length, stream, initial_population=1.0):
    """Expected population sizes ``N_1..N_T`` for a batch of parameters.

    ``N_{t+1} = r N_t exp(-N_t + xi_t)`` with ``xi_t ~ N(0, sigma^2)``.
    """
    r = np.asarray(r, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    xi = sigma[:, None] * stream.generator.standard_normal((len(r), length))
    path = np.empty((len(r), length))
    path[:, 0] = initial_population
    with np.errstate(under="ignore"):
        for t in range(length - 1):
            path[:, t + 1] = r * path[:, t] * np.exp(-path[:, t] + xi[:, t])
    return path


class RickerModel(SimulatorModel):
    """``theta = (rho, r, sigma)``; observations ``x_t ~ Pois(rho N_t)``.

    With ``dummy=True`` a fourth parameter ``u ~ U(0, 1)`` is appended that
    the simulator never reads.
    """

    name = "ricker"
    kind = "series"
    data_names = ("count",)

    def __init__(self, dummy=False, initial_population=1.0, t_range=(100, 500)):
        self.dummy = bool(dummy)
        self.initial_population = float(initial_population)
        self.size_range = tuple(int(v) for v in t_range)
        self.param_names = ("rho", "r", "sigma") + (("u",) if self.dummy else ())

    def prior_bounds(self):
        if self.dummy:
            return np.append(PRIOR_LOW, 0.0), np.append(PRIOR_HIGH, 1.0)
        return PRIOR_LOW.copy(), PRIOR_HIGH.copy()

    def sample_prior(self, n, stream):
        low, high = self.prior_bounds()
        return low + (high - low) * stream.generator.random((n, len(low)))

    def simulate(self, theta, size, stream):
        theta = self._check_theta(theta)
        rho, r, sigma = theta[:, 0], theta[:, 1], theta[:, 2]
        path = ricker_latent_path(rho, r, sigma, size, stream, self.initial_population)
        counts = sample_poisson(stream, rho[:, None] * path)
        return counts[:, :, None]

    def preprocess(self, x):
        return np.log1p(np.asarray(x, dtype=float))

    def options(self):
        return {
            "dummy": self.dummy,
            "initial_population": self.initial_population,
            "t_range": list(self.size_range),
        }
