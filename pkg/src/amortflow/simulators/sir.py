"""Discrete-time stochastic SIR epidemic with binomial transitions."""

import numpy as np

from amortflow.numerics import sample_binomial
from amortflow.simulators.base import SimulatorModel
from amortflow.transforms import OrderedPairLogitTransform


def infection_probability(beta, infected, population, dt):
    return 1.0 - np.exp(-beta * infected / population * dt)


class SIRModel(SimulatorModel):
    """``theta = (beta, gamma)`` with ``beta ~ U(0.01, 1)``, ``gamma ~ U(0.01, beta)``.

    Each step moves ``Binomial(S, 1 - exp(-beta I/N dt))`` individuals from S to
    I and ``Binomial(I, 1 - exp(-gamma dt))`` from I to R. The returned series
    holds the state ``(S, I, R)`` after each of the ``T`` steps.
    """

    name = "sir"
    kind = "series"
    param_names = ("beta", "gamma")
    data_names = ("S", "I", "R")

    def __init__(self, population=1000, initial_infected=10, initial_recovered=0, dt=0.1, t_range=(200, 500)):
        self.population = int(population)
        self.initial_infected = int(initial_infected)
        self.initial_recovered = int(initial_recovered)
        self.dt = float(dt)
        self.size_range = tuple(int(v) for v in t_range)

    def prior_bounds(self):
        return np.array([0.01, 0.01]), np.array([1.0, 1.0])

    def in_support(self, theta):
        theta = np.atleast_2d(theta)
        return super().in_support(theta) & (theta[:, 1] <= theta[:, 0])

    def default_transform(self):
        # respects gamma <= beta, unlike a per-coordinate logit on the bounding box
        return OrderedPairLogitTransform(0.01, 1.0)

    def sample_prior(self, n, stream):
        u = stream.generator.random((n, 2))
        beta = 0.01 + 0.99 * u[:, 0]
        gamma = 0.01 + (beta - 0.01) * u[:, 1]
        return np.stack([beta, gamma], axis=1)

    def simulate(self, theta, size, stream, initial_state=None):
        theta = self._check_theta(theta)
        n = theta.shape[0]
        beta, gamma = theta[:, 0], theta[:, 1]
        if initial_state is None:
            s0 = self.population - self.initial_infected - self.initial_recovered
            initial_state = (s0, self.initial_infected, self.initial_recovered)
        s = np.full(n, initial_state[0], dtype=np.int64)
        i = np.full(n, initial_state[1], dtype=np.int64)
        r = np.full(n, initial_state[2], dtype=np.int64)
        total = s + i + r
        p_recover = 1.0 - np.exp(-gamma * self.dt)
        out = np.empty((n, size, 3), dtype=np.int64)
        for t in range(size):
            new_inf = sample_binomial(stream, s, infection_probability(beta, i, total, self.dt))
            new_rec = sample_binomial(stream, i, p_recover)
            s = s - new_inf
            i = i + new_inf - new_rec
            r = r + new_rec
            out[:, t, 0], out[:, t, 1], out[:, t, 2] = s, i, r
        return out

    def preprocess(self, x):
        return np.asarray(x, dtype=float) / self.population

    def options(self):
        return {
            "population": self.population,
            "initial_infected": self.initial_infected,
            "initial_recovered": self.initial_recovered,
            "dt": self.dt,
            "t_range": list(self.size_range),
        }
