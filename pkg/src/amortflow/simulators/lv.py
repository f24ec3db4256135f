"""Deterministic Lotka-Volterra predator-prey dynamics integrated with RK4."""

import numpy as np

from amortflow.simulators.base import SimulatorModel

LOG_PRIOR_BOUND = 2.0


def lv_vector_field(state, theta):
    """``du/dt = alpha u - beta u v``, ``dv/dt = -gamma v + delta beta u v``."""
    u, v = state[..., 0], state[..., 1]
    alpha, beta, gamma, delta = theta[..., 0], theta[..., 1], theta[..., 2], theta[..., 3]
    return np.stack([alpha * u - beta * u * v, -gamma * v + delta * beta * u * v], axis=-1)


def rk4_integrate(theta, initial, dt, steps):
    """Classical fixed-step Runge-Kutta; returns the states after each of ``steps`` steps."""
    theta = np.atleast_2d(theta)
    alpha, beta, gamma, delta = (theta[:, i].copy() for i in range(4))
    db = delta * beta
    u = np.full(theta.shape[0], float(initial[0]))
    v = np.full(theta.shape[0], float(initial[1]))
    out = np.empty((theta.shape[0], steps, 2))
    h2, h6 = 0.5 * dt, dt / 6.0

    def field(u, v):
        uv = u * v
        return alpha * u - beta * uv, db * uv - gamma * v

    with np.errstate(all="ignore"):
        for k in range(steps):
            a1, b1 = field(u, v)
            a2, b2 = field(u + h2 * a1, v + h2 * b1)
            a3, b3 = field(u + h2 * a2, v + h2 * b2)
            a4, b4 = field(u + dt * a3, v + dt * b3)
            u = u + h6 * (a1 + 2 * a2 + 2 * a3 + a4)
            v = v + h6 * (b1 + 2 * b2 + 2 * b3 + b4)
            out[:, k, 0] = u
            out[:, k, 1] = v
    return out


class LVModel(SimulatorModel):
    """``theta = (alpha, beta, gamma, delta)``, each ``U(e^-2, e^2)``.

    Trajectories start at ``(u0, v0) = (10, 5)`` and are sampled on a grid of
    ``steps`` points covering ``(0, horizon]``. A trajectory that becomes
    non-finite or non-positive is rejected (returned as NaN).
    """

    name = "lv"
    kind = "series"
    param_names = ("alpha", "beta", "gamma", "delta")
    data_names = ("prey", "predator")

    def __init__(self, u0=10.0, v0=5.0, horizon=15.0, steps=500):
        self.u0, self.v0 = float(u0), float(v0)
        self.horizon = float(horizon)
        self.steps = int(steps)
        self.dt = self.horizon / self.steps
        self.size_range = (self.steps, self.steps)

    def prior_bounds(self):
        return np.full(4, np.exp(-LOG_PRIOR_BOUND)), np.full(4, np.exp(LOG_PRIOR_BOUND))

    def sample_prior(self, n, stream):
        low, high = self.prior_bounds()
        return low + (high - low) * stream.generator.random((n, 4))

    def simulate(self, theta, size=None, stream=None):
        theta = self._check_theta(theta)
        size = self.steps if size is None else int(size)
        traj = rk4_integrate(theta, (self.u0, self.v0), self.dt, size)
        flat = traj.reshape(len(traj), -1)
        bad = ~np.all(np.isfinite(flat) & (flat > 0), axis=1)
        traj[bad] = np.nan
        return traj

    @property
    def feature_dim(self):
        return 4

    def preprocess(self, x):
        """``log1p`` of both series plus both series relative to their start.

        Time averages of the raw populations pin down the equilibrium
        ``(gamma / (delta beta), alpha / beta)``; mean pooling over log values
        alone cannot recover them.
        """
        x = np.asarray(x, dtype=float)
        return np.concatenate([np.log1p(x), x / np.array([self.u0, self.v0])], axis=-1)

    def options(self):
        return {"u0": self.u0, "v0": self.v0, "horizon": self.horizon, "steps": self.steps}


def _autocorr(x, lag):
    xc = x - x.mean()
    denom = np.dot(xc, xc)
    if denom <= 0 or lag >= len(x):
        return 0.0
    return float(np.dot(xc[:-lag], xc[lag:]) / denom)


def _crosscorr(a, b):
    ac, bc = a - a.mean(), b - b.mean()
    denom = np.sqrt(np.dot(ac, ac) * np.dot(bc, bc))
    if denom <= 0:
        return 0.0
    return float(np.dot(ac, bc) / denom)


def lag_steps(lag_time, dt):
    """Convert a lag in time units to grid steps, rounding to the nearest step."""
    return int(np.floor(lag_time / dt + 0.5))


def lv_handcrafted_summary(x, dt=0.03, lags=(0.2, 0.4)):
    """Nine classic statistics of a ``(T, 2)`` predator-prey series.

    Means, log variances (``log(var + 1e-12)``), autocorrelations of each series
    at ``lags`` time units, and the lag-0 cross-correlation.
    """
    x = np.asarray(x, dtype=float)
    u, v = x[:, 0], x[:, 1]
    steps = [lag_steps(lag, dt) for lag in lags]
    return np.array(
        [
            u.mean(),
            v.mean(),
            np.log(u.var() + 1e-12),
            np.log(v.var() + 1e-12),
            *[_autocorr(u, k) for k in steps],
            *[_autocorr(v, k) for k in steps],
            _crosscorr(u, v),
        ]
    )


class LVHandcraftedModel(LVModel):
    """Lotka-Volterra whose data reach the network as the nine hand-crafted statistics."""

    name = "lv_handcrafted"
    kind = "single"
    feature_names = (
        "mean_u", "mean_v", "logvar_u", "logvar_v",
        "ac_u_0.2", "ac_u_0.4", "ac_v_0.2", "ac_v_0.4", "crosscorr_uv",
    )

    @property
    def feature_dim(self):
        return len(self.feature_names)

    def preprocess(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            x = x[None]
        if x.shape[1] == 1 and x.shape[2] == len(self.feature_names):
            return x  # already reduced
        feats = np.stack([lv_handcrafted_summary(series, self.dt) for series in x])
        return feats[:, None, :]
