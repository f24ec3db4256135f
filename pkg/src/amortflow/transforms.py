"""Fixed bijections between model parameters and the flow's input space.

The flow itself is unconstrained on R^D. Box-bounded priors are mapped through
a logit so that posterior draws can never leave the prior support, and all
transforms report their log-Jacobian so densities stay exact in the original
parameterisation.
"""

import numpy as np

_EPS = 1e-12


def _logistic(y):
    # tanh form cannot overflow
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(y, dtype=float)))


class IdentityTransform:
    kind = "identity"

    def forward(self, theta):
        return np.asarray(theta, dtype=float)

    def inverse(self, y):
        return np.asarray(y, dtype=float)

    def log_det_forward(self, theta):
        theta = np.atleast_2d(theta)
        return np.zeros(theta.shape[0])

    def to_dict(self):
        return {"kind": self.kind}


class AffineTransform:
    """``y = (theta - loc) / scale``."""

    kind = "affine"

    def __init__(self, loc, scale):
        self.loc = np.asarray(loc, dtype=float)
        self.scale = np.asarray(scale, dtype=float)

    def forward(self, theta):
        return (np.asarray(theta, dtype=float) - self.loc) / self.scale

    def inverse(self, y):
        return np.asarray(y, dtype=float) * self.scale + self.loc

    def log_det_forward(self, theta):
        theta = np.atleast_2d(theta)
        return np.full(theta.shape[0], -np.sum(np.log(self.scale)))

    def to_dict(self):
        return {"kind": self.kind, "loc": self.loc.tolist(), "scale": self.scale.tolist()}


class LogitTransform:
    """``y = logit((theta - low) / (high - low))`` per coordinate."""

    kind = "logit"

    def __init__(self, low, high):
        self.low = np.asarray(low, dtype=float)
        self.high = np.asarray(high, dtype=float)
        self.width = self.high - self.low

    def _unit(self, theta):
        p = (np.asarray(theta, dtype=float) - self.low) / self.width
        return np.clip(p, _EPS, 1.0 - _EPS)

    def forward(self, theta):
        p = self._unit(theta)
        return np.log(p) - np.log1p(-p)

    def inverse(self, y):
        return self.low + self.width * _logistic(y)

    def log_det_forward(self, theta):
        p = np.atleast_2d(self._unit(theta))
        return -np.sum(np.log(self.width) + np.log(p) + np.log1p(-p), axis=1)

    def to_dict(self):
        return {"kind": self.kind, "low": self.low.tolist(), "high": self.high.tolist()}


class OrderedPairLogitTransform:
    """Map ``low <= theta_2 <= theta_1 <= high`` onto R^2.

    ``p_1 = (theta_1 - low) / (high - low)`` and
    ``p_2 = (theta_2 - low) / (theta_1 - low)`` each go through a logit. For a
    prior uniform on ``theta_1`` and uniform on ``theta_2`` given ``theta_1``,
    both ``p`` are independent U(0, 1), and draws always respect the ordering.
    """

    kind = "ordered_pair_logit"

    def __init__(self, low, high):
        self.low, self.high = float(low), float(high)
        self.width = self.high - self.low

    def _units(self, theta):
        theta = np.asarray(theta, dtype=float)
        p1 = np.clip((theta[..., 0] - self.low) / self.width, _EPS, 1.0 - _EPS)
        span = np.maximum(theta[..., 0] - self.low, _EPS)
        p2 = np.clip((theta[..., 1] - self.low) / span, _EPS, 1.0 - _EPS)
        return p1, p2, span

    def forward(self, theta):
        p1, p2, _ = self._units(theta)
        return np.stack([np.log(p1) - np.log1p(-p1), np.log(p2) - np.log1p(-p2)], axis=-1)

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        first = self.low + self.width * _logistic(y[..., 0])
        second = self.low + (first - self.low) * _logistic(y[..., 1])
        return np.stack([first, second], axis=-1)

    def log_det_forward(self, theta):
        # triangular Jacobian: d y_1 / d theta_1 and d y_2 / d theta_2 on the diagonal
        p1, p2, span = self._units(np.atleast_2d(theta))
        return -(np.log(self.width) + np.log(p1) + np.log1p(-p1) + np.log(span) + np.log(p2) + np.log1p(-p2))

    def to_dict(self):
        return {"kind": self.kind, "low": self.low, "high": self.high}


def transform_from_dict(d):
    kind = d["kind"]
    if kind == "identity":
        return IdentityTransform()
    if kind == "affine":
        return AffineTransform(d["loc"], d["scale"])
    if kind == "logit":
        return LogitTransform(d["low"], d["high"])
    if kind == "ordered_pair_logit":
        return OrderedPairLogitTransform(d["low"], d["high"])
    raise ValueError(f"unknown transform kind {kind!r}")
