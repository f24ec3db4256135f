"""Finite-difference gradient checks for scalar functions of one Tensor."""

import numpy as np

from amortflow.numerics.tensor import Tensor

# (offset, weight) pairs of central-difference stencils, in units of eps
_STENCILS = {
    2: ((1, 0.5), (-1, -0.5)),
    4: ((2, -1 / 12), (1, 8 / 12), (-1, -8 / 12), (-2, 1 / 12)),
}


def central_difference(f, eps=1e-6, order=2):
    """Derivative at 0 of ``f(h)`` by a central stencil of the given order (2 or 4).

    The fourth-order stencil tolerates a larger ``eps``, which keeps
    floating point cancellation small for gradients near zero.
    """
    if order not in _STENCILS:
        raise ValueError(f"order must be one of {sorted(_STENCILS)}")
    return sum(w * f(k * eps) for k, w in _STENCILS[order]) / eps


def numerical_gradient(function, x, eps=1e-6, order=2):
    """Central-difference gradient of a scalar ``function(Tensor) -> Tensor`` at ``x``."""
    x = np.array(x, dtype=np.float64, copy=True)
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]

        def shifted(h):
            flat[i] = orig + h
            return float(function(Tensor(x.copy())).data)

        gflat[i] = central_difference(shifted, eps, order)
        flat[i] = orig
    return grad


def analytic_gradient(function, x):
    leaf = Tensor(np.array(x, dtype=np.float64, copy=True), requires_grad=True)
    out = function(leaf)
    if out.requires_grad:
        out.backward()
    return np.zeros_like(leaf.data) if leaf.grad is None else leaf.grad


def grad_check(function, x, eps=1e-6, order=2):
    """Max relative error between backprop and central differences.

    The error per coordinate is ``|analytic - numeric| / (|analytic| + 1e-12)``.
    """
    analytic = analytic_gradient(function, x)
    numeric = numerical_gradient(function, x, eps, order)
    return float(np.max(np.abs(analytic - numeric) / (np.abs(analytic) + 1e-12)))
