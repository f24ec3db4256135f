"""Shared test utilities: weight perturbation and parameter-wise gradient checks."""

import numpy as np

from amortflow.numerics import central_difference


def randomize(module, stream, scale=0.3):
    """Add Gaussian noise to every parameter so zero-initialised layers stop being trivial."""
    for _, p in module.named_parameters():
        p.data += scale * stream.generator.standard_normal(p.data.shape)
    return module


def parameter_grad_check(loss_fn, module, eps=1e-4, order=4):
    """Max relative error ``|a - n| / (|a| + 1e-12)`` over all parameters of ``module``.

    ``loss_fn()`` must build a fresh graph from the module's current parameter
    values and return a scalar Tensor. The default fourth-order stencil keeps
    cancellation error well below the tolerance even for gradients near 1e-6.
    """
    module.zero_grad()
    loss_fn().backward()
    worst = 0.0
    for _, p in module.named_parameters():
        analytic = np.zeros_like(p.data) if p.grad is None else p.grad.copy()
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]

            def shifted(h):
                flat[i] = orig + h
                return float(loss_fn().data)

            numeric = central_difference(shifted, eps, order)
            flat[i] = orig
            a = analytic.reshape(-1)[i]
            worst = max(worst, abs(a - numeric) / (abs(a) + 1e-12))
    module.zero_grad()
    return worst


def numerical_jacobian(fn, x, eps=1e-6):
    """Central-difference Jacobian of ``fn: R^D -> R^D`` at ``x``."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = eps
        cols.append((fn(x + e) - fn(x - e)) / (2 * eps))
    return np.stack(cols, axis=1)
