"""Conditional invertible network built from affine coupling blocks.

The network maps parameters ``theta`` to a latent ``z`` of the same dimension,
conditioned on a summary vector of the data. Every coupling block is preceded
by a fixed permutation, and its four internal subnetworks receive the summary
vector as an extra input. All operations accept a batch: ``theta`` of shape
``(batch, D)`` and ``cond`` of shape ``(batch, S)``; single vectors are
promoted to a batch of one.
"""

import numpy as np

from amortflow.exceptions import ConfigurationError, DimensionError, NumericError
from amortflow.nn import MLP, Module
from amortflow.numerics import Tensor, arctan, as_tensor, concat, exp, no_grad, take

LOG_2PI = np.log(2.0 * np.pi)


def soft_clamp(s, clamp):
    """Squash scale outputs into ``(-clamp, clamp)`` via ``clamp * 2/pi * arctan(s / clamp)``."""
    if clamp is None:
        return s
    return arctan(s * (1.0 / clamp)) * (2.0 * clamp / np.pi)


def _batch2d(x, dim, what):
    x = as_tensor(x)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != dim:
        raise DimensionError(f"{what}: expected trailing dimension {dim}, got shape {x.shape}")
    return x


class Permutation:
    """Fixed, non-trainable permutation of the parameter axis."""

    def __init__(self, indices):
        indices = np.asarray(indices, dtype=np.intp)
        if sorted(indices.tolist()) != list(range(len(indices))):
            raise ConfigurationError("permutation indices must be a bijection of 0..D-1")
        self.indices = indices
        self.inverse_indices = np.argsort(indices)

    @classmethod
    def random(cls, dim, stream):
        return cls(stream.permutation(dim))

    def forward(self, x):
        return take(x, self.indices, axis=-1)

    def inverse(self, x):
        return take(x, self.inverse_indices, axis=-1)


class CouplingBlock(Module):
    """Affine coupling block with conditional subnetworks ``s1, t1, s2, t2``.

    With ``u = (u1, u2)``, ``d1 = D // 2``::

        v1 = u1 * exp(s1(u2, c)) + t1(u2, c)
        v2 = u2 * exp(s2(v1, c)) + t2(v1, c)

    where the scale outputs are soft-clamped. The final layer of every subnet
    starts at zero, so a fresh block is the identity map.
    """

    def __init__(self, dim, cond_dim, stream, hidden=(64, 64), clamp=1.9):
        super().__init__()
        if dim < 2:
            raise ConfigurationError("coupling blocks need a parameter dimension of at least 2")
        self.dim, self.cond_dim, self.clamp = dim, cond_dim, clamp
        self.d1 = dim // 2
        self.d2 = dim - self.d1
        self.s1 = self.add_module("s1", MLP(self.d2 + cond_dim, hidden, self.d1, stream, True))
        self.t1 = self.add_module("t1", MLP(self.d2 + cond_dim, hidden, self.d1, stream, True))
        self.s2 = self.add_module("s2", MLP(self.d1 + cond_dim, hidden, self.d2, stream, True))
        self.t2 = self.add_module("t2", MLP(self.d1 + cond_dim, hidden, self.d2, stream, True))

    def _scale_shift(self, s_net, t_net, h, cond):
        inp = concat([h, cond], axis=-1) if self.cond_dim else h
        return soft_clamp(s_net(inp), self.clamp), t_net(inp)

    def forward(self, u, cond):
        """Return ``(v, logdet)`` with ``logdet`` of shape ``(batch,)``."""
        u1, u2 = u[:, : self.d1], u[:, self.d1 :]
        s1, t1 = self._scale_shift(self.s1, self.t1, u2, cond)
        v1 = u1 * exp(s1) + t1
        s2, t2 = self._scale_shift(self.s2, self.t2, v1, cond)
        v2 = u2 * exp(s2) + t2
        logdet = s1.sum(axis=1) + s2.sum(axis=1)
        return concat([v1, v2], axis=-1), logdet

    def inverse(self, v, cond):
        v1, v2 = v[:, : self.d1], v[:, self.d1 :]
        s2, t2 = self._scale_shift(self.s2, self.t2, v1, cond)
        u2 = (v2 - t2) * exp(-1.0 * s2)
        s1, t1 = self._scale_shift(self.s1, self.t1, u2, cond)
        u1 = (v1 - t1) * exp(-1.0 * s1)
        return concat([u1, u2], axis=-1)


class ConditionalINN(Module):
    """Chain of ``n_blocks`` permutation + coupling stages.

    Parameters
    ----------
    dim : int
        Parameter dimension ``D`` (at least 2).
    cond_dim : int
        Size ``S`` of the conditioning summary vector.
    n_blocks : int
        Number of coupling blocks.
    stream : RngStream
        Source for weight initialisation and the fixed permutations.
    hidden : tuple of int
        Hidden layer widths of every internal subnetwork.
    clamp : float or None
        Soft-clamp ceiling for the scale outputs.
    """

    def __init__(self, dim, cond_dim, n_blocks, stream, hidden=(64, 64), clamp=1.9):
        super().__init__()
        if dim < 2:
            raise ConfigurationError(f"parameter dimension must be >= 2, got {dim}")
        if n_blocks < 1:
            raise ConfigurationError("need at least one coupling block")
        self.dim, self.cond_dim = dim, cond_dim
        self.hidden, self.clamp = tuple(hidden), clamp
        self.permutations = []
        self.blocks = []
        for k in range(n_blocks):
            self.permutations.append(Permutation.random(dim, stream))
            block = CouplingBlock(dim, cond_dim, stream, hidden, clamp)
            self.blocks.append(self.add_module(f"blocks.{k}", block))

    @property
    def n_blocks(self):
        return len(self.blocks)

    def append_identity_block(self, stream):
        """Add one more (identity-initialised) stage at the end of the chain."""
        k = len(self.blocks)
        self.permutations.append(Permutation.random(self.dim, stream))
        block = CouplingBlock(self.dim, self.cond_dim, stream, self.hidden, self.clamp)
        self.blocks.append(self.add_module(f"blocks.{k}", block))

    def _cond(self, cond, batch):
        if self.cond_dim == 0:
            return Tensor(np.zeros((batch, 0)))
        cond = _batch2d(cond, self.cond_dim, "condition")
        if cond.shape[0] != batch:
            raise DimensionError(f"condition batch {cond.shape[0]} != parameter batch {batch}")
        return cond

    def forward(self, theta, cond):
        """Map ``theta -> z``; returns ``(z, total_logdet)``."""
        x = _batch2d(theta, self.dim, "theta")
        cond = self._cond(cond, x.shape[0])
        total = None
        for k, (perm, block) in enumerate(zip(self.permutations, self.blocks)):
            x = perm.forward(x)
            try:
                x, logdet = block.forward(x, cond)
            except NumericError as err:
                raise NumericError(f"coupling block {k}: {err}", where=f"block {k}") from err
            total = logdet if total is None else total + logdet
        return x, total

    def inverse(self, z, cond):
        """Map ``z -> theta`` by undoing every stage in reverse order."""
        with no_grad():
            x = _batch2d(z, self.dim, "z")
            cond = self._cond(cond, x.shape[0])
            for k in reversed(range(self.n_blocks)):
                try:
                    x = self.blocks[k].inverse(x, cond)
                except NumericError as err:
                    raise NumericError(f"coupling block {k}: {err}", where=f"block {k}") from err
                x = self.permutations[k].inverse(x)
        return x.data

    def log_density(self, theta, cond):
        """Log density of ``theta`` under the flow: standard normal on ``z`` plus log-det."""
        z, logdet = self.forward(theta, cond)
        sq = (z * z).sum(axis=1)
        return sq * -0.5 + logdet - 0.5 * self.dim * LOG_2PI

    def permutation_indices(self):
        return [p.indices.tolist() for p in self.permutations]

    def set_permutations(self, indices):
        if len(indices) != self.n_blocks:
            raise ConfigurationError("one permutation per block is required")
        self.permutations = [Permutation(idx) for idx in indices]
        for p in self.permutations:
            if len(p.indices) != self.dim:
                raise ConfigurationError("permutation length does not match dimension")


def acb_forward(block, u, cond):
    """Functional form of :meth:`CouplingBlock.forward` returning numpy values."""
    u = _batch2d(u, block.dim, "u")
    cond = as_tensor(np.zeros((u.shape[0], 0))) if block.cond_dim == 0 else _batch2d(
        cond, block.cond_dim, "condition"
    )
    with no_grad():
        v, logdet = block.forward(u, cond)
    return v.data, logdet.data


def acb_inverse(block, v, cond):
    v = _batch2d(v, block.dim, "v")
    cond = as_tensor(np.zeros((v.shape[0], 0))) if block.cond_dim == 0 else _batch2d(
        cond, block.cond_dim, "condition"
    )
    with no_grad():
        return block.inverse(v, cond).data


def cinn_forward(network, theta, summary):
    with no_grad():
        z, logdet = network.forward(theta, summary)
    return z.data, logdet.data


def cinn_inverse(network, z, summary):
    return network.inverse(z, summary)


def log_posterior_density(network, theta, summary):
    """``-D/2 log(2 pi) - |f(theta; summary)|^2 / 2 + log|det J|`` per batch row."""
    with no_grad():
        return network.log_density(theta, summary).data
