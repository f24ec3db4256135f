"""Summary networks: reduce a dataset of shape ``(batch, N, D_x)`` to ``(batch, S)``.

All summary networks share one calling convention, ``net(x) -> Tensor`` with
``x`` a batch of equally sized datasets, and expose ``output_dim``.
"""

import numpy as np

from amortflow.exceptions import ContractError
from amortflow.nn import MLP, Dense, Module, glorot_uniform
from amortflow.numerics import Tensor, as_tensor, broadcast_to, concat, conv1d, elu


def _as_batch(x):
    x = as_tensor(x)
    if x.ndim == 2:
        x = x.reshape(1, *x.shape)
    if x.ndim != 3:
        raise ContractError(f"datasets must have shape (batch, N, D_x), got {x.shape}")
    return x


class IdentitySummary(Module):
    """Pass a single observation (N = 1) straight through as the condition."""

    def __init__(self, input_dim):
        super().__init__()
        self.input_dim = input_dim
        self.output_dim = input_dim

    def __call__(self, x):
        x = _as_batch(x)
        if x.shape[1] != 1:
            raise ContractError(f"identity summary needs exactly one observation, got N={x.shape[1]}")
        if x.shape[2] != self.input_dim:
            raise ContractError(f"expected {self.input_dim} data columns, got {x.shape[2]}")
        return x[:, 0, :]


class EquivariantLayer(Module):
    """Row-wise dense map of ``concat(row, sum over rows of g(row))``.

    Permuting the rows of the input permutes the rows of the output.
    """

    def __init__(self, in_dim, out_dim, stream, pool_dim=None):
        super().__init__()
        pool_dim = pool_dim or out_dim
        self.pool_net = self.add_module("pool", Dense(in_dim, pool_dim, stream))
        self.row_net = self.add_module("row", Dense(in_dim + pool_dim, out_dim, stream))

    def pool(self, x):
        return elu(self.pool_net(x)).sum(axis=1)

    def __call__(self, x):
        batch, n, _ = x.shape
        pooled = self.pool(x)
        context = broadcast_to(pooled.reshape(batch, 1, -1), (batch, n, pooled.shape[-1]))
        return elu(self.row_net(concat([x, context], axis=-1)))


class InvariantSummary(Module):
    """Deep-set summary for exchangeable (i.i.d.) observations.

    A stack of equivariant layers is followed by an invariant sum-pool and a
    dense head. Sum pooling (rather than the mean) keeps the dataset size
    visible to the head so that posteriors can contract with N.
    """

    def __init__(self, input_dim, output_dim, stream, n_equivariant=2, hidden=64):
        super().__init__()
        self.input_dim, self.output_dim = input_dim, output_dim
        self.equivariant = []
        d = input_dim
        for i in range(n_equivariant):
            self.equivariant.append(self.add_module(f"equivariant.{i}", EquivariantLayer(d, hidden, stream)))
            d = hidden
        self.inner = self.add_module("inner", Dense(d, hidden, stream))
        self.head = self.add_module("head", MLP(hidden, (hidden,), output_dim, stream))

    def pooled(self, x):
        x = _as_batch(x)
        if x.shape[1] == 0:
            raise ContractError("empty dataset: need at least one observation")
        if x.shape[2] != self.input_dim:
            raise ContractError(f"expected {self.input_dim} data columns, got {x.shape[2]}")
        for layer in self.equivariant:
            x = layer(x)
        return elu(self.inner(x)).sum(axis=1)

    def __call__(self, x):
        return self.head(self.pooled(x))


class TemporalSummary(Module):
    """1-D convolutional summary for time series.

    Convolutions (kernel 3, stride 2, ELU) shrink the time axis, a global mean
    pool removes it, and a dense head emits ``output_dim`` values. With
    ``length_feature`` the log series length is appended to the pooled
    features, since mean pooling alone cannot tell a short series from a long
    one.
    """

    def __init__(
        self,
        input_dim,
        output_dim,
        stream,
        channels=(32, 64, 64),
        kernel_size=3,
        stride=2,
        min_length=16,
        hidden=64,
        length_feature=True,
    ):
        super().__init__()
        self.input_dim, self.output_dim = input_dim, output_dim
        self.kernel_size, self.stride = kernel_size, stride
        self.padding = kernel_size // 2
        self.min_length = min_length
        self.length_feature = length_feature
        self.n_conv = len(channels)
        c_in = input_dim
        for i, c_out in enumerate(channels):
            w = glorot_uniform(stream, kernel_size * c_in, kernel_size * c_out, (kernel_size, c_in, c_out))
            self.add_parameter(f"conv.{i}.kernel", w)
            self.add_parameter(f"conv.{i}.bias", np.zeros(c_out))
            c_in = c_out
        head_in = c_in + (1 if length_feature else 0)
        self.head = self.add_module("head", MLP(head_in, (hidden,), output_dim, stream))

    def __call__(self, x):
        x = _as_batch(x)
        batch, length, dim = x.shape
        if length < self.min_length:
            raise ContractError(f"series of length {length} shorter than minimum {self.min_length}")
        if dim != self.input_dim:
            raise ContractError(f"expected {self.input_dim} data columns, got {dim}")
        h = x
        for i in range(self.n_conv):
            h = conv1d(h, self.param(f"conv.{i}.kernel"), self.stride, self.padding)
            h = elu(h + self.param(f"conv.{i}.bias"))
        pooled = h.mean(axis=1)
        if self.length_feature:
            feat = Tensor(np.full((batch, 1), np.log(length)))
            pooled = concat([pooled, feat], axis=-1)
        return self.head(pooled)


class StandardizedFeatureSummary(Module):
    """Fixed (non-trainable) summary of precomputed features.

    Each dataset arrives as a single row of hand-crafted statistics. The row is
    shifted by ``loc``, divided by ``scale`` and passed through ``arcsinh`` to
    tame heavy tails; all three steps are monotone, so no information in the
    statistics is lost.
    """

    def __init__(self, loc, scale):
        super().__init__()
        self.add_buffer("loc", loc)
        self.add_buffer("scale", scale)
        self.input_dim = self.output_dim = len(np.atleast_1d(loc))

    def __call__(self, x):
        x = _as_batch(x)
        if x.shape[1] != 1 or x.shape[2] != self.input_dim:
            raise ContractError(f"expected one row of {self.input_dim} features per dataset, got {x.shape[1:]}")
        z = (x.data[:, 0, :] - self.buffer("loc")) / self.buffer("scale")
        return Tensor(np.arcsinh(z))


def identity_summary(x):
    """Return a single observation unchanged (contract: exactly one row)."""
    x = np.asarray(x)
    if x.ndim == 2:
        if x.shape[0] != 1:
            raise ContractError(f"identity summary needs exactly one observation, got N={x.shape[0]}")
        x = x[0]
    return x


def invariant_summary(net, x_set):
    return net(x_set).data


def temporal_summary(net, x_series):
    return net(x_series).data
