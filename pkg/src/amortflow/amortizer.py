"""The trainable pair of summary network and conditional INN, bundled with the
model's preprocessing and parameter transform.

An :class:`Amortizer` is everything needed to go from raw simulator output to
posterior draws or log densities in the model's own parameterisation.
"""

from dataclasses import asdict, dataclass

import numpy as np

from amortflow.exceptions import ConfigurationError, ContractError
from amortflow.flow import ConditionalINN
from amortflow.nn import Module
from amortflow.numerics import RngStream, Tensor, no_grad
from amortflow.simulators.base import valid_rows
from amortflow.summary import IdentitySummary, InvariantSummary, StandardizedFeatureSummary, TemporalSummary
from amortflow.transforms import transform_from_dict

SUMMARY_KINDS = ("auto", "identity", "invariant", "temporal", "handcrafted")


@dataclass
class NetworkConfig:
    """Architecture of the summary network and the conditional INN.

    Attributes
    ----------
    n_blocks : int
        Number of affine coupling blocks.
    hidden : tuple of int
        Hidden widths of each coupling subnetwork.
    clamp : float
        Soft-clamp ceiling for coupling scales.
    summary : str
        One of ``auto``, ``identity``, ``invariant``, ``temporal``,
        ``handcrafted``. ``auto`` picks by the model's data kind.
    summary_dim : int
        Output size ``S`` of a learned summary network.
    summary_hidden : int
        Width of the summary network's dense layers.
    n_equivariant : int
        Equivariant layers in the invariant summary.
    channels : tuple of int
        Convolution channels of the temporal summary.
    min_length : int
        Shortest series the temporal summary accepts.
    """

    n_blocks: int = 5
    hidden: tuple = (64, 64)
    clamp: float = 1.9
    summary: str = "auto"
    summary_dim: int = 128
    summary_hidden: int = 64
    n_equivariant: int = 2
    channels: tuple = (32, 64, 64)
    min_length: int = 16

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        self.channels = tuple(int(c) for c in self.channels)
        if self.summary not in SUMMARY_KINDS:
            raise ConfigurationError(f"summary must be one of {SUMMARY_KINDS}, got {self.summary!r}")
        if self.n_blocks < 1:
            raise ConfigurationError("n_blocks must be at least 1")
        if self.summary_dim < 1 or not self.hidden or min(self.hidden) < 1:
            raise ConfigurationError("network widths must be positive")
        if self.clamp is not None and self.clamp <= 0:
            raise ConfigurationError("clamp must be positive")

    def to_dict(self):
        d = asdict(self)
        d["hidden"], d["channels"] = list(self.hidden), list(self.channels)
        return d


def resolve_summary_kind(model, network):
    if network.summary != "auto":
        return network.summary
    if model.name == "lv_handcrafted":
        return "handcrafted"
    return {"single": "identity", "iid": "invariant", "series": "temporal"}[model.kind]


def handcrafted_standardization(model, stream, n_pilot=1000):
    """Robust location/scale (median, IQR / 1.349) of the model's features on a prior pilot run."""
    theta = model.sample_prior(n_pilot, stream)
    x = model.simulate(theta, model.size_range[1], stream)
    feats = model.preprocess(x[valid_rows(x)])[:, 0, :]
    q25, q50, q75 = np.percentile(feats, [25, 50, 75], axis=0)
    scale = np.maximum((q75 - q25) / 1.349, 1e-6)
    return q50, scale


def build_summary(model, network, stream):
    kind = resolve_summary_kind(model, network)
    if kind == "identity":
        return IdentitySummary(model.feature_dim)
    if kind == "invariant":
        return InvariantSummary(
            model.feature_dim, network.summary_dim, stream, network.n_equivariant, network.summary_hidden
        )
    if kind == "temporal":
        return TemporalSummary(
            model.feature_dim,
            network.summary_dim,
            stream,
            channels=network.channels,
            min_length=network.min_length,
            hidden=network.summary_hidden,
        )
    if not hasattr(model, "feature_names"):
        raise ConfigurationError(f"model {model.name!r} has no hand-crafted features")
    loc, scale = handcrafted_standardization(model, stream.child("pilot"))
    return StandardizedFeatureSummary(loc, scale)


class Amortizer(Module):
    """Summary network ``h_psi`` and conditional INN ``f_phi`` trained as one unit.

    The flow works on ``y = transform(theta)``; densities returned by
    :meth:`log_posterior` include the transform's log-Jacobian, so they are
    densities over ``theta`` itself.
    """

    def __init__(self, model, summary_net, inn, transform):
        super().__init__()
        self.model = model
        self.summary_net = self.add_module("summary", summary_net)
        self.inn = self.add_module("inn", inn)
        self.transform = transform

    @property
    def dim(self):
        return self.inn.dim

    def summarize(self, x, preprocessed=False):
        """Summary vectors ``(batch, S)`` as a Tensor for raw datasets ``(batch, N, D_x)``."""
        x = np.asarray(x)
        if x.ndim == 2:
            x = x[None]
        if x.ndim != 3:
            raise ContractError(f"datasets must have shape (batch, N, D_x), got {x.shape}")
        if not preprocessed:
            x = self.model.preprocess(x)
        return self.summary_net(x)

    def loss(self, theta, x, preprocessed=False):
        """Mean negative log density of the transformed parameters, less the constant.

        ``mean(|z|^2 / 2 - log|det J|)`` over the batch, returned as a scalar Tensor.
        """
        cond = self.summarize(x, preprocessed)
        y = self.transform.forward(theta)
        z, logdet = self.inn.forward(y, cond)
        per_row = (z * z).sum(axis=1) * 0.5 - logdet
        return per_row.mean()

    def sample(self, x, n_draws, stream):
        """``n_draws`` posterior draws for one dataset ``x`` of shape ``(N, D_x)``."""
        if n_draws < 1:
            raise ContractError("number of draws must be at least 1")
        with no_grad():
            cond = self.summarize(np.asarray(x)[None]).data
        z = stream.generator.standard_normal((n_draws, self.dim))
        y = self.inn.inverse(z, np.repeat(cond, n_draws, axis=0))
        return self.transform.inverse(y), cond[0]

    def log_posterior(self, theta, x):
        """Log posterior density of each row of ``theta`` given one dataset ``x``."""
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        if theta.shape[1] != self.dim:
            raise ContractError(f"theta must have {self.dim} columns, got {theta.shape[1]}")
        inside = self.model.in_support(theta)
        out = np.full(theta.shape[0], -np.inf)
        if inside.any():
            with no_grad():
                cond = self.summarize(np.asarray(x)[None]).data
                th = theta[inside]
                y = self.transform.forward(th)
                logq = self.inn.log_density(Tensor(y), np.repeat(cond, len(th), axis=0)).data
            out[inside] = logq + self.transform.log_det_forward(th)
        return out


def build_amortizer(model, network, seed, transform=None):
    """Fresh, deterministically initialised networks for ``model``."""
    stream = RngStream(seed, 0xA11)
    summary_net = build_summary(model, network, stream.child("summary"))
    inn = ConditionalINN(
        model.dim, summary_net.output_dim, network.n_blocks, stream.child("inn"), network.hidden, network.clamp
    )
    if transform is None:
        transform = model.default_transform()
    elif isinstance(transform, dict):
        transform = transform_from_dict(transform)
    return Amortizer(model, summary_net, inn, transform)
