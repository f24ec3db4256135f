"""Amortized Bayesian inference with conditional invertible networks.

Train a summary network and a conditional invertible network jointly on
simulated data once, then draw posterior samples for any number of observed
datasets with a single inverse pass each.
"""

from amortflow.amortizer import Amortizer, NetworkConfig, build_amortizer
from amortflow.checkpoint import load_checkpoint, save_checkpoint
from amortflow.config import RunConfig
from amortflow.flow import ConditionalINN, CouplingBlock
from amortflow.inference import (
    PosteriorSample,
    evaluate_log_posterior,
    make_sampler,
    sample_posterior,
    sample_posterior_batch,
)
from amortflow.numerics import RngStream
from amortflow.simulators import build_model
from amortflow.training import TrainConfig, train_online

__version__ = "0.1.0"

__all__ = [
    "Amortizer",
    "ConditionalINN",
    "CouplingBlock",
    "NetworkConfig",
    "PosteriorSample",
    "RngStream",
    "RunConfig",
    "TrainConfig",
    "build_amortizer",
    "build_model",
    "evaluate_log_posterior",
    "load_checkpoint",
    "make_sampler",
    "sample_posterior",
    "sample_posterior_batch",
    "save_checkpoint",
    "train_online",
]
