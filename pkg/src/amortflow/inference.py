"""Amortized posterior sampling and density evaluation.

Nothing here modifies network parameters: a trained :class:`Amortizer` is
only read, so any number of datasets can be processed against it.
"""

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from amortflow.exceptions import AmortflowError
from amortflow.numerics import RngStream, derive_stream_id


@dataclass
class PosteriorSample:
    """``L`` posterior draws for one observed dataset.

    Attributes
    ----------
    dataset_id : str
    draws : ndarray, shape (L, D)
    summary : ndarray, shape (S,)
        Summary vector the flow was conditioned on.
    checkpoint_id : str
    seed : int
    """

    dataset_id: str
    draws: np.ndarray
    summary: np.ndarray
    checkpoint_id: str = ""
    seed: int = 0

    @property
    def mean(self):
        return self.draws.mean(axis=0)

    @property
    def std(self):
        return self.draws.std(axis=0, ddof=1) if len(self.draws) > 1 else np.zeros(self.draws.shape[1])


@dataclass
class BatchResult:
    """Per-dataset samples in input order; failed datasets map to their error message."""

    samples: list
    errors: dict = field(default_factory=dict)


def dataset_stream(seed, dataset_id):
    """Stream for one dataset, derived from the run seed and the dataset's identifier."""
    return RngStream(seed, derive_stream_id("posterior", str(dataset_id)))


def sample_posterior(amortizer, x_obs, n_draws, stream, dataset_id="0", checkpoint_id="", seed=0):
    """Summarise ``x_obs`` once and invert ``n_draws`` standard-normal latents through the flow."""
    draws, summary = amortizer.sample(x_obs, n_draws, stream)
    return PosteriorSample(str(dataset_id), draws, summary, checkpoint_id, seed)


def sample_posterior_batch(amortizer, datasets, n_draws, seed, ids=None, checkpoint_id="", threads=1):
    """Sample every dataset with its own stream, so results do not depend on order or threading.

    Errors raised for individual datasets are collected in ``BatchResult.errors``
    and the corresponding entry of ``samples`` is ``None``.
    """
    ids = [str(i) for i in (range(len(datasets)) if ids is None else ids)]

    def one(args):
        key, x = args
        try:
            return sample_posterior(amortizer, x, n_draws, dataset_stream(seed, key), key, checkpoint_id, seed), None
        except (AmortflowError, ValueError, FloatingPointError) as err:
            return None, f"{type(err).__name__}: {err}"

    jobs = list(zip(ids, datasets))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, jobs))
    else:
        results = [one(job) for job in jobs]
    errors = {key: err for key, (_, err) in zip(ids, results) if err is not None}
    return BatchResult([s for s, _ in results], errors)


def evaluate_log_posterior(amortizer, theta, x_obs):
    """Log posterior density of each row of ``theta`` given ``x_obs``."""
    return amortizer.log_posterior(theta, x_obs)


def make_sampler(amortizer):
    """Adapter ``sampler(x, L, stream) -> (L, D) draws`` for the diagnostics module."""

    def sampler(x, n_draws, stream):
        return amortizer.sample(x, n_draws, stream)[0]

    return sampler


def write_samples(path, samples, param_names):
    """Dump ``(dataset_id, draw_index, theta_1..theta_D)`` rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["dataset_id", "draw_index", *param_names])
        for s in samples:
            if s is None:
                continue
            for i, row in enumerate(s.draws):
                writer.writerow([s.dataset_id, i, *map(repr, row.tolist())])


def read_samples(path):
    """Inverse of :func:`write_samples`: ``{dataset_id: (L, D) array}`` and the parameter names."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        for row in reader:
            out.setdefault(row[0], []).append([float(v) for v in row[2:]])
    return {k: np.asarray(v) for k, v in out.items()}, header[2:]
