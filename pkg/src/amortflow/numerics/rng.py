"""Seeded, counter-based random streams and the samplers the simulators need.

A stream is keyed by ``(seed, stream_id)`` on top of the Philox counter-based
generator, so any number of streams can be created independently (one per
dataset, per worker, per training iteration) and replayed bit for bit.
"""

import hashlib

import numpy as np

from amortflow.exceptions import ParameterError

_MASK64 = (1 << 64) - 1

# Rates below this use sequential inversion; larger ones use numpy's PTRS sampler.
POISSON_INVERSION_LIMIT = 30.0


def derive_stream_id(*parts):
    """Hash an arbitrary tuple of ints/strings into a 64-bit stream id."""
    text = "/".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


class RngStream:
    """Reproducible random stream identified by ``(seed, stream_id)``.

    Two instances constructed with the same pair produce identical sequences.
    """

    def __init__(self, seed, stream_id=0):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        key = self.seed | (self.stream_id << 64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    @property
    def generator(self):
        return self._gen

    @property
    def counter(self):
        return int(self._gen.bit_generator.state["state"]["counter"][0])

    def child(self, *parts):
        """Independent stream derived from this one's identity and ``parts``."""
        return RngStream(self.seed, derive_stream_id(self.stream_id, *parts))

    def integers(self, low, high, size=None):
        """Uniform integers in the closed range ``[low, high]``."""
        return self._gen.integers(low, high, size=size, endpoint=True)

    def permutation(self, n):
        return self._gen.permutation(n)


def sample_gaussian(stream, size, mean=0.0, std=1.0):
    std = np.asarray(std, dtype=float)
    if np.any(std < 0) or not np.all(np.isfinite(std)):
        raise ParameterError("gaussian standard deviation must be finite and >= 0")
    return mean + std * stream.generator.standard_normal(size)


def sample_uniform(stream, low, high, size=None):
    low = np.asarray(low, dtype=float)
    high = np.asarray(high, dtype=float)
    if np.any(high < low):
        raise ParameterError("uniform requires low <= high")
    if size is None:
        size = np.broadcast_shapes(low.shape, high.shape)
    u = stream.generator.random(size)
    return low + (high - low) * u


def sample_poisson(stream, rate):
    """Poisson draws with elementwise ``rate``.

    Small rates use inversion by sequential search; rates of
    ``POISSON_INVERSION_LIMIT`` and above are handed to numpy's PTRS
    rejection sampler.
    """
    rate = np.asarray(rate, dtype=float)
    if np.any(rate < 0) or not np.all(np.isfinite(rate)):
        raise ParameterError("poisson rate must be finite and >= 0")
    out = np.zeros(rate.shape, dtype=np.int64)
    small = rate < POISSON_INVERSION_LIMIT
    if np.any(small):
        out[small] = _poisson_inversion(stream, rate[small])
    if not np.all(small):
        out[~small] = stream.generator.poisson(rate[~small])
    return out


def _poisson_inversion(stream, rate):
    u = stream.generator.random(rate.shape)
    k = np.zeros(rate.shape, dtype=np.int64)
    p = np.exp(-rate)
    cdf = p.copy()
    active = u > cdf
    while np.any(active):
        k[active] += 1
        p[active] *= rate[active] / k[active]
        cdf[active] += p[active]
        # cdf can stall just below 1 in floating point; p underflowing ends the search
        active &= (u > cdf) & (p > 0)
    return k


def sample_binomial(stream, n, p):
    n = np.asarray(n)
    p = np.asarray(p, dtype=float)
    if np.any(n < 0):
        raise ParameterError("binomial count must be >= 0")
    if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
        raise ParameterError("binomial probability must lie in [0, 1]")
    return stream.generator.binomial(n.astype(np.int64), p)
