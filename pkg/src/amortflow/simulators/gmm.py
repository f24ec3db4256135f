"""Eight-cluster Gaussian mixture whose observed data is a one-hot colour label.

Clusters sit at angles ``2 pi k / 8`` (walking clockwise from angle 0) on a
circle of radius ``radius``. Clusters 1-4 are red, 5-6 green, 7 blue and 8
yellow. The parameters are the 2-D coordinates of a point drawn from the
mixture and the observation is the label of its cluster, so the exact
posterior given a label is the uniform mixture of that label's clusters.
"""

import numpy as np

from amortflow.simulators.base import SimulatorModel

LABELS = ("red", "green", "blue", "yellow")
CLUSTER_LABEL = np.array([0, 0, 0, 0, 1, 1, 2, 3])


def cluster_centers(radius=3.0, n_clusters=8):
    angles = -2.0 * np.pi * np.arange(n_clusters) / n_clusters
    return radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def _cluster_log_weights(theta, centers, std):
    d2 = ((theta[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)
    logits = -0.5 * d2 / std**2
    return logits - np.logaddexp.reduce(logits, axis=1, keepdims=True)


class GaussianMixture2D:
    """Isotropic 2-D Gaussian mixture used as an exact posterior."""

    def __init__(self, means, std, weights):
        self.means = np.asarray(means, dtype=float)
        self.std = float(std)
        self.weights = np.asarray(weights, dtype=float)

    def logpdf(self, theta):
        theta = np.atleast_2d(theta)
        d2 = ((theta[:, None, :] - self.means[None]) ** 2).sum(axis=-1)
        comp = -0.5 * d2 / self.std**2 - np.log(2 * np.pi * self.std**2)
        return np.logaddexp.reduce(comp + np.log(self.weights), axis=1)

    def sample(self, n, stream):
        k = stream.generator.choice(len(self.weights), size=n, p=self.weights)
        return self.means[k] + self.std * stream.generator.standard_normal((n, 2))


class GMMModel(SimulatorModel):
    name = "gmm"
    kind = "single"
    param_names = ("theta_1", "theta_2")
    data_names = LABELS
    size_range = (1, 1)

    def __init__(self, radius=3.0, std=0.5):
        self.radius = float(radius)
        self.std = float(std)
        self.centers = cluster_centers(self.radius)

    def sample_prior(self, n, stream):
        k = stream.generator.integers(0, 8, size=n)
        return self.centers[k] + self.std * stream.generator.standard_normal((n, 2))

    def label_probabilities(self, theta):
        """``p(label | theta)``: cluster responsibilities summed per label."""
        theta = self._check_theta(theta)
        resp = np.exp(_cluster_log_weights(theta, self.centers, self.std))
        out = np.zeros((theta.shape[0], len(LABELS)))
        for k, lab in enumerate(CLUSTER_LABEL):
            out[:, lab] += resp[:, k]
        return out

    def simulate(self, theta, size, stream):
        theta = self._check_theta(theta)
        if size != 1:
            raise ValueError("the mixture model emits exactly one label per parameter draw")
        resp = np.exp(_cluster_log_weights(theta, self.centers, self.std))
        u = stream.generator.random(theta.shape[0])
        k = np.minimum((np.cumsum(resp, axis=1) < u[:, None]).sum(axis=1), 7)
        onehot = np.zeros((theta.shape[0], 1, len(LABELS)))
        onehot[np.arange(theta.shape[0]), 0, CLUSTER_LABEL[k]] = 1.0
        return onehot

    def posterior(self, label):
        """Exact posterior for a label given by name, index or one-hot vector."""
        if isinstance(label, str):
            idx = LABELS.index(label)
        elif np.ndim(label) == 0:
            idx = int(label)
        else:
            idx = int(np.argmax(np.ravel(label)))
        members = np.flatnonzero(CLUSTER_LABEL == idx)
        return GaussianMixture2D(self.centers[members], self.std, np.full(len(members), 1 / len(members)))

    def options(self):
        return {"radius": self.radius, "std": self.std}


def gmm_posterior_oracle(label, radius=3.0, std=0.5):
    return GMMModel(radius, std).posterior(label)


def onehot(label):
    vec = np.zeros(len(LABELS))
    vec[LABELS.index(label) if isinstance(label, str) else int(label)] = 1.0
    return vec
