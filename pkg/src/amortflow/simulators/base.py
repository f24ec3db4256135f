import numpy as np

from amortflow.transforms import IdentityTransform, LogitTransform


class SimulatorModel:
    """Common contract for forward models.

    A model samples parameters from its prior and turns a batch of parameter
    vectors into a batch of datasets with ``simulate(theta, size, stream)``,
    which returns an array of shape ``(batch, size, data_dim)``. The result is
    a pure function of the inputs and the stream state. Rows the simulator
    rejects (e.g. a diverging ODE) come back filled with NaN.

    ``kind`` is one of ``"single"`` (one observation, N = 1), ``"iid"``
    (exchangeable observations) or ``"series"`` (time series of length T).
    """

    name = "base"
    kind = "single"
    param_names = ()
    data_names = ()
    size_range = (1, 1)

    @property
    def dim(self):
        return len(self.param_names)

    @property
    def data_dim(self):
        return len(self.data_names)

    @property
    def feature_dim(self):
        """Columns of :meth:`preprocess` output, i.e. the summary network's input width."""
        return self.data_dim

    def prior_bounds(self):
        """``(low, high)`` arrays for box-bounded priors, else ``None``."""
        return None

    def sample_prior(self, n, stream):
        raise NotImplementedError

    def simulate(self, theta, size, stream):
        raise NotImplementedError

    def preprocess(self, x):
        """Map raw simulator output to the float input of the summary network."""
        return np.asarray(x, dtype=float)

    def default_transform(self):
        bounds = self.prior_bounds()
        if bounds is None:
            return IdentityTransform()
        return LogitTransform(*bounds)

    def in_support(self, theta):
        theta = np.atleast_2d(theta)
        bounds = self.prior_bounds()
        if bounds is None:
            return np.ones(theta.shape[0], dtype=bool)
        low, high = bounds
        return np.all((theta >= low) & (theta <= high), axis=1)

    def options(self):
        """Constructor keyword arguments, used to rebuild the model from a config."""
        return {}

    def _check_theta(self, theta):
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        if theta.shape[1] != self.dim:
            raise ValueError(f"{self.name}: expected {self.dim} parameters, got {theta.shape[1]}")
        return theta


def valid_rows(x):
    """Boolean mask of simulated datasets that were not rejected."""
    x = np.asarray(x)
    if not np.issubdtype(x.dtype, np.floating):
        return np.ones(x.shape[0], dtype=bool)
    return np.all(np.isfinite(x.reshape(x.shape[0], -1)), axis=1)
