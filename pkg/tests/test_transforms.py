import numpy as np
import pytest

from amortflow.numerics import RngStream
from amortflow.simulators import SIRModel, build_model
from amortflow.transforms import (
    AffineTransform,
    IdentityTransform,
    LogitTransform,
    OrderedPairLogitTransform,
    transform_from_dict,
)

from helpers import numerical_jacobian

TRANSFORMS = [
    (IdentityTransform(), lambda g: g.standard_normal((20, 3))),
    (AffineTransform([1.0, -2.0], [0.5, 3.0]), lambda g: g.standard_normal((20, 2))),
    (LogitTransform([0.0, 1.0, 0.05], [15.0, 90.0, 0.7]), lambda g: [0.0, 1.0, 0.05] + g.random((20, 3)) * [15, 89, 0.65]),
    (OrderedPairLogitTransform(0.01, 1.0), lambda g: SIRModel().sample_prior(20, RngStream(int(g.integers(1000))))),
]


@pytest.mark.parametrize("transform, draw", TRANSFORMS, ids=lambda t: getattr(t, "kind", ""))
def test_round_trip_and_log_jacobian(transform, draw):
    theta = np.asarray(draw(np.random.default_rng(0)), dtype=float)
    assert np.allclose(transform.inverse(transform.forward(theta)), theta, rtol=1e-12, atol=1e-12)
    logdet = transform.log_det_forward(theta)
    for i in range(len(theta)):
        jac = numerical_jacobian(lambda t: transform.forward(t[None])[0], theta[i], eps=1e-7)
        assert np.isclose(logdet[i], np.linalg.slogdet(jac)[1], rtol=1e-5, atol=1e-6)
    again = transform_from_dict(transform.to_dict())
    assert np.array_equal(again.forward(theta), transform.forward(theta))


def test_ordered_pair_maps_sir_prior_to_independent_uniforms():
    model = SIRModel()
    theta = model.sample_prior(20000, RngStream(3))
    y = model.default_transform().forward(theta)
    u = 0.5 * (1 + np.tanh(0.5 * y))
    assert np.all(np.abs(u.mean(0) - 0.5) < 0.01)
    assert abs(np.corrcoef(u.T)[0, 1]) < 0.03


def test_ordered_pair_inverse_stays_in_support():
    model = SIRModel()
    y = 30 * np.random.default_rng(1).standard_normal((5000, 2))
    assert np.all(model.in_support(model.default_transform().inverse(y)))


def test_logit_inverse_stays_in_box():
    model = build_model("ricker")
    y = 50 * np.random.default_rng(2).standard_normal((1000, 3))
    theta = model.default_transform().inverse(y)
    low, high = model.prior_bounds()
    assert np.all((theta >= low) & (theta <= high))
