import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amortflow.exceptions import DimensionError, NumericError, ParameterError
from amortflow.numerics import (
    RngStream,
    Tensor,
    add,
    arctan,
    concat,
    conv1d,
    elu,
    exp,
    grad_check,
    linear,
    log,
    matmul,
    mean_over_axis,
    multiply,
    no_grad,
    sample_binomial,
    sample_gaussian,
    sample_poisson,
    sample_uniform,
    slice_,
    square,
    sub,
    sum_over_axis,
    take,
    tanh,
)
from amortflow.numerics.rng import POISSON_INVERSION_LIMIT


def test_matmul_identity():
    a = np.arange(12.0).reshape(3, 4)
    assert np.array_equal(matmul(np.eye(3), a).data, a)


def test_elu_limits():
    assert elu(Tensor(0.0)).data == 0.0
    assert abs(elu(Tensor(-30.0)).data + 1.0) < 1e-9
    assert elu(Tensor(2.5)).data == 2.5


def test_gradient_of_sum_exp():
    x = Tensor(np.array([0.0, 1.0]), requires_grad=True)
    exp(x).sum().backward()
    assert np.allclose(x.grad, [1.0, np.e], atol=1e-12)


def test_shape_mismatch_raises_dimension_error():
    with pytest.raises(DimensionError):
        add(np.ones((2, 3)), np.ones((4, 5)))
    with pytest.raises(DimensionError):
        matmul(np.ones((2, 3)), np.ones((4, 5)))


def test_non_finite_output_names_the_op():
    with pytest.raises(NumericError, match="log"):
        log(Tensor(np.array([-1.0])))
    with pytest.raises(NumericError, match="exp"):
        exp(Tensor(np.array([1e4])))


def test_fan_out_accumulates_gradients():
    x = Tensor(np.array([1.5, -0.5]), requires_grad=True)
    y = x * x + x * 3.0 + x
    y.sum().backward()
    assert np.allclose(x.grad, 2 * x.data + 4.0)


def test_no_grad_records_nothing():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = exp(x)
    assert not y.requires_grad and y._parents == ()


def test_grad_check_quadratic_form():
    gen = np.random.default_rng(0)
    b = gen.standard_normal((4, 4))
    a = b + b.T
    x = gen.standard_normal(4)
    f = lambda t: (t.reshape(1, 4) @ a @ t.reshape(4, 1)).sum()
    from amortflow.numerics import analytic_gradient

    assert np.allclose(analytic_gradient(f, x), 2 * a @ x, atol=1e-12)
    assert grad_check(f, x) < 1e-6


def test_grad_check_constant_function():
    assert grad_check(lambda t: Tensor(3.0), np.ones(3)) == 0.0


# every primitive at 100 random points
_PRIMITIVES = {
    "add": lambda t, c: (add(t, c) * c).sum(),
    "sub": lambda t, c: (sub(c, t) * c).sum(),
    "multiply": lambda t, c: multiply(t, t * c).sum(),
    "exp": lambda t, c: (exp(t) * c).sum(),
    "log": lambda t, c: (log(t * t + 1.0) * c).sum(),
    "tanh": lambda t, c: (tanh(t) * c).sum(),
    "arctan": lambda t, c: (arctan(t) * c).sum(),
    "elu": lambda t, c: (elu(t) * c).sum(),
    "square": lambda t, c: (square(t) * c).sum(),
    "matmul": lambda t, c: (matmul(t.reshape(2, 3), c.reshape(3, 2)) * c[:4].reshape(2, 2)).sum(),
    "linear": lambda t, c: (linear(t.reshape(2, 3), c.reshape(3, 2), c[:2]) * c[2:6].reshape(2, 2)).sum(),
    "concat": lambda t, c: (concat([t, t * 2.0], axis=0) * np.concatenate([c, -c])).sum() + (t * t).sum(),
    "slice": lambda t, c: (slice_(t, slice(1, 5)) * c[:4]).sum() + (t[2] * t[3]),
    "take": lambda t, c: (take(t, np.array([5, 0, 3, 1, 2, 4])) * c).sum() * (t * t).sum(),
    "sum_over_axis": lambda t, c: square(sum_over_axis(t.reshape(2, 3), axis=0) * c[:3]).sum(),
    "mean_over_axis": lambda t, c: (mean_over_axis(t.reshape(2, 3), axis=1) * c[:2]).sum(),
    "reshape": lambda t, c: (t.reshape(3, 2) * c.reshape(3, 2) * t.reshape(3, 2)).sum(),
    "conv1d": lambda t, c: (conv1d(t.reshape(1, 6, 1), c[:3].reshape(3, 1, 1), 2, 1) * c[3:6].reshape(1, 3, 1)).sum(),
}


@pytest.mark.parametrize("name", sorted(_PRIMITIVES))
def test_primitive_gradients_at_100_points(name):
    gen = np.random.default_rng(zlib.crc32(name.encode()))
    fn = _PRIMITIVES[name]
    worst = 0.0
    for _ in range(100):
        c = gen.uniform(0.5, 1.5, 6) * gen.choice([-1, 1], 6)
        x = gen.standard_normal(6)
        x[np.abs(x) < 0.05] += 0.1  # keep away from elu's kink at 0
        worst = max(worst, grad_check(lambda t: fn(t, c), x))
    assert worst < 1e-4


def test_conv1d_weight_gradient():
    gen = np.random.default_rng(3)
    x = gen.standard_normal((2, 9, 3))
    k = gen.standard_normal((3, 3, 4))
    w = gen.standard_normal((2, 5, 4))
    assert grad_check(lambda t: (conv1d(x, t, 2, 1) * w).sum(), k) < 1e-4
    assert grad_check(lambda t: (conv1d(t, k, 2, 1) * w).sum(), x) < 1e-4


def test_conv1d_matches_direct_loop():
    gen = np.random.default_rng(4)
    x = gen.standard_normal((2, 7, 3))
    k = gen.standard_normal((3, 3, 2))
    out = conv1d(x, k, 2, 1).data
    xp = np.pad(x, ((0, 0), (1, 1), (0, 0)))
    ref = np.zeros((2, 4, 2))
    for b in range(2):
        for t in range(4):
            for j in range(3):
                ref[b, t] += xp[b, 2 * t + j] @ k[j]
    assert np.allclose(out, ref, atol=1e-12)


def test_sum_then_broadcast_equals_mean_times_extent():
    gen = np.random.default_rng(5)
    x = gen.standard_normal((7, 5))
    s = sum_over_axis(x, axis=0).data
    m = mean_over_axis(x, axis=0).data
    assert np.allclose(s, m * 7, rtol=0, atol=1e-12)


def test_rng_replay_is_bit_identical():
    a = RngStream(42, 7).generator.standard_normal(1000)
    b = RngStream(42, 7).generator.standard_normal(1000)
    c = RngStream(42, 8).generator.standard_normal(1000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert abs(np.corrcoef(a, c)[0, 1]) < 0.1


def test_child_streams_are_reproducible_and_distinct():
    s = RngStream(1, 2)
    assert np.array_equal(s.child("x").generator.random(5), RngStream(1, 2).child("x").generator.random(5))
    assert not np.array_equal(s.child("x").generator.random(5), s.child("y").generator.random(5))


def test_degenerate_uniform_and_zero_rate_poisson():
    s = RngStream(0, 1)
    assert np.all(sample_uniform(s, 2.0, 2.0, 100) == 2.0)
    assert np.all(sample_poisson(s, np.zeros(100)) == 0)


def test_gaussian_mean_clt_bound():
    x = sample_gaussian(RngStream(3, 0), 10**6)
    assert -0.005 < x.mean() < 0.005


def test_invalid_distribution_parameters():
    s = RngStream(0)
    with pytest.raises(ParameterError):
        sample_gaussian(s, 3, std=-1.0)
    with pytest.raises(ParameterError):
        sample_uniform(s, 1.0, 0.0, 3)
    with pytest.raises(ParameterError):
        sample_poisson(s, np.array([-0.1]))
    with pytest.raises(ParameterError):
        sample_binomial(s, np.array([-1]), 0.5)
    with pytest.raises(ParameterError):
        sample_binomial(s, np.array([3]), 1.5)


@pytest.mark.parametrize("rate", [0.3, 4.0, 25.0, POISSON_INVERSION_LIMIT, 80.0, 1e4])
def test_poisson_moments_on_both_branches(rate):
    x = sample_poisson(RngStream(11, int(rate * 10)), np.full(200_000, rate))
    se = np.sqrt(rate / x.size)
    assert abs(x.mean() - rate) < 5 * se
    assert abs(x.var() / rate - 1) < 0.03


def test_poisson_inversion_matches_pmf():
    from scipy import stats

    rate = 3.7
    x = sample_poisson(RngStream(2, 2), np.full(100_000, rate))
    counts = np.bincount(x, minlength=15)[:15]
    expected = stats.poisson.pmf(np.arange(15), rate) * x.size
    assert np.all(np.abs(counts - expected) < 5 * np.sqrt(expected) + 5)


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**63),
    n=st.integers(0, 50),
    p=st.floats(0, 1),
)
def test_binomial_support(seed, n, p):
    x = sample_binomial(RngStream(seed), np.full(20, n), p)
    assert np.all((x >= 0) & (x <= n))
