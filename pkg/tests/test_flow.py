import numpy as np
import pytest

from amortflow.exceptions import ConfigurationError, DimensionError
from amortflow.flow import (
    ConditionalINN,
    CouplingBlock,
    acb_forward,
    acb_inverse,
    cinn_forward,
    cinn_inverse,
    log_posterior_density,
    soft_clamp,
)
from amortflow.numerics import RngStream, Tensor

from helpers import numerical_jacobian, parameter_grad_check, randomize

LOG_2PI = np.log(2 * np.pi)


def random_block(dim=4, cond=3, seed=0, scale=0.4):
    s = RngStream(seed, 1)
    return randomize(CouplingBlock(dim, cond, s, hidden=(16, 16)), s, scale)


def random_inn(dim=4, cond=3, blocks=3, seed=0, scale=0.3):
    s = RngStream(seed, 2)
    return randomize(ConditionalINN(dim, cond, blocks, s, hidden=(16, 16)), s, scale)


def test_zero_initialised_block_is_identity():
    block = CouplingBlock(5, 2, RngStream(0))
    u = np.random.default_rng(0).standard_normal((7, 5))
    c = np.random.default_rng(1).standard_normal((7, 2))
    v, logdet = acb_forward(block, u, c)
    assert np.array_equal(v, u) and np.all(logdet == 0)
    assert np.array_equal(acb_inverse(block, v, c), u)


def _constant_block(a, b):
    # D=2: s1 = a, t1 = b via output biases; s2 = t2 = 0. Clamp off so s1 = a exactly.
    block = CouplingBlock(2, 1, RngStream(0), hidden=(4,), clamp=None)
    block.s1.output.param("bias").data[:] = a
    block.t1.output.param("bias").data[:] = b
    return block


def test_constant_block_forward_and_inverse():
    a, b = 0.7, -1.3
    block = _constant_block(a, b)
    u = np.array([[0.4, -2.0]])
    v, logdet = acb_forward(block, u, np.zeros((1, 1)))
    assert np.allclose(v, [[0.4 * np.exp(a) + b, -2.0]], atol=1e-15)
    assert np.allclose(logdet, a)
    back = acb_inverse(block, v, np.zeros((1, 1)))
    assert np.allclose(back, [[(v[0, 0] - b) * np.exp(-a), v[0, 1]]], atol=1e-15)


def test_block_logdet_matches_numerical_jacobian():
    block = random_block()
    gen = np.random.default_rng(2)
    for _ in range(5):
        u, c = gen.standard_normal(4), gen.standard_normal(3)
        jac = numerical_jacobian(lambda x: acb_forward(block, x, c)[0][0], u)
        _, logdet = acb_forward(block, u, c)
        ref = np.linalg.slogdet(jac)[1]
        assert abs(logdet[0] - ref) / max(abs(ref), 1e-12) < 1e-4 or abs(logdet[0] - ref) < 1e-8


def test_block_round_trip_1000_pairs():
    block = random_block(dim=5, cond=2, seed=3)
    gen = np.random.default_rng(3)
    u, c = gen.standard_normal((1000, 5)) * 2, gen.standard_normal((1000, 2))
    v, _ = acb_forward(block, u, c)
    assert np.max(np.abs(acb_inverse(block, v, c) - u)) < 1e-9


def test_clamped_scales_lie_inside_ceiling():
    s = soft_clamp(Tensor(np.array([-1e6, -3.0, 0.0, 3.0, 1e6])), 1.9).data
    assert np.all(np.abs(s) < 1.9) and s[2] == 0.0


def test_dimension_one_is_rejected():
    with pytest.raises(ConfigurationError):
        ConditionalINN(1, 2, 2, RngStream(0))
    with pytest.raises(ConfigurationError):
        CouplingBlock(1, 2, RngStream(0))


def test_condition_dimension_checked():
    net = ConditionalINN(3, 2, 1, RngStream(0))
    with pytest.raises(DimensionError):
        cinn_forward(net, np.zeros((1, 3)), np.zeros((1, 5)))
    with pytest.raises(DimensionError):
        cinn_forward(net, np.zeros((1, 4)), np.zeros((1, 2)))


def test_odd_dimension_split():
    block = CouplingBlock(5, 0, RngStream(0))
    assert (block.d1, block.d2) == (2, 3)


def test_zero_initialised_network_is_a_permutation():
    net = ConditionalINN(6, 3, 4, RngStream(9))
    theta = np.random.default_rng(0).standard_normal((10, 6))
    z, logdet = cinn_forward(net, theta, np.ones((10, 3)))
    perm = np.arange(6)
    for p in net.permutations:
        perm = perm[p.indices]
    assert np.array_equal(z, theta[:, perm])
    assert np.all(logdet == 0)
    assert np.allclose(np.linalg.norm(z, axis=1), np.linalg.norm(theta, axis=1), rtol=0, atol=1e-14)
    assert np.array_equal(cinn_inverse(net, z, np.ones((10, 3))), theta)


def test_network_logdet_matches_numerical_jacobian():
    net = random_inn(dim=4, cond=3, blocks=3, seed=5)
    gen = np.random.default_rng(6)
    for _ in range(5):
        th, c = gen.standard_normal(4), gen.standard_normal(3)
        jac = numerical_jacobian(lambda x: cinn_forward(net, x, c)[0][0], th)
        ref = np.linalg.slogdet(jac)[1]
        got = cinn_forward(net, th, c)[1][0]
        assert abs(got - ref) <= 1e-4 * max(abs(ref), 1.0)


def test_network_inverse_matches_stepwise_oracle():
    net = random_inn(dim=5, cond=2, blocks=3, seed=7)
    gen = np.random.default_rng(8)
    z, c = gen.standard_normal((4, 5)), gen.standard_normal((4, 2))
    # independent inversion: undo each block by hand from its subnet outputs
    x = z.copy()
    for k in reversed(range(net.n_blocks)):
        blk = net.blocks[k]
        v1, v2 = x[:, : blk.d1], x[:, blk.d1 :]
        h = np.concatenate([v1, c], axis=1)
        s2 = soft_clamp(blk.s2(Tensor(h)), blk.clamp).data
        u2 = (v2 - blk.t2(Tensor(h)).data) * np.exp(-s2)
        h = np.concatenate([u2, c], axis=1)
        s1 = soft_clamp(blk.s1(Tensor(h)), blk.clamp).data
        u1 = (v1 - blk.t1(Tensor(h)).data) * np.exp(-s1)
        x = np.concatenate([u1, u2], axis=1)[:, net.permutations[k].inverse_indices]
    assert np.allclose(cinn_inverse(net, z, c), x, rtol=0, atol=1e-12)


def test_network_round_trip():
    net = random_inn(dim=6, cond=4, blocks=5, seed=10)
    gen = np.random.default_rng(10)
    th, c = gen.standard_normal((1000, 6)) * 2, gen.standard_normal((1000, 4))
    z, _ = cinn_forward(net, th, c)
    assert np.max(np.abs(cinn_inverse(net, z, c) - th)) < 1e-8


def test_density_at_origin_of_zero_network():
    net = ConditionalINN(3, 1, 2, RngStream(0))
    assert np.isclose(log_posterior_density(net, np.zeros(3), np.zeros(1))[0], -1.5 * LOG_2PI, rtol=0, atol=1e-15)


def test_density_integrates_to_one_on_grid():
    net = random_inn(dim=2, cond=2, blocks=3, seed=11, scale=0.3)
    g = np.linspace(-12, 12, 481)
    xx, yy = np.meshgrid(g, g)
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    c = np.tile([0.5, -1.0], (len(pts), 1))
    mass = np.exp(log_posterior_density(net, pts, c)).sum() * (g[1] - g[0]) ** 2
    assert abs(mass - 1) < 0.01


def test_appending_identity_block_keeps_density():
    net = random_inn(dim=3, cond=2, blocks=2, seed=12)
    gen = np.random.default_rng(12)
    th, c = gen.standard_normal((50, 3)), gen.standard_normal((50, 2))
    before = log_posterior_density(net, th, c)
    net.append_identity_block(RngStream(99))
    assert np.allclose(log_posterior_density(net, th, c), before, rtol=0, atol=1e-9)


def test_flow_loss_gradient_for_every_parameter():
    net = random_inn(dim=3, cond=2, blocks=2, seed=13, scale=0.3)
    gen = np.random.default_rng(13)
    th, c = gen.standard_normal((4, 3)), gen.standard_normal((4, 2))

    def loss():
        z, ld = net.forward(Tensor(th), Tensor(c))
        return ((z * z).sum(axis=1) * 0.5 - ld).mean()

    assert parameter_grad_check(loss, net) < 1e-4
