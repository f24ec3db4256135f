import numpy as np
import pytest

from amortflow.amortizer import NetworkConfig, build_amortizer
from amortflow.checkpoint import encode
from amortflow.config import RunConfig
from amortflow.exceptions import ContractError
from amortflow.inference import (
    dataset_stream,
    evaluate_log_posterior,
    read_samples,
    sample_posterior,
    sample_posterior_batch,
    write_samples,
)
from amortflow.numerics import RngStream
from amortflow.simulators import GMMModel, MVNModel, SIRModel
from amortflow.training import TrainConfig, train_online

from helpers import randomize


def zero_mvn(dim=3):
    return build_amortizer(MVNModel(dim), NetworkConfig(n_blocks=2, hidden=(8,)), 0)


def test_zero_network_draws_are_standard_normal():
    a = zero_mvn()
    L = 4000
    s = sample_posterior(a, np.zeros((1, 3)), L, RngStream(0))
    assert s.draws.shape == (L, 3)
    assert np.linalg.norm(s.mean) < 4 / np.sqrt(L)
    assert s.summary.shape == (3,)


def test_single_draw():
    s = sample_posterior(zero_mvn(), np.zeros((1, 3)), 1, RngStream(0))
    assert s.draws.shape == (1, 3) and np.all(np.isfinite(s.draws))


def test_dimension_mismatch_is_a_contract_error():
    a = zero_mvn()
    with pytest.raises(ContractError):
        sample_posterior(a, np.zeros((1, 4)), 5, RngStream(0))
    with pytest.raises(ContractError):
        sample_posterior(a, np.zeros((2, 3)), 5, RngStream(0))


def test_batch_equals_single_calls_and_is_order_independent():
    a = randomize(zero_mvn(), RngStream(1), 0.2)
    data = [np.random.default_rng(i).standard_normal((1, 3)) for i in range(5)]
    batch = sample_posterior_batch(a, data, 50, seed=9)
    for i, x in enumerate(data):
        single = sample_posterior(a, x, 50, dataset_stream(9, str(i)), str(i))
        assert np.array_equal(batch.samples[i].draws, single.draws)
    order = [3, 0, 4, 1, 2]
    shuffled = sample_posterior_batch(a, [data[i] for i in order], 50, seed=9, ids=order)
    for pos, i in enumerate(order):
        assert np.array_equal(shuffled.samples[pos].draws, batch.samples[i].draws)
    one = sample_posterior_batch(a, data[:1], 50, seed=9)
    assert np.array_equal(one.samples[0].draws, batch.samples[0].draws)


def test_batch_collects_errors():
    a = zero_mvn()
    result = sample_posterior_batch(a, [np.zeros((1, 3)), np.zeros((1, 7))], 10, seed=0)
    assert result.samples[0] is not None and result.samples[1] is None
    assert "1" in result.errors


def test_threads_do_not_change_results():
    a = randomize(zero_mvn(), RngStream(2), 0.2)
    data = [np.random.default_rng(i).standard_normal((1, 3)) for i in range(6)]
    r1 = sample_posterior_batch(a, data, 30, seed=4)
    r3 = sample_posterior_batch(a, data, 30, seed=4, threads=3)
    assert all(np.array_equal(x.draws, y.draws) for x, y in zip(r1.samples, r3.samples))


def test_inference_never_mutates_parameters():
    a = randomize(zero_mvn(), RngStream(3), 0.2)
    cfg = RunConfig.from_dict({"model": "mvn", "model_options": {"dim": 3}, "network": {"n_blocks": 2, "hidden": [8]}})
    before = encode(a, cfg)
    x = np.ones((1, 3))
    sample_posterior_batch(a, [x, x], 20, seed=1)
    evaluate_log_posterior(a, np.zeros((4, 3)), x)
    assert encode(a, cfg) == before


def test_untrained_density_is_normalised_gmm():
    a = randomize(build_amortizer(GMMModel(), NetworkConfig(n_blocks=3, hidden=(16,)), 0), RngStream(4), 0.3)
    g = np.linspace(-12, 12, 401)
    xx, yy = np.meshgrid(g, g)
    pts = np.stack([xx.ravel(), yy.ravel()], 1)
    x = np.array([[0.0, 0.0, 1.0, 0.0]])
    mass = np.exp(evaluate_log_posterior(a, pts, x)).sum() * (g[1] - g[0]) ** 2
    assert abs(mass - 1) < 0.01


def test_log_density_outside_support_is_minus_inf():
    a = build_amortizer(SIRModel(), NetworkConfig(n_blocks=1, hidden=(4,), summary_dim=2, channels=(2,)), 0)
    x = SIRModel().simulate(np.array([[0.5, 0.2]]), 200, RngStream(0))[0]
    logp = evaluate_log_posterior(a, np.array([[0.5, 0.2], [0.2, 0.5], [2.0, 0.1]]), x)
    assert np.isfinite(logp[0]) and np.all(np.isneginf(logp[1:]))


def test_draws_match_density_histogram_2d():
    a = randomize(zero_mvn(2), RngStream(5), 0.3)
    x = np.array([[0.3, -0.4]])
    draws = sample_posterior(a, x, 200_000, RngStream(6)).draws
    edges = np.linspace(-4, 4, 17)
    hist, _, _ = np.histogram2d(draws[:, 0], draws[:, 1], bins=[edges, edges])
    fine = np.linspace(-4, 4, 161)
    centers = 0.5 * (fine[1:] + fine[:-1])
    xx, yy = np.meshgrid(centers, centers, indexing="ij")
    dens = np.exp(evaluate_log_posterior(a, np.stack([xx.ravel(), yy.ravel()], 1), x)).reshape(160, 160)
    cell = (fine[1] - fine[0]) ** 2
    expected = dens.reshape(16, 10, 16, 10).sum(axis=(1, 3)) * cell * len(draws)
    mask = expected > 200
    assert np.all(np.abs(hist[mask] - expected[mask]) < 5 * np.sqrt(expected[mask]) + 0.01 * expected[mask])


def test_trained_mvn_identity_cov_recovers_conjugate_mean():
    model = MVNModel(2, cov=np.eye(2))
    a = build_amortizer(model, NetworkConfig(n_blocks=2, hidden=(32, 32)), 0)
    train_online(a, TrainConfig(iterations=1500, epochs=2, batch_size=64), seed=0)
    x = np.array([[1.0, -0.6]])
    s = sample_posterior(a, x, 4000, RngStream(1))
    se = s.std / np.sqrt(4000)
    assert np.all(np.abs(s.mean - x[0] / 2) < 5 * se)
    mean, _ = model.posterior(x)
    near, far = mean, mean + 1.5
    assert evaluate_log_posterior(a, np.stack([near, far]), x)[0] > evaluate_log_posterior(a, np.stack([near, far]), x)[1]


def test_sample_csv_round_trip(tmp_path):
    a = zero_mvn()
    res = sample_posterior_batch(a, [np.zeros((1, 3))] * 2, 7, seed=0, ids=["p", "q"])
    write_samples(tmp_path / "s.csv", res.samples, ("a", "b", "c"))
    back, names = read_samples(tmp_path / "s.csv")
    assert names == ["a", "b", "c"] and set(back) == {"p", "q"}
    assert np.array_equal(back["p"], res.samples[0].draws)
