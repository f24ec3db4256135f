"""Online training: fresh simulations every iteration, Adam with per-epoch decay."""

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from amortflow.exceptions import ConfigurationError, NumericError, TrainingAborted
from amortflow.numerics import RngStream, derive_stream_id
from amortflow.simulators.base import valid_rows

TRACE_COLUMNS = ("iteration", "epoch", "N", "loss", "lr", "grad_norm", "clipped")


@dataclass
class TrainConfig:
    """Optimisation settings.

    ``size_min``/``size_max`` bound the per-iteration number of observations
    (or series length); ``None`` falls back to the model's own range.
    """

    batch_size: int = 64
    iterations: int = 1000
    epochs: int = 1
    learning_rate: float = 1e-3
    decay: float = 0.95
    size_min: int = None
    size_max: int = None
    clip_norm: float = 10.0
    max_resample: int = 50
    max_numeric_errors: int = 10

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be at least 1")
        if self.iterations < 0 or self.epochs < 0:
            raise ConfigurationError("iterations and epochs must be non-negative")
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")
        if not 0 < self.decay <= 1:
            raise ConfigurationError("decay must lie in (0, 1]")
        if self.size_min is not None and self.size_max is not None and self.size_min > self.size_max:
            raise ConfigurationError("size_min must not exceed size_max")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ConfigurationError("clip_norm must be positive")

    def to_dict(self):
        return asdict(self)

    def size_range(self, model):
        low, high = model.size_range
        low = low if self.size_min is None else self.size_min
        high = high if self.size_max is None else self.size_max
        if low > high:
            raise ConfigurationError(f"empty size range [{low}, {high}]")
        return low, high

    def lr_at(self, epoch):
        return self.learning_rate * self.decay**epoch


class AdamState:
    """First and second moment estimates for a fixed list of parameters."""

    beta1, beta2, eps = 0.9, 0.999, 1e-8

    def __init__(self, params):
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]
        self.step = 0


def adam_step(params, grads, state, lr):
    """One bias-corrected Adam update, applied to ``params`` in place."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            g = np.zeros_like(p.data)
        if g.shape != p.data.shape:
            raise ConfigurationError(f"gradient shape {g.shape} does not match parameter {p.data.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


def global_norm(grads):
    return math.sqrt(sum(float(np.vdot(g, g)) for g in grads if g is not None))


def batch_loss(amortizer, theta, x):
    """Monte Carlo estimate of the joint objective for one batch sharing a dataset size."""
    return amortizer.loss(theta, x)


def simulate_batch(model, batch_size, size, stream, max_resample=50):
    """Draw ``(theta, x)`` for one iteration; rejected simulations are redrawn from the prior.

    Each redraw round simulates twice the number of missing rows (plus a small
    margin) and keeps the first valid ones, so models with frequent rejections
    need few rounds.
    """
    theta = model.sample_prior(batch_size, stream)
    x = model.simulate(theta, size, stream)
    ok = valid_rows(x)
    for _ in range(max_resample):
        if ok.all():
            break
        bad = np.flatnonzero(~ok)
        cand = model.sample_prior(2 * len(bad) + 4, stream)
        x_new = model.simulate(cand, size, stream)
        good = np.flatnonzero(valid_rows(x_new))[: len(bad)]
        fill = bad[: len(good)]
        theta[fill] = cand[good]
        x = x.astype(np.result_type(x, x_new), copy=False)
        x[fill] = x_new[good]
        ok[fill] = True
    if not ok.all():
        raise NumericError(f"{model.name}: could not obtain valid simulations after {max_resample} redraws")
    return theta, x


def iteration_data(model, config, seed, iteration):
    """Simulated batch for a global iteration index; a pure function of (seed, iteration)."""
    stream = RngStream(seed, derive_stream_id("train", iteration))
    low, high = config.size_range(model)
    size = int(stream.integers(low, high))
    theta, x = simulate_batch(model, config.batch_size, size, stream, config.max_resample)
    return size, theta, model.preprocess(x)


def train_online(amortizer, config, seed, epoch_callback=None, log=None, threads=1):
    """Train ``amortizer`` in place on freshly simulated data.

    Parameters
    ----------
    amortizer : Amortizer
        Networks to train; parameters are updated in place.
    config : TrainConfig
    seed : int
        Root seed; iteration ``k`` uses its own stream, so the run is
        reproducible and independent of ``threads``.
    epoch_callback : callable, optional
        ``epoch_callback(epoch, amortizer, trace)`` after every epoch.
    log : callable, optional
        Receives one progress line per epoch.
    threads : int
        With more than one thread, the next batch is simulated while the
        current one is being optimised.

    Returns
    -------
    list of dict
        Loss trace, one entry per iteration, keyed by ``TRACE_COLUMNS``.
    """
    model = amortizer.model
    params = amortizer.parameters()
    state = AdamState(params)
    trace = []
    failures = 0
    total = config.epochs * config.iterations
    pool = ThreadPoolExecutor(max_workers=1) if threads > 1 and total > 0 else None
    pending = pool.submit(iteration_data, model, config, seed, 0) if pool else None
    try:
        for it in range(total):
            epoch = it // config.iterations
            lr = config.lr_at(epoch)
            if pool:
                size, theta, x = pending.result()
                if it + 1 < total:
                    pending = pool.submit(iteration_data, model, config, seed, it + 1)
            else:
                size, theta, x = iteration_data(model, config, seed, it)
            amortizer.zero_grad()
            try:
                loss = amortizer.loss(theta, x, preprocessed=True)
                loss.backward()
                grads = [p.grad for p in params]
                norm = global_norm(grads)
                if not math.isfinite(norm):
                    raise NumericError("non-finite gradient norm")
            except NumericError as err:
                failures += 1
                trace.append(_row(it, epoch, size, float("nan"), lr, float("nan"), 0))
                if failures >= config.max_numeric_errors:
                    raise TrainingAborted(
                        f"aborted at iteration {it} after {failures} numeric failures: {err}", trace
                    ) from err
                continue
            failures = 0
            clipped = config.clip_norm is not None and norm > config.clip_norm
            if clipped:
                scale = config.clip_norm / norm
                grads = [None if g is None else g * scale for g in grads]
            adam_step(params, grads, state, lr)
            trace.append(_row(it, epoch, size, float(loss.data), lr, norm, int(clipped)))
            if (it + 1) % config.iterations == 0:
                if log:
                    recent = [r["loss"] for r in trace[-config.iterations :]]
                    log(f"epoch {epoch + 1}/{config.epochs} lr={lr:.3g} median loss={np.nanmedian(recent):.4f}")
                if epoch_callback:
                    epoch_callback(epoch, amortizer, trace)
    finally:
        if pool:
            pool.shutdown(wait=True)
    amortizer.zero_grad()
    return trace


def _row(it, epoch, size, loss, lr, norm, clipped):
    return {"iteration": it, "epoch": epoch, "N": size, "loss": loss, "lr": lr, "grad_norm": norm, "clipped": clipped}


def write_trace(path, trace):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in trace:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
