"""Command-line entry point: ``amortflow {train,sample,validate,sbc,logpdf}``.

Progress goes to standard error; results go to files. Failures print one line
``error: <Kind>: <reason>`` and exit with status 2.
"""

import argparse
import csv
import os
import sys
import time

import numpy as np

from amortflow.checkpoint import load_checkpoint, save_checkpoint
from amortflow.config import RunConfig
from amortflow.diagnostics import evaluate, sbc_from_draws, simulate_validation, write_sbc_histogram
from amortflow.exceptions import AmortflowError
from amortflow.inference import evaluate_log_posterior, sample_posterior_batch, write_samples
from amortflow.simulators import read_observations
from amortflow.amortizer import build_amortizer
from amortflow.training import train_online, write_trace


def _log(msg):
    print(msg, file=sys.stderr, flush=True)


def _set_threads(n):
    # caps BLAS pools too when set before numpy spins them up
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(n))


def _load(args):
    expected = RunConfig.load(args.config) if getattr(args, "config", None) else None
    return load_checkpoint(args.checkpoint, expected, args.force)


def cmd_train(args):
    config = RunConfig.load(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    os.makedirs(args.out, exist_ok=True)
    config.save(os.path.join(args.out, "config.json"))
    model = config.build_model()
    amortizer = build_amortizer(model, config.network, config.seed)
    _log(f"training {model.name}: {amortizer.num_parameters()} parameters, seed {config.seed}")

    def on_epoch(epoch, net, trace):
        path = os.path.join(args.out, f"checkpoint_epoch{epoch + 1:03d}.bflw")
        save_checkpoint(path, net, config, {"epoch": epoch + 1})

    start = time.perf_counter()
    trace = train_online(amortizer, config.train, config.seed, on_epoch, _log, args.threads)
    write_trace(os.path.join(args.out, "loss_trace.csv"), trace)
    ident = save_checkpoint(os.path.join(args.out, "checkpoint.bflw"), amortizer, config, {"epoch": config.train.epochs})
    _log(f"done in {time.perf_counter() - start:.1f}s; checkpoint {ident}")
    return 0


def cmd_sample(args):
    amortizer, config, header = _load(args)
    model = amortizer.model
    data = read_observations(args.data, model.data_names)
    ids = [key for key, _ in data]
    result = sample_posterior_batch(
        amortizer, [x for _, x in data], args.draws, args.seed, ids, header["id"], args.threads
    )
    for key, err in result.errors.items():
        _log(f"dataset {key}: {err}")
    write_samples(args.out, result.samples, model.param_names)
    _log(f"wrote {args.draws} draws for {len(ids) - len(result.errors)} of {len(ids)} datasets")
    return 1 if result.errors else 0


def cmd_validate(args):
    amortizer, config, header = _load(args)
    model = amortizer.model
    os.makedirs(args.out, exist_ok=True)
    theta, datasets = simulate_validation(model, args.num_datasets, args.seed, args.size)
    result = sample_posterior_batch(amortizer, datasets, args.draws, args.seed, threads=args.threads)
    draws = np.stack([s.draws for s in result.samples])
    report = evaluate(model, theta, datasets, draws, args.seed)
    report.write_csv(os.path.join(args.out, "metrics.csv"))
    report.write_sbc_csv(os.path.join(args.out, "sbc_histogram.csv"))
    text = report.to_text()
    with open(os.path.join(args.out, "metrics.txt"), "w") as fh:
        fh.write(text)
    _log(text.rstrip())
    return 0


def cmd_sbc(args):
    amortizer, config, header = _load(args)
    model = amortizer.model
    os.makedirs(args.out, exist_ok=True)
    theta, datasets = simulate_validation(model, args.rounds, args.seed, args.size, purpose="sbc")
    result = sample_posterior_batch(amortizer, datasets, args.draws, args.seed, threads=args.threads)
    draws = np.stack([s.draws for s in result.samples])
    res = sbc_from_draws(draws, theta, args.draws, args.bins)
    write_sbc_histogram(os.path.join(args.out, "sbc_histogram.csv"), res, model.param_names)
    with open(os.path.join(args.out, "sbc_ranks.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["round", *model.param_names])
        for m, row in enumerate(res.ranks):
            writer.writerow([m, *map(int, row)])
    with open(os.path.join(args.out, "sbc_summary.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["parameter", "chi2", "p_value"])
        for j, name in enumerate(model.param_names):
            writer.writerow([name, repr(float(res.chi2[j])), repr(float(res.p_values[j]))])
    for j, name in enumerate(model.param_names):
        _log(f"{name}: chi2 {res.chi2[j]:.2f}, p {res.p_values[j]:.3g}")
    return 0


def cmd_logpdf(args):
    amortizer, config, header = _load(args)
    model = amortizer.model
    data = read_observations(args.data, model.data_names)
    thetas = read_observations(args.theta, model.param_names)
    theta = np.concatenate([t for _, t in thetas])
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["dataset_id", "theta_index", "log_density"])
        for key, x in data:
            logp = evaluate_log_posterior(amortizer, theta, x)
            for i, v in enumerate(logp):
                writer.writerow([key, i, repr(float(v))])
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="amortflow", description="Amortized Bayesian inference with invertible networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, checkpoint=True):
        p.add_argument("--threads", type=int, default=1, help="maximum worker threads (default 1)")
        if checkpoint:
            p.add_argument("--checkpoint", required=True)
            p.add_argument("--config", help="refuse if this config's hash differs from the checkpoint's")
            p.add_argument("--force", action="store_true", help="ignore a config hash mismatch")
            p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train networks on online simulations")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config's seed")
    common(p, checkpoint=False)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="draw posterior samples for observed datasets")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--draws", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("validate", help="recovery, calibration and re-simulation metrics on prior simulations")
    common(p)
    p.add_argument("--num-datasets", type=int, required=True)
    p.add_argument("--draws", type=int, required=True)
    p.add_argument("--size", type=int, default=None, help="N or T of validation datasets (default: model maximum)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sbc", help="simulation-based calibration rank histograms")
    common(p)
    p.add_argument("--rounds", type=int, required=True)
    p.add_argument("--draws", type=int, required=True)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--size", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sbc)

    p = sub.add_parser("logpdf", help="evaluate posterior log densities")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--theta", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_logpdf)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    _set_threads(args.threads)
    try:
        return args.func(args)
    except (AmortflowError, OSError, ValueError, KeyError) as err:
        reason = str(err).replace("\n", " ")
        print(f"error: {type(err).__name__}: {reason}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
