"""Validation metrics: parameter recovery, calibration, simulation-based
calibration, re-simulation error and closed-form Gaussian KL divergences.
"""

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from amortflow.exceptions import DegenerateInputError, DimensionError, ParameterError
from amortflow.numerics import RngStream, derive_stream_id

ALPHAS = np.linspace(0.01, 0.99, 100)
MIN_CALIBRATION_DATASETS = 50


class ReliabilityWarning(UserWarning):
    """A metric was computed from too few datasets to be trusted."""


def _paired(true, est):
    true = np.asarray(true, dtype=float).ravel()
    est = np.asarray(est, dtype=float).ravel()
    if true.shape != est.shape:
        raise DimensionError(f"true and estimated vectors differ in length: {true.size} vs {est.size}")
    return true, est


def nrmse(true, est):
    """``sqrt(sum_m (theta_m - est_m)^2 / (theta_max - theta_min))``."""
    true, est = _paired(true, est)
    if true.size < 2:
        raise DegenerateInputError("NRMSE needs at least two values")
    spread = true.max() - true.min()
    if spread <= 0:
        raise DegenerateInputError("NRMSE undefined: true values have zero range")
    return float(np.sqrt(np.sum((true - est) ** 2 / spread)))


def r_squared(true, est):
    """Coefficient of determination ``1 - SSE / SST``."""
    true, est = _paired(true, est)
    sst = np.sum((true - true.mean()) ** 2)
    if sst <= 0:
        raise DegenerateInputError("R^2 undefined: true values have zero variance")
    return float(1.0 - np.sum((true - est) ** 2) / sst)


def _stack_draws(draws, true):
    true = np.atleast_2d(np.asarray(true, dtype=float))
    draws = np.asarray(draws, dtype=float)
    if draws.ndim == 2:
        draws = draws[:, :, None]
    if true.shape[0] == 1 and draws.shape[0] > 1 and draws.shape[2] == 1:
        true = true.T
    if draws.shape[0] != true.shape[0] or draws.shape[2] != true.shape[1]:
        raise DimensionError(f"draws {draws.shape} do not match true values {true.shape}")
    return draws, true


def coverage_indicators(draws, true, alphas=ALPHAS):
    """Boolean array ``(M, len(alphas), D)``: true value inside the central ``alpha`` interval."""
    draws, true = _stack_draws(draws, true)
    lo = np.quantile(draws, (1.0 - alphas) / 2.0, axis=1)  # (A, M, D)
    hi = np.quantile(draws, (1.0 + alphas) / 2.0, axis=1)
    inside = (lo <= true[None]) & (true[None] <= hi)
    return inside.transpose(1, 0, 2)


def calibration_error(draws, true, alphas=ALPHAS):
    """Median over ``alpha`` of ``|alpha_theta - alpha|`` per parameter.

    Parameters
    ----------
    draws : array_like, shape (M, L, D)
        Posterior draws for ``M`` datasets.
    true : array_like, shape (M, D)
        Data-generating parameters.

    Returns
    -------
    ndarray, shape (D,)
    """
    draws, true = _stack_draws(draws, true)
    if draws.shape[0] < MIN_CALIBRATION_DATASETS:
        warnings.warn(
            f"calibration error from {draws.shape[0]} datasets (< {MIN_CALIBRATION_DATASETS}) is unreliable",
            ReliabilityWarning,
            stacklevel=2,
        )
    return _calibration_from_inside(coverage_indicators(draws, true, alphas), alphas)


def _calibration_from_inside(inside, alphas=ALPHAS):
    alpha_theta = inside.mean(axis=0)  # (A, D)
    return np.median(np.abs(alpha_theta - np.asarray(alphas)[:, None]), axis=0)


def sbc_ranks(draws, true):
    """Rank statistic ``sum_l 1[draw_l < theta]`` per dataset and parameter, in ``0..L``."""
    draws, true = _stack_draws(draws, true)
    return np.sum(draws < true[:, None, :], axis=1)


def rank_histogram(ranks, n_draws, bins=20):
    """Counts of ranks ``0..L`` in ``bins`` groups of (nearly) equal numbers of integer ranks.

    Returns the ``(D, bins)`` counts and the expected count per bin under uniformity.
    """
    ranks = np.asarray(ranks)
    if ranks.ndim == 1:
        ranks = ranks[:, None]
    if ranks.min() < 0 or ranks.max() > n_draws:
        raise ParameterError(f"ranks must lie in 0..{n_draws}")
    bins = min(bins, n_draws + 1)
    index = (ranks * bins) // (n_draws + 1)
    counts = np.stack([np.bincount(index[:, j], minlength=bins) for j in range(ranks.shape[1])])
    per_bin = np.bincount((np.arange(n_draws + 1) * bins) // (n_draws + 1), minlength=bins)
    expected = ranks.shape[0] * per_bin / (n_draws + 1)
    return counts, expected


def chi_square_uniformity(counts, expected):
    """Pearson chi-square statistic and p-value per row of ``counts``."""
    counts = np.atleast_2d(counts)
    stat = np.sum((counts - expected) ** 2 / expected, axis=1)
    pval = stats.chi2.sf(stat, df=counts.shape[1] - 1)
    return stat, pval


@dataclass
class SBCResult:
    ranks: np.ndarray
    counts: np.ndarray
    expected: np.ndarray
    chi2: np.ndarray
    p_values: np.ndarray
    n_draws: int

    def rejected(self, level=0.01):
        return self.p_values < level


def sbc_from_draws(draws, true, n_draws=None, bins=20):
    ranks = sbc_ranks(draws, true)
    n_draws = np.asarray(draws).shape[1] if n_draws is None else n_draws
    counts, expected = rank_histogram(ranks, n_draws, bins)
    chi2, pval = chi_square_uniformity(counts, expected)
    return SBCResult(ranks, counts, expected, chi2, pval, n_draws)


def sbc(model, sampler, n_rounds, n_draws, seed, bins=20, size=None):
    """Simulation-based calibration of ``sampler(x, L, stream) -> (L, D)``.

    Each round draws ``theta ~ prior`` and ``x ~ model(theta)``, asks the sampler
    for ``L`` draws and records the rank of ``theta`` among them.
    """
    theta, data = simulate_validation(model, n_rounds, seed, size, purpose="sbc")
    draws = np.stack(
        [sampler(x, n_draws, RngStream(seed, derive_stream_id("sbc-draws", m))) for m, x in enumerate(data)]
    )
    return sbc_from_draws(draws, theta, n_draws, bins)


def _pairwise_sq(a, b):
    d = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * a @ b.T
    return np.maximum(d, 0.0)


def median_bandwidth(pooled):
    d = np.sqrt(_pairwise_sq(pooled, pooled))
    iu = np.triu_indices(len(pooled), k=1)
    h = float(np.median(d[iu])) if iu[0].size else 0.0
    return h if h > 0 else 1.0


def mmd(x_a, x_b, bandwidth=None):
    """Squared maximum mean discrepancy, biased (V-statistic) estimator.

    Gaussian kernel ``exp(-|x - y|^2 / (2 h^2))`` with ``h`` the median pairwise
    distance of the pooled sample unless given.
    """
    a = np.asarray(x_a, dtype=float)
    b = np.asarray(x_b, dtype=float)
    a = a[:, None] if a.ndim == 1 else a
    b = b[:, None] if b.ndim == 1 else b
    if a.shape[1] != b.shape[1]:
        raise DimensionError("samples must have the same number of columns")
    if len(a) < 2 or len(b) < 2:
        raise DegenerateInputError("MMD needs at least two rows per sample")
    h = median_bandwidth(np.vstack([a, b])) if bandwidth is None else float(bandwidth)
    scale = -0.5 / h**2
    kaa = np.exp(scale * _pairwise_sq(a, a)).mean()
    kbb = np.exp(scale * _pairwise_sq(b, b)).mean()
    kab = np.exp(scale * _pairwise_sq(a, b)).mean()
    return float(max(kaa + kbb - 2.0 * kab, 0.0))


def resim_error(model, datasets, estimates, seed):
    """Median MMD between each observed dataset and a re-simulation at its point estimate.

    Returns the median and the per-dataset values.
    """
    values = []
    for m, (x, est) in enumerate(zip(datasets, estimates)):
        x = np.asarray(x, dtype=float)
        if x.shape[0] < 2:
            values.append(np.nan)  # a single observation has no empirical distribution
            continue
        stream = RngStream(seed, derive_stream_id("resim", m))
        x_sim = np.asarray(model.simulate(np.asarray(est)[None], x.shape[0], stream)[0], dtype=float)
        if not np.all(np.isfinite(x_sim)):
            values.append(np.nan)
            continue
        values.append(mmd(x, x_sim))
    values = np.asarray(values)
    return float(np.nanmedian(values)) if np.isfinite(values).any() else float("nan"), values


def _check_pd(cov, what):
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape[0] != cov.shape[1] or not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-12):
        raise ParameterError(f"{what} must be a symmetric square matrix")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise ParameterError(f"{what} is not positive definite") from None


def kl_gaussian_full(mean_p, cov_p, mean_q, cov_q):
    """``KL(N(mean_p, cov_p) || N(mean_q, cov_q))`` in nats."""
    mean_p = np.atleast_1d(np.asarray(mean_p, dtype=float))
    mean_q = np.atleast_1d(np.asarray(mean_q, dtype=float))
    lp = _check_pd(cov_p, "cov_p")
    lq = _check_pd(cov_q, "cov_q")
    d = mean_p.size
    if lp.shape[0] != d or lq.shape[0] != d or mean_q.size != d:
        raise DimensionError("mean and covariance dimensions disagree")
    logdet_p = 2.0 * np.sum(np.log(np.diag(lp)))
    logdet_q = 2.0 * np.sum(np.log(np.diag(lq)))
    a = np.linalg.solve(lq, lp)  # Lq^-1 Lp, so tr(Sq^-1 Sp) = |a|_F^2
    diff = np.linalg.solve(lq, mean_p - mean_q)
    return float(0.5 * (logdet_q - logdet_p + np.sum(a * a) - d + diff @ diff))


def kl_gaussian_diag(mean_p, std_p, mean_q, std_q):
    """KL divergence between diagonal Gaussians given per-coordinate standard deviations."""
    mean_p, std_p, mean_q, std_q = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (mean_p, std_p, mean_q, std_q))
    if np.any(std_p <= 0) or np.any(std_q <= 0):
        raise ParameterError("standard deviations must be positive")
    return float(np.sum(np.log(std_q / std_p) + (std_p**2 + (mean_q - mean_p) ** 2) / (2.0 * std_q**2) - 0.5))


def gaussian_fit(draws, ridge=1e-8):
    """Sample mean and covariance; a ridge is added (and flagged) if the covariance is singular."""
    draws = np.asarray(draws, dtype=float)
    mean = draws.mean(axis=0)
    cov = np.atleast_2d(np.cov(draws, rowvar=False))
    try:
        np.linalg.cholesky(cov)
        return mean, cov, False
    except np.linalg.LinAlgError:
        return mean, cov + ridge * np.eye(cov.shape[0]), True


def gaussian_fit_kl(draws, true_mean, true_cov):
    """``KL(truth || Gaussian fitted to draws)`` and whether a ridge was needed."""
    mean, cov, flagged = gaussian_fit(draws)
    return kl_gaussian_full(true_mean, true_cov, mean, cov), flagged


def mvn_kl_validation(model, sampler, datasets, n_draws, seed):
    """Mean KL between the conjugate posterior and a Gaussian fit of the sampler's draws.

    Returns ``(mean KL, per-dataset KL, number of ridge-flagged fits)``.
    """
    kls, flagged = [], 0
    for m, x in enumerate(datasets):
        true_mean, true_cov = model.posterior(x)
        draws = sampler(x, n_draws, RngStream(seed, derive_stream_id("kl-draws", m)))
        kl, flag = gaussian_fit_kl(draws, true_mean, true_cov)
        kls.append(kl)
        flagged += flag
    kls = np.asarray(kls)
    return float(kls.mean()), kls, flagged


def bootstrap_se(n, statistic, n_boot=1000, seed=0):
    """Bootstrap standard error of ``statistic(indices)`` over ``n`` resampled datasets."""
    gen = RngStream(seed, derive_stream_id("bootstrap")).generator
    values = np.array([statistic(gen.integers(0, n, size=n)) for _ in range(n_boot)])
    return np.nanstd(values, axis=0, ddof=1)


def simulate_validation(model, n_datasets, seed, size=None, purpose="validate"):
    """Prior draws and one simulated dataset each, deterministic in ``seed``.

    Rejected simulations are redrawn, so every returned dataset is valid.
    """
    from amortflow.training import simulate_batch

    stream = RngStream(seed, derive_stream_id(purpose))
    size = model.size_range[1] if size is None else int(size)
    theta, x = simulate_batch(model, n_datasets, size, stream)
    return theta, list(x)


@dataclass
class MetricReport:
    """Recovery, calibration and re-simulation metrics for one validation run."""

    param_names: tuple
    n_datasets: int
    n_draws: int
    nrmse: np.ndarray
    r2: np.ndarray
    calibration: np.ndarray
    nrmse_se: np.ndarray
    r2_se: np.ndarray
    calibration_se: np.ndarray
    resim_mmd: float
    resim_mmd_se: float
    sbc: SBCResult
    kl_mean: float = None
    kl_se: float = None
    extras: dict = field(default_factory=dict)

    def rows(self):
        out = []
        for j, name in enumerate(self.param_names):
            out += [
                (name, "nrmse", self.nrmse[j], self.nrmse_se[j]),
                (name, "r2", self.r2[j], self.r2_se[j]),
                (name, "calibration_error", self.calibration[j], self.calibration_se[j]),
                (name, "sbc_chi2", self.sbc.chi2[j], float("nan")),
                (name, "sbc_p_value", self.sbc.p_values[j], float("nan")),
            ]
        out.append(("all", "resim_mmd_median", self.resim_mmd, self.resim_mmd_se))
        if self.kl_mean is not None:
            out.append(("all", "kl_mean", self.kl_mean, self.kl_se))
        return out

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["parameter", "metric", "value", "bootstrap_se"])
            for name, metric, value, se in self.rows():
                writer.writerow([name, metric, repr(float(value)), repr(float(se))])

    def write_sbc_csv(self, path):
        write_sbc_histogram(path, self.sbc, self.param_names)

    def to_text(self):
        lines = [f"validation: {self.n_datasets} datasets x {self.n_draws} draws"]
        width = max(len(n) for n in self.param_names)
        for j, name in enumerate(self.param_names):
            lines.append(
                f"{name:<{width}}  NRMSE {self.nrmse[j]:.4f} ({self.nrmse_se[j]:.4f})"
                f"  R2 {self.r2[j]:.4f} ({self.r2_se[j]:.4f})"
                f"  Err_cal {self.calibration[j]:.4f} ({self.calibration_se[j]:.4f})"
                f"  SBC p {self.sbc.p_values[j]:.3g}"
            )
        lines.append(f"median re-simulation MMD {self.resim_mmd:.4g} ({self.resim_mmd_se:.4g})")
        if self.kl_mean is not None:
            lines.append(f"mean KL(truth || fit) {self.kl_mean:.4g} ({self.kl_se:.4g})")
        return "\n".join(lines) + "\n"


def write_sbc_histogram(path, result, param_names):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["parameter", "bin", "count", "expected"])
        for j, name in enumerate(param_names):
            for b, c in enumerate(result.counts[j]):
                writer.writerow([name, b, int(c), repr(float(result.expected[b]))])


def evaluate(model, theta, datasets, draws, seed, n_boot=1000, kl_draws=None):
    """Compute a :class:`MetricReport` from validation datasets and their posterior draws.

    Parameters
    ----------
    theta : ndarray, shape (M, D)
        Data-generating parameters.
    datasets : list of ndarray
        Raw simulated datasets.
    draws : ndarray, shape (M, L, D)
    kl_draws : callable, optional
        For models with a Gaussian oracle, ``kl_draws(m) -> draws`` used for
        the KL validation; defaults to ``draws[m]``.
    """
    theta = np.asarray(theta, dtype=float)
    draws = np.asarray(draws, dtype=float)
    m, n_draws, d = draws.shape
    est = draws.mean(axis=1)
    inside = coverage_indicators(draws, theta)
    if m < MIN_CALIBRATION_DATASETS:
        warnings.warn(f"calibration from {m} datasets is unreliable", ReliabilityWarning, stacklevel=2)

    def per_param(idx):
        t, e = theta[idx], est[idx]
        out = np.empty((3, d))
        for j in range(d):
            try:
                out[0, j] = nrmse(t[:, j], e[:, j])
                out[1, j] = r_squared(t[:, j], e[:, j])
            except DegenerateInputError:
                out[0, j] = out[1, j] = np.nan
        out[2] = _calibration_from_inside(inside[idx])
        return out

    point = per_param(np.arange(m))
    se = bootstrap_se(m, per_param, n_boot, seed)
    mmd_median, mmd_values = resim_error(model, datasets, est, seed)
    if np.isfinite(mmd_values).sum() >= 2:
        mmd_se = float(bootstrap_se(m, lambda idx: np.nanmedian(mmd_values[idx]), n_boot, seed))
    else:
        mmd_se = float("nan")
    kl_mean = kl_se = None
    extras = {}
    if hasattr(model, "posterior") and model.name == "mvn":
        kls = []
        for k, x in enumerate(datasets):
            mu, cov = model.posterior(x)
            kl, _ = gaussian_fit_kl(draws[k] if kl_draws is None else kl_draws(k), mu, cov)
            kls.append(kl)
        kls = np.asarray(kls)
        kl_mean = float(kls.mean())
        kl_se = float(bootstrap_se(m, lambda idx: kls[idx].mean(), n_boot, seed))
        extras["kl"] = kls
    return MetricReport(
        tuple(model.param_names),
        m,
        n_draws,
        point[0],
        point[1],
        point[2],
        se[0],
        se[1],
        se[2],
        mmd_median,
        mmd_se,
        sbc_from_draws(draws, theta, n_draws),
        kl_mean,
        kl_se,
        extras,
    )
