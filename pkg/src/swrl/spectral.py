"""Eigenvalues, the spectral test statistic, calibrated tests, and ROC runs.

The test statistic is a linear spectral statistic

    H(Y) = sum_i h(mu_i),    h(mu) = -log(1 - lam * mu + lam^2),

over the eigenvalues mu_i of Y. Its centering constant is calibrated
empirically on null draws (the asymptotic centering lives in a limit theorem
we do not restate), so every downstream quantity is location/scale free:
thresholds are empirical null quantiles of the standardized statistic and
power is measured against fresh draws.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import isotonic_regression

from .errors import ConvergenceFailure, DimensionMismatch
from .model import sample_goe, sample_spiked
from .priors import SpikePrior, rademacher
from .roc import phi_eval
from .streams import derive_rng, mc_collect

__all__ = [
    "Spectrum",
    "LssValue",
    "NullCalibration",
    "CalibratedTest",
    "RocEstimate",
    "eigenvalues",
    "lss_statistic",
    "calibrate_null",
    "make_test",
    "run_test",
    "empirical_roc",
    "top_eigenvalue_diag",
]

P_OUTCOME = "p"
Q_OUTCOME = "q"

# floor for the log argument; keeps the statistic finite past the asymptotic
# spectral support and is counted, not hidden
CLIP_EPS = 1e-12


@dataclass(frozen=True)
class Spectrum:
    """All eigenvalues of one symmetric observation, sorted descending."""

    eigenvalues: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def top(self) -> float:
        return float(self.eigenvalues[0])


class LssValue(NamedTuple):
    value: float
    clip_count: int


def eigenvalues(y: np.ndarray) -> Spectrum:
    """Full symmetric-eigensolver spectrum, descending.

    Raises ConvergenceFailure when the LAPACK iteration fails, which signals
    a malformed input matrix.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 2 or y.shape[0] != y.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("matrix entries must be finite")
    if not np.array_equal(y, y.T):
        raise ValueError("matrix must be exactly symmetric")
    try:
        vals = np.linalg.eigvalsh(y)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return Spectrum(vals[::-1].copy())


def lss_statistic(spec: Spectrum, lam: float) -> LssValue:
    """H = sum_i -log(1 - lam*mu_i + lam^2), clipping the log argument at
    1e-12; the number of clipped eigenvalues is reported alongside."""
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lam must be in (0, 1), got {lam}")
    arg = 1.0 - lam * spec.eigenvalues + lam * lam
    clipped = int(np.count_nonzero(arg <= CLIP_EPS))
    value = float(-np.log(np.maximum(arg, CLIP_EPS)).sum())
    return LssValue(value, clipped)


@dataclass(frozen=True)
class NullCalibration:
    """Null statistics of H from Monte Carlo: mean, sd, and the raw sample
    (kept so thresholds can be exact empirical quantiles)."""

    lam: float
    n: int
    trials: int
    mean: float
    sd: float
    stats: np.ndarray

    def standardize(self, h: float | np.ndarray):
        return (h - self.mean) / self.sd


def _null_stat_worker(lam, n, seed, tag):
    def work(i):
        rng = derive_rng(seed, tag, i)
        spec = eigenvalues(sample_goe(n, rng))
        return lss_statistic(spec, lam).value

    return work


def calibrate_null(
    lam: float, n: int, calib_trials: int, seed: int, workers: int | None = None
) -> NullCalibration:
    """Empirical null mean and sd of the statistic over fresh noise draws."""
    if calib_trials < 100:
        raise ValueError("calib_trials must be >= 100")
    stats = np.array(mc_collect(calib_trials, _null_stat_worker(lam, n, seed, "calib"), workers))
    return NullCalibration(
        lam=lam,
        n=n,
        trials=calib_trials,
        mean=float(stats.mean()),
        sd=float(stats.std(ddof=1)),
        stats=stats,
    )


@dataclass(frozen=True)
class CalibratedTest:
    """Threshold test on the standardized statistic: output 'p' iff Z >= tau.

    target_alpha 0 and 1 give the constant tests (tau = +inf / -inf).
    """

    lam: float
    n: int
    tau: float
    null_mean: float
    null_sd: float
    calib_trials: int
    target_alpha: float

    def __post_init__(self):
        if not self.null_sd > 0:
            raise ValueError("null sd must be positive")
        if self.calib_trials < 100:
            raise ValueError("calib_trials must be >= 100")

    def decide_stat(self, h_raw: float, u: float | None = None) -> str:
        """Outcome from a precomputed raw statistic (u ignored; present so
        randomized test stand-ins can share the battery interface)."""
        if self.tau == np.inf:
            return Q_OUTCOME
        if self.tau == -np.inf:
            return P_OUTCOME
        z = (h_raw - self.null_mean) / self.null_sd
        return P_OUTCOME if z >= self.tau else Q_OUTCOME


def make_test(
    lam: float, n: int, target_alpha: float, calib: NullCalibration
) -> CalibratedTest:
    """Test of target size alpha: threshold at the (1 - alpha) empirical
    quantile of the standardized null sample."""
    if not 0.0 <= target_alpha <= 1.0:
        raise ValueError("target_alpha must be in [0, 1]")
    if calib.lam != lam or calib.n != n:
        raise DimensionMismatch("calibration does not match the requested (lam, n)")
    if target_alpha == 0.0:
        tau = np.inf
    elif target_alpha == 1.0:
        tau = -np.inf
    else:
        z = calib.standardize(calib.stats)
        tau = float(np.quantile(z, 1.0 - target_alpha, method="higher"))
    return CalibratedTest(
        lam=lam,
        n=n,
        tau=tau,
        null_mean=calib.mean,
        null_sd=calib.sd,
        calib_trials=calib.trials,
        target_alpha=target_alpha,
    )


def run_test(test: CalibratedTest, y: np.ndarray) -> str:
    """Apply a calibrated test to one observation."""
    y = np.asarray(y, dtype=float)
    if y.shape != (test.n, test.n):
        raise DimensionMismatch(f"observation shape {y.shape} != ({test.n}, {test.n})")
    if test.tau == np.inf:
        return Q_OUTCOME
    if test.tau == -np.inf:
        return P_OUTCOME
    h = lss_statistic(eigenvalues(y), test.lam).value
    return test.decide_stat(h)


@dataclass(frozen=True)
class RocEstimate:
    alpha_target: float
    alpha_hat: float
    beta_hat: float
    se_alpha: float
    se_beta: float
    phi_lambda_alpha: float


@dataclass(frozen=True)
class RocRun:
    """Grid of ROC point estimates plus the arm summaries behind them."""

    points: list[RocEstimate]
    calib: NullCalibration
    null_mean: float
    alt_mean: float
    trials: int

    @property
    def standardized_gap(self) -> float:
        """(mean alt statistic - mean fresh null statistic) / calibrated sd."""
        return (self.alt_mean - self.null_mean) / self.calib.sd

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)


def _arm_stats(lam, n, prior, trials, seed, tag, test_lam, workers):
    def work(i):
        rng = derive_rng(seed, tag, i)
        if lam == 0.0:
            y = sample_goe(n, rng)
        else:
            y = sample_spiked(prior, lam, n, rng).y
        return lss_statistic(eigenvalues(y), test_lam).value

    return np.array(mc_collect(trials, work, workers))


def empirical_roc(
    lam: float,
    n: int,
    trials: int,
    alpha_grid,
    seed: int,
    prior: SpikePrior | None = None,
    calib_trials: int = 2000,
    test_lam: float | None = None,
    calib: NullCalibration | None = None,
    workers: int | None = None,
) -> RocRun:
    """Size/power estimates of the calibrated test at each target size.

    Calibration draws set the thresholds; size and power then come from
    fresh Monte Carlo under the null and the spiked alternative (one shared
    pool of fresh statistics serves every grid point). Estimated powers are
    made nondecreasing in estimated size by pool-adjacent-violators cleanup.

    ``test_lam`` sets the statistic's SNR parameter separately from the model
    SNR (required when lam = 0, where the matched statistic is degenerate).
    A precomputed ``calib`` skips the calibration arm.
    """
    if trials < 100:
        raise ValueError("trials must be >= 100")
    alpha_grid = [float(a) for a in alpha_grid]
    if any(not 0.0 < a < 1.0 for a in alpha_grid):
        raise ValueError("alpha grid must lie in (0, 1)")
    t_lam = lam if test_lam is None else test_lam
    if not 0.0 < t_lam < 1.0:
        raise ValueError("the test statistic needs lam in (0, 1); pass test_lam")
    prior = prior if prior is not None else rademacher()

    if calib is None:
        calib = calibrate_null(t_lam, n, calib_trials, seed, workers)
    elif calib.lam != t_lam or calib.n != n:
        raise DimensionMismatch("calibration does not match the requested (lam, n)")
    h_null = _arm_stats(0.0, n, prior, trials, seed, "roc-null", t_lam, workers)
    h_alt = _arm_stats(lam, n, prior, trials, seed, "roc-alt", t_lam, workers)
    z_null = calib.standardize(h_null)
    z_alt = calib.standardize(h_alt)

    rows = []
    for a in alpha_grid:
        test = make_test(t_lam, n, a, calib)
        a_hat = float(np.mean(z_null >= test.tau))
        b_hat = float(np.mean(z_alt >= test.tau))
        rows.append((a, a_hat, b_hat))

    # PAV cleanup: power nondecreasing in measured size
    order = np.argsort([r[1] for r in rows], kind="stable")
    betas = np.array([rows[i][2] for i in order])
    fixed = isotonic_regression(betas, increasing=True).x
    cleaned = {int(order[j]): float(fixed[j]) for j in range(len(order))}

    out = []
    for i, (a, a_hat, _) in enumerate(rows):
        b_hat = cleaned[i]
        out.append(
            RocEstimate(
                alpha_target=a,
                alpha_hat=a_hat,
                beta_hat=b_hat,
                se_alpha=float(np.sqrt(a_hat * (1 - a_hat) / trials)),
                se_beta=float(np.sqrt(b_hat * (1 - b_hat) / trials)),
                phi_lambda_alpha=float(phi_eval(lam, a_hat)),
            )
        )
    return RocRun(
        points=out,
        calib=calib,
        null_mean=float(h_null.mean()),
        alt_mean=float(h_alt.mean()),
        trials=trials,
    )


def top_eigenvalue_diag(
    lam: float,
    n: int,
    trials: int,
    seed: int,
    prior: SpikePrior | None = None,
    workers: int | None = None,
) -> float:
    """Monte Carlo mean of the top eigenvalue under the spiked model."""
    if trials < 10:
        raise ValueError("trials must be >= 10")
    prior = prior if prior is not None else rademacher()

    def work(i):
        rng = derive_rng(seed, "topeig", i)
        y = sample_spiked(prior, lam, n, rng).y if lam > 0 else sample_goe(n, rng)
        return eigenvalues(y).top

    return float(np.mean(mc_collect(trials, work, workers)))
