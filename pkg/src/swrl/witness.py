"""Lookup-table witness functions built from a battery of tests.

Given a battery of r+1 tests whose achieved (size, power) points form a
polyline in concave position (tests 0 and r are the constant always-null /
always-alternative tests), every observation yields an outcome vector
s in {p, q}^(r+1) with s_0 = q and s_r = p. The witness maps s to a
nonnegative value f(s) chosen inside the alternating-sum interval

    sum_i sigma_i(s) * slope_i  <=  f(s)  <=  sqrt(sum_i sigma_i(s) * slope_i^2),

where sigma_i is +1 on a q->p step, -1 on a p->q step, 0 otherwise. The
interval is well defined because the slopes are positive and decreasing and
the nonzero sigma_i alternate in sign starting positive. On monotone outcome
vectors (nested rejection regions) the interval collapses to the single
slope of the straddled segment.

The expectation of f under the alternative divided by the root mean square
under the null then estimates the value of the achieved polyline, which is
the quantity the norm computations in :mod:`swrl.lowdeg` bound from above.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import MalformedOutcomes, TooManyTests
from .lowdeg import NormEstimate, ratio_estimate
from .model import sample_goe, sample_spiked
from .priors import SpikePrior, rademacher
from .roc import RocPolyline, val_piecewise
from .spectral import P_OUTCOME, Q_OUTCOME, eigenvalues, lss_statistic
from .streams import derive_rng, mc_collect

__all__ = [
    "SignPattern",
    "WitnessFn",
    "WitnessEvaluation",
    "sign_pattern",
    "altsum_interval",
    "build_witness",
    "evaluate_witness",
    "evaluate_witness_synthetic",
]

# above this battery size the 2^(r-1) lookup table is materialized lazily
_EAGER_TABLE_MAX = 12


@dataclass(frozen=True)
class SignPattern:
    """Outcome vector plus its step signs sigma in {-1, 0, +1}^r."""

    s: tuple
    sigma: np.ndarray


def sign_pattern(s) -> SignPattern:
    """Step signs of an outcome vector; requires s_0 = q and s_last = p."""
    s = tuple(s)
    if len(s) < 2:
        raise MalformedOutcomes("need at least the two constant tests")
    if any(o not in (P_OUTCOME, Q_OUTCOME) for o in s):
        raise MalformedOutcomes(f"outcomes must be '{P_OUTCOME}' or '{Q_OUTCOME}'")
    if s[0] != Q_OUTCOME or s[-1] != P_OUTCOME:
        raise MalformedOutcomes("outcome vector must start with 'q' and end with 'p'")
    sigma = np.zeros(len(s) - 1, dtype=int)
    for i in range(len(s) - 1):
        if s[i] == Q_OUTCOME and s[i + 1] == P_OUTCOME:
            sigma[i] = 1
        elif s[i] == P_OUTCOME and s[i + 1] == Q_OUTCOME:
            sigma[i] = -1
    return SignPattern(s=s, sigma=sigma)


def altsum_interval(sigma: np.ndarray, slopes: np.ndarray) -> tuple[float, float]:
    """Valid value interval (lo, hi) for a step-sign vector.

    With positive strictly decreasing slopes and alternating nonzero signs
    starting positive, 0 <= lo <= hi always holds.
    """
    slopes = np.asarray(slopes, dtype=float)
    if np.any(slopes <= 0) or np.any(np.diff(slopes) >= 0):
        raise ValueError("slopes must be strictly positive and strictly decreasing")
    sigma = np.asarray(sigma)
    if sigma.shape != slopes.shape:
        raise ValueError("sigma and slopes must have equal length")
    lo = float(sigma @ slopes)
    hi = float(np.sqrt(sigma @ slopes**2))
    return lo, hi


@dataclass
class WitnessFn:
    """Map from admissible outcome vectors to nonnegative values.

    The table is fully materialized for small batteries and filled on demand
    for large ones; either way ``value(s)`` is the lookup.
    """

    slopes: np.ndarray
    polyline: RocPolyline
    choice: str
    table: dict = field(default_factory=dict)
    lazy: bool = False

    @property
    def r(self) -> int:
        return len(self.slopes)

    def _compute(self, s) -> float:
        lo, hi = altsum_interval(sign_pattern(s).sigma, self.slopes)
        if self.choice == "lower":
            return lo
        if self.choice == "upper":
            return hi
        return 0.5 * (lo + hi)

    def value(self, s) -> float:
        s = tuple(s)
        if s not in self.table:
            if not self.lazy:
                raise MalformedOutcomes(f"outcome vector {s} is not admissible")
            self.table[s] = self._compute(s)
        return self.table[s]


def build_witness(v: RocPolyline, choice: str = "lower") -> WitnessFn:
    """Witness for a battery achieving the points of ``v``.

    choice picks the point of the alternating-sum interval: 'lower' (the
    default; coincides with the straddled-segment slope on monotone
    patterns), 'upper', or 'midpoint'.
    """
    if choice not in ("lower", "upper", "midpoint"):
        raise ValueError(f"unknown choice {choice!r}")
    r = v.segments
    if r > 20:
        raise TooManyTests(f"battery of size {r + 1} would need a 2^{r - 1}-entry table")
    wfn = WitnessFn(
        slopes=v.slopes.copy(),
        polyline=v,
        choice=choice,
        lazy=r > _EAGER_TABLE_MAX,
    )
    if not wfn.lazy:
        for middle in product((Q_OUTCOME, P_OUTCOME), repeat=r - 1):
            s = (Q_OUTCOME, *middle, P_OUTCOME)
            wfn.table[s] = wfn._compute(s)
    return wfn


def _is_monotone(s) -> bool:
    seen_p = False
    for o in s:
        if o == P_OUTCOME:
            seen_p = True
        elif seen_p:
            return False
    return True


@dataclass(frozen=True)
class WitnessEvaluation:
    r_hat: NormEstimate
    val_conc_v: float
    monotone_fraction: float


def evaluate_witness(
    wfn: WitnessFn,
    tests,
    lam: float,
    n: int,
    trials: int,
    seed: int,
    prior: SpikePrior | None = None,
    workers: int | None = None,
) -> WitnessEvaluation:
    """Monte Carlo ratio of the witness on fresh draws from both models.

    Each trial samples one observation per arm, computes the raw statistic
    once, feeds it to every test in the battery (tests receive an auxiliary
    uniform so randomized stand-ins stay reproducible), and looks up f. The
    returned estimate is E_alt[f] / sqrt(E_null[f^2]) with delta-method
    errors, alongside the value of the polyline the battery targets.
    """
    if len(tests) != wfn.r + 1:
        raise MalformedOutcomes(f"battery size {len(tests)} != {wfn.r + 1}")
    prior = prior if prior is not None else rademacher()

    def arm_worker(tag, spiked):
        def work(i):
            rng = derive_rng(seed, tag, i)
            if spiked:
                y = sample_spiked(prior, lam, n, rng).y
            else:
                y = sample_goe(n, rng)
            h = lss_statistic(eigenvalues(y), lam).value
            aux = rng.random(len(tests))
            s = tuple(t.decide_stat(h, aux[j]) for j, t in enumerate(tests))
            return wfn.value(s), _is_monotone(s)

        return work

    null_rows = mc_collect(trials, arm_worker("wit-null", False), workers)
    alt_rows = mc_collect(trials, arm_worker("wit-alt", True), workers)
    f_null = np.array([row[0] for row in null_rows])
    f_alt = np.array([row[0] for row in alt_rows])
    monotone = np.mean([row[1] for row in null_rows + alt_rows])
    return WitnessEvaluation(
        r_hat=ratio_estimate(f_alt, f_null),
        val_conc_v=val_piecewise(wfn.polyline),
        monotone_fraction=float(monotone),
    )


def evaluate_witness_synthetic(
    wfn: WitnessFn, trials: int, seed: int
) -> WitnessEvaluation:
    """Idealized-battery check: coin-flip tests with exact marginals.

    One shared uniform drives the whole battery: under the null, test i
    rejects iff U < a_i; under the alternative iff U < b_i, where (a_i, b_i)
    are the polyline points. The battery is then perfectly nested with
    exactly the target size and power, so the ratio estimates the polyline
    value with pure Monte Carlo error and no model or calibration noise.
    """
    a = wfn.polyline.alphas
    b = wfn.polyline.betas

    def worker(marginals, tag):
        def work(i):
            u = derive_rng(seed, tag, i).random()
            s = tuple(P_OUTCOME if u < m else Q_OUTCOME for m in marginals)
            return wfn.value(s)

        return work

    f_null = np.array(mc_collect(trials, worker(a, "syn-null")))
    f_alt = np.array(mc_collect(trials, worker(b, "syn-alt")))
    return WitnessEvaluation(
        r_hat=ratio_estimate(f_alt, f_null),
        val_conc_v=val_piecewise(wfn.polyline),
        monotone_fraction=1.0,
    )
