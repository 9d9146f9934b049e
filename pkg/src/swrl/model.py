"""Observation model: GOE noise plus an optional rank-1 planted spike.

An observation is Y = snr * x x^T / ||x||^2 + W with x drawn entrywise from a
spike prior and W from the Gaussian Orthogonal Ensemble (off-diagonal variance
1/n, diagonal variance 2/n). When ||x|| = 0 (possible for sparse priors) the
spike term is the zero matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .priors import SpikePrior, sample_vector

__all__ = ["SpikedSample", "sample_goe", "sample_spiked"]


@dataclass(frozen=True)
class SpikedSample:
    """One symmetric observation, with generation metadata for diagnostics.

    The planted spike (and, when requested, the raw noise matrix) are kept
    only for diagnostics; code paths that *test* an observation must receive
    the matrix alone via :meth:`observation`.
    """

    y: np.ndarray
    lam: float
    n: int
    planted_spike: np.ndarray | None = None
    prior_tag: str = ""
    noise: np.ndarray | None = None

    def observation(self) -> np.ndarray:
        """The observation matrix only, as handed to testing code."""
        return self.y


def sample_goe(n: int, rng: np.random.Generator) -> np.ndarray:
    """One n x n GOE draw: symmetric, Var = 1/n off-diagonal, 2/n on it.

    Construction (A + A^T)/sqrt(2n) from an i.i.d. standard normal A keeps
    the upper-triangle entries independent and the matrix bitwise symmetric.
    """
    if n < 1:
        raise ValueError("n must be positive")
    a = rng.standard_normal((n, n))
    a += a.T
    a /= np.sqrt(2.0 * n)
    return a


def sample_spiked(
    prior: SpikePrior,
    lam: float,
    n: int,
    rng: np.random.Generator,
    keep_noise: bool = False,
) -> SpikedSample:
    """Draw Y = lam * x x^T / ||x||^2 + W.

    With lam = 0 no spike vector is drawn, so the stream position matches a
    bare ``sample_goe`` call and Y is bit-identical to the pure-noise draw.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    spike = sample_vector(prior, n, rng) if lam > 0 else None
    w = sample_goe(n, rng)
    if spike is None:
        y = w.copy() if keep_noise else w
    else:
        norm_sq = float(spike @ spike)
        if norm_sq == 0.0:
            y = w.copy() if keep_noise else w
        else:
            y = (lam / norm_sq) * np.outer(spike, spike)
            y += w
    return SpikedSample(
        y=y,
        lam=lam,
        n=n,
        planted_spike=spike,
        prior_tag=prior.name,
        noise=w if keep_noise else None,
    )
