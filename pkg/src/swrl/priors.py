"""Spike priors: mean-0, variance-1 distributions with finitely many atoms.

All priors are finite-support (hence subgaussian), which is what the
downstream norm computations assume. Three constructors cover the cases the
rest of the package uses:

* ``rademacher()``          -- +-1 with probability 1/2 each
* ``sparse_rademacher(rho)``-- +-1/sqrt(rho) w.p. rho/2 each, 0 otherwise
* ``finite_atoms(v, p)``    -- arbitrary atoms, validated for mean/variance
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidPrior

__all__ = [
    "SpikePrior",
    "rademacher",
    "sparse_rademacher",
    "finite_atoms",
    "validate",
    "sample_vector",
]

# slack for exact-rational invariants under double arithmetic
_ATOL = 1e-12


@dataclass(frozen=True)
class SpikePrior:
    """Finite-atom spike-entry distribution.

    Attributes
    ----------
    values : ndarray
        Atom locations.
    probs : ndarray
        Atom probabilities (same length as ``values``).
    name : str
        Short descriptor used in logs and CLI output.
    """

    values: np.ndarray
    probs: np.ndarray
    name: str = "atoms"
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "_cum", np.cumsum(probs))

    @property
    def max_abs_atom(self) -> float:
        return float(np.max(np.abs(self.values)))


def rademacher() -> SpikePrior:
    return SpikePrior(np.array([-1.0, 1.0]), np.array([0.5, 0.5]), "rademacher")


def sparse_rademacher(rho: float) -> SpikePrior:
    """Sparse prior: +-1/sqrt(rho) w.p. rho/2 each, 0 w.p. 1-rho.

    The scaling forces unit variance for any sparsity level rho in (0, 1].
    """
    if not 0.0 < rho <= 1.0:
        raise InvalidPrior(f"sparsity rho must be in (0, 1], got {rho}")
    a = 1.0 / np.sqrt(rho)
    return SpikePrior(
        np.array([-a, 0.0, a]),
        np.array([rho / 2.0, 1.0 - rho, rho / 2.0]),
        f"sparse(rho={rho:g})",
    )


def finite_atoms(values, probs) -> SpikePrior:
    prior = SpikePrior(np.asarray(values, float), np.asarray(probs, float))
    validate(prior)
    return prior


def validate(prior: SpikePrior) -> None:
    """Check the prior invariants; raise InvalidPrior naming any violation.

    Invariants: atoms finite, probabilities nonnegative and summing to 1,
    mean 0 and variance 1 (all within 1e-12).
    """
    v, p = prior.values, prior.probs
    if v.ndim != 1 or p.shape != v.shape or v.size == 0:
        raise InvalidPrior("values and probs must be equal-length nonempty vectors")
    if not np.all(np.isfinite(v)):
        raise InvalidPrior("support is not bounded: non-finite atom")
    if np.any(p < -_ATOL):
        raise InvalidPrior("negative atom probability")
    if abs(p.sum() - 1.0) > _ATOL:
        raise InvalidPrior(f"probs sum to {p.sum()!r}, not 1")
    mean = float(p @ v)
    if abs(mean) > _ATOL:
        raise InvalidPrior(f"mean != 0 (got {mean!r})")
    var = float(p @ v**2)
    if abs(var - 1.0) > _ATOL:
        raise InvalidPrior(f"variance != 1 (got {var!r})")


def sample_vector(prior: SpikePrior, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. entries from the prior, deterministic given the rng state.

    Inverse-CDF sampling on the atom table, so the draw is bit-reproducible
    across platforms for a fixed stream.
    """
    if n < 1:
        raise ValueError("n must be positive")
    u = rng.random(n)
    return prior.values[np.searchsorted(prior._cum, u, side="right")]
