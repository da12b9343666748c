"""Reproducible random streams and inverse-CDF outcome selection.

Every sampler consumes exactly one uniform double per lattice site, in site
order. A trial stream is a PCG64 generator seeded from ``(seed, trial)``;
sample ``i`` of that trial uses draws ``i*n_sites ... (i+1)*n_sites - 1``, so a
worker can jump straight to its block with ``advance`` and parallel runs
reproduce serial ones draw for draw.
"""

from __future__ import annotations

import numpy as np

#: conditional probabilities below this are treated as unreachable branches
ZERO_BRANCH = 1e-300


class ZeroProbabilityError(ArithmeticError):
    """Raised when a sampled branch has (numerically) zero probability."""


def trial_stream(seed: int, trial: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, trial])))


def sample_uniforms(seed: int, trial: int, start: int, count: int, n_sites: int) -> np.ndarray:
    """Uniforms for samples ``start .. start+count-1`` of one trial, shape (count, n_sites)."""
    bitgen = np.random.PCG64(np.random.SeedSequence([seed, trial]))
    if start:
        bitgen.advance(start * n_sites)
    return np.random.Generator(bitgen).random((count, n_sites))


def draw_outcome(probs: np.ndarray, u: float) -> int:
    """Inverse-CDF draw over outcomes in index order.

    ``u`` is scaled by the total mass, so tables that are normalized only to
    rounding still map ``[0, 1)`` onto the full support. Outcomes with zero
    probability are never selected.
    """
    cdf = np.cumsum(probs)
    if not cdf[-1] > 0:
        raise ZeroProbabilityError("conditional distribution has no mass")
    idx = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    if idx >= len(probs):
        idx = int(np.flatnonzero(probs > 0)[-1])
    if probs[idx] < ZERO_BRANCH:
        raise ZeroProbabilityError(f"outcome {idx} drawn with probability {probs[idx]:.3e}")
    return idx
