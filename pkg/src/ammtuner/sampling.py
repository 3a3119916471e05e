"""Seeded random sampling helpers for the market simulation."""
from __future__ import annotations

from ammtuner.errors import SamplingError

REJECTION_BUDGET = 10_000


def sample_truncated_normal(mu, sigma, lower, upper, rng,
                            budget=REJECTION_BUDGET) -> float:
    """Draw from a normal(mu, sigma) conditioned on [lower, upper].

    Plain rejection sampling: draws outside the bounds are discarded.  The
    budget guards against pathological parameters (bounds far in the tail);
    exhausting it raises SamplingError rather than looping forever.
    """
    if lower >= upper:
        raise ValueError("lower bound must be below upper bound")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    for _ in range(budget):
        value = mu + sigma * rng.standard_normal()
        if lower <= value <= upper:
            return value
    raise SamplingError(
        f"no draw from normal({mu}, {sigma}) landed in [{lower}, {upper}] "
        f"within {budget} attempts")
