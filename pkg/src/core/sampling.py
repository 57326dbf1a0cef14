"""
Random sampling helpers shared by the tessellation and the engine.

All functions take an explicit ``numpy.random.Generator`` so that every
draw is reproducible from the simulation seed.
"""

import math
from typing import Sequence, Union

import numpy as np

from src.models.exceptions import ConfigError, NoCandidate

_MIN_BATCH = 16


def sample_truncated_power_law(
    rng: np.random.Generator,
    size: int,
    exponent: float,
    cutoff: float,
    x_min: float = 1.0,
) -> np.ndarray:
    """
    Draw ``size`` values from p(x) ∝ x^(-exponent) * exp(-x / cutoff), x >= x_min.

    Rejection sampling from one of two proposals. When
    (exponent - 1) * cutoff > x_min the proposal is the pure power law
    (inverse CDF) and acceptance is exp(-(x - x_min) / cutoff). Otherwise,
    including every exponent <= 1 where the pure power law cannot be
    normalised, the proposal is the shifted exponential and acceptance is
    (x / x_min)^(-exponent).

    Args:
        rng: Random generator
        size: Number of draws
        exponent: Power-law exponent (>= 0)
        cutoff: Exponential cutoff scale (> 0, may be inf when exponent > 1)
        x_min: Lower truncation point (> 0)

    Returns:
        Array of ``size`` draws
    """
    if size < 0:
        raise ConfigError("size must be non-negative")
    if exponent < 0 or x_min <= 0 or cutoff <= 0:
        raise ConfigError(
            f"Invalid truncated power law (exponent={exponent}, cutoff={cutoff}, x_min={x_min})"
        )
    if exponent <= 1 and not math.isfinite(cutoff):
        raise ConfigError("An infinite cutoff needs an exponent greater than one")

    pareto = exponent > 1 and (exponent - 1.0) * cutoff > x_min
    out = np.empty(size, dtype=float)
    filled = 0
    while filled < size:
        batch = max(4 * (size - filled), _MIN_BATCH)
        with np.errstate(over="ignore", divide="ignore"):
            if pareto:
                u = 1.0 - rng.random(batch)
                x = x_min * u ** (-1.0 / (exponent - 1.0))
                accept = np.exp(-(x - x_min) / cutoff)
            else:
                x = x_min + rng.exponential(cutoff, batch)
                accept = (x / x_min) ** (-exponent)
        kept = x[(rng.random(batch) < accept) & np.isfinite(x)]
        take = kept[: size - filled]
        out[filled : filled + take.size] = take
        filled += take.size
    return out


def weighted_index(rng: np.random.Generator, weights: Union[np.ndarray, Sequence[float]]) -> int:
    """Index drawn with probability proportional to ``weights``."""
    cumulative = np.cumsum(np.asarray(weights, dtype=float))
    if cumulative.size == 0 or not cumulative[-1] > 0:
        raise NoCandidate("No positive weight to sample from")
    target = rng.random() * cumulative[-1]
    return int(min(np.searchsorted(cumulative, target, side="right"), cumulative.size - 1))
