"""
Relevance weights of tessellation tiles.

Real relevance is the number of check-ins falling in each tile, with a
floor of ``DEFAULT_RELEVANCE`` for empty tiles. Synthetic relevance is drawn
from a truncated power law on [1, inf).
"""

import logging
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.core.sampling import sample_truncated_power_law
from src.models.data_models import LAT, LNG, GeoPoint
from src.models.exceptions import ConfigError
from src.tessellation.tessellation import WeightedTessellation

logger = logging.getLogger(__name__)

DEFAULT_RELEVANCE = 0.1
SYNTHETIC_BETA = 1.25
SYNTHETIC_LAMBDA = 104.0

Points = Union[Sequence[GeoPoint], pd.DataFrame]


def _coordinates(points: Points) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(points, pd.DataFrame):
        return points[LAT].to_numpy(dtype=float), points[LNG].to_numpy(dtype=float)
    lat = np.array([p.lat for p in points], dtype=float)
    lng = np.array([p.lng for p in points], dtype=float)
    return lat, lng


def assign_relevance(tess: WeightedTessellation, points: Points) -> Tuple[WeightedTessellation, int]:
    """
    Count the points falling in each tile.

    Args:
        tess: Tessellation to weight
        points: GeoPoints, or a frame with ``lat`` and ``lng`` columns

    Returns:
        Tuple of the weighted tessellation and the number of dropped points
        (outside the bounding box or in an excluded tile)
    """
    lat, lng = _coordinates(points)
    ids = tess.locate(lat, lng) if lat.size else np.empty(0, dtype=np.int64)
    inside = ids >= 0
    dropped = int(np.count_nonzero(~inside))
    counts = np.bincount(ids[inside], minlength=len(tess)).astype(float)
    weights = np.where(counts >= 1, counts, DEFAULT_RELEVANCE)
    if dropped:
        logger.warning(f"Dropped {dropped} of {lat.size} points outside the tessellation")
    logger.info(f"Assigned relevance from {lat.size - dropped} points to {len(tess)} tiles")
    return tess.with_relevance(weights), dropped


def sample_synthetic_relevance(
    n: int,
    beta: float = SYNTHETIC_BETA,
    lam: float = SYNTHETIC_LAMBDA,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Draw ``n`` relevance values from w^(-beta) * exp(-w / lam) on [1, inf)."""
    if n < 0:
        raise ConfigError(f"Cannot draw {n} relevance values")
    if not beta > 0 or not lam > 0:
        raise ConfigError(f"Synthetic relevance needs beta > 0 and lambda > 0 (got {beta}, {lam})")
    rng = rng if rng is not None else np.random.default_rng()
    return sample_truncated_power_law(rng, n, beta, lam, x_min=1.0)


def with_synthetic_relevance(
    tess: WeightedTessellation,
    rng: np.random.Generator,
    beta: float = SYNTHETIC_BETA,
    lam: float = SYNTHETIC_LAMBDA,
) -> WeightedTessellation:
    """Replace the tessellation's relevance with synthetic draws."""
    return tess.with_relevance(sample_synthetic_relevance(len(tess), beta, lam, rng))
