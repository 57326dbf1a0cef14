"""
Mobility measures computed from trajectory frames.

A trajectory frame has the columns uid, lat, lng and timestamp. Every
function sorts by (uid, timestamp) itself, so callers may pass frames in any
order. Inside these measures a location is an exact (lat, lng) pair.
"""

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from src.core.geometry import haversine_km_vector, mobility_similarity
from src.engine.social_graph import SocialGraph
from src.models.data_models import DATETIME, LAT, LNG, UID, LocationVector, Measure, MeasureSamples
from src.models.exceptions import ConfigError
from src.tessellation.tessellation import WeightedTessellation

logger = logging.getLogger(__name__)

WAITING_MODES = ("all", "cut_lt_1h", "remap_lt_1h_to_1h")
DEFAULT_TOP_RANKS = 20


def _sorted(trajs: pd.DataFrame) -> pd.DataFrame:
    frame = trajs[[UID, LAT, LNG, DATETIME]]
    if not pd.api.types.is_datetime64_any_dtype(frame[DATETIME]):
        frame = frame.assign(**{DATETIME: pd.to_datetime(frame[DATETIME])})
    return frame.sort_values([UID, DATETIME], kind="mergesort").reset_index(drop=True)


def _consecutive(frame: pd.DataFrame) -> np.ndarray:
    """Mask of rows whose predecessor belongs to the same user."""
    uid = frame[UID].to_numpy()
    same = np.zeros(len(frame), dtype=bool)
    same[1:] = uid[1:] == uid[:-1]
    return same


def location_vectors(trajs: pd.DataFrame) -> Dict[int, LocationVector]:
    """Visit counts per user keyed by (lat, lng)."""
    vectors: Dict[int, LocationVector] = {}
    for (uid, lat, lng), count in trajs.groupby([UID, LAT, LNG], sort=True).size().items():
        vectors.setdefault(int(uid), LocationVector()).add((lat, lng), int(count))
    return vectors


def jump_lengths(trajs: pd.DataFrame) -> MeasureSamples:
    """Distance in km between consecutive records of each user."""
    frame = _sorted(trajs)
    same = _consecutive(frame)
    lat, lng = frame[LAT].to_numpy(), frame[LNG].to_numpy()
    index = np.flatnonzero(same)
    values = haversine_km_vector(lat[index - 1], lng[index - 1], lat[index], lng[index])
    return MeasureSamples(Measure.JUMP_LENGTH, values)


def radius_of_gyration(trajs: pd.DataFrame) -> MeasureSamples:
    """
    Spatial spread of each user's records.

    The center of mass is the arithmetic mean of latitudes and longitudes;
    distances to it are great-circle distances.
    """
    frame = _sorted(trajs)
    if frame.empty:
        return MeasureSamples(Measure.RADIUS_OF_GYRATION, np.empty(0))
    center = frame.groupby(UID)[[LAT, LNG]].transform("mean")
    distances = haversine_km_vector(frame[LAT], frame[LNG], center[LAT], center[LNG])
    squared = pd.Series(np.asarray(distances) ** 2, index=frame.index)
    values = np.sqrt(squared.groupby(frame[UID]).mean().to_numpy())
    return MeasureSamples(Measure.RADIUS_OF_GYRATION, values)


def visits_per_location(trajs: pd.DataFrame, tess: WeightedTessellation) -> MeasureSamples:
    """Records per tessellation tile; records outside every tile are counted in the metadata."""
    ids = tess.locate(trajs[LAT].to_numpy(), trajs[LNG].to_numpy()) if len(trajs) else np.empty(0, dtype=int)
    inside = ids >= 0
    outside = int(np.count_nonzero(~inside))
    if outside:
        logger.warning(f"{outside} records fall outside the tessellation")
    counts = np.bincount(ids[inside], minlength=len(tess)).astype(float)
    return MeasureSamples(Measure.VISITS_PER_LOCATION, counts, {"out_of_tessellation": float(outside)})


def location_frequency_rank(trajs: pd.DataFrame, k: int = DEFAULT_TOP_RANKS) -> MeasureSamples:
    """Mean visit frequency of each user's 1st..k-th most visited location."""
    if k < 1:
        raise ConfigError(f"Need at least one rank, got {k}")
    vectors = location_vectors(trajs)
    ranks = np.zeros((len(vectors), k))
    for row, lv in enumerate(vectors.values()):
        freqs = sorted(lv.frequencies().values(), reverse=True)[:k]
        ranks[row, : len(freqs)] = freqs
    values = ranks.mean(axis=0) if len(vectors) else np.zeros(k)
    return MeasureSamples(Measure.LOCATION_FREQUENCY_RANK, values, {"users": float(len(vectors))})


def waiting_times(trajs: pd.DataFrame, mode: str = "all") -> MeasureSamples:
    """
    Hours between consecutive records of each user.

    Args:
        trajs: Trajectory frame
        mode: ``all``; ``cut_lt_1h`` drops gaps under one hour;
            ``remap_lt_1h_to_1h`` raises them to one hour
    """
    if mode not in WAITING_MODES:
        raise ConfigError(f"Unknown waiting-time mode '{mode}' (expected one of {', '.join(WAITING_MODES)})")
    frame = _sorted(trajs)
    same = _consecutive(frame)
    seconds = frame[DATETIME].diff().dt.total_seconds().to_numpy()
    values = seconds[same] / 3600.0
    if mode == "cut_lt_1h":
        values = values[values >= 1.0]
    elif mode == "remap_lt_1h_to_1h":
        values = np.maximum(values, 1.0)
    return MeasureSamples(Measure.WAITING_TIME, values)


def uncorrelated_entropy(trajs: pd.DataFrame) -> MeasureSamples:
    """Base-2 entropy of each user's visit frequencies."""
    values = []
    for lv in location_vectors(trajs).values():
        values.append(float(stats.entropy(list(lv.frequencies().values()), base=2)))
    return MeasureSamples(Measure.UNCORRELATED_ENTROPY, np.array(values))


def activity_per_hour(trajs: pd.DataFrame) -> MeasureSamples:
    """Share of movements (every record after a user's first) starting in each hour of the day."""
    frame = _sorted(trajs)
    hours = frame[DATETIME].dt.hour.to_numpy()[_consecutive(frame)]
    counts = np.bincount(hours, minlength=24).astype(float)
    total = counts.sum()
    if total == 0:
        logger.warning("No movement to compute activity per hour from")
        return MeasureSamples(Measure.ACTIVITY_PER_HOUR, counts, {"movements": 0.0})
    return MeasureSamples(Measure.ACTIVITY_PER_HOUR, counts / total, {"movements": float(total)})


def mobility_similarity_distribution(
    trajs: pd.DataFrame, graph: SocialGraph, rng: np.random.Generator
) -> Tuple[MeasureSamples, MeasureSamples]:
    """
    Cosine similarity of connected users and of as many random non-adjacent pairs.

    Users without records have an empty location vector and similarity 0.
    """
    vectors = location_vectors(trajs)
    empty = LocationVector()

    def similarity(u: int, v: int) -> float:
        return mobility_similarity(vectors.get(u, empty), vectors.get(v, empty))

    edges = sorted((min(u, v), max(u, v)) for u, v in graph.graph.edges)
    edge_values = np.array([similarity(u, v) for u, v in edges])

    n = len(graph)
    wanted = len(edges)
    random_values: List[float] = []
    for _ in range(100 * max(wanted, 1)):
        if len(random_values) >= wanted or n < 2:
            break
        u, v = (int(x) for x in rng.integers(0, n, size=2))
        if u != v and not graph.graph.has_edge(u, v):
            random_values.append(similarity(u, v))
    if len(random_values) < wanted:
        logger.warning(f"Drew only {len(random_values)} of {wanted} random non-adjacent pairs")
    return (
        MeasureSamples(Measure.MOBILITY_SIMILARITY, edge_values, {"pairs": float(len(edges))}),
        MeasureSamples(Measure.MOBILITY_SIMILARITY, np.array(random_values), {"pairs": float(len(random_values))}),
    )


def checkins_per_user(trajs: pd.DataFrame) -> MeasureSamples:
    """Number of records of each user."""
    values = trajs.groupby(UID).size().to_numpy(dtype=float)
    return MeasureSamples(Measure.CHECKINS_PER_USER, values)


def compute_measure(
    measure: Measure,
    trajs: pd.DataFrame,
    tess: Optional[WeightedTessellation] = None,
    graph: Optional[SocialGraph] = None,
    rng: Optional[np.random.Generator] = None,
    waiting_mode: str = "all",
) -> MeasureSamples:
    """Dispatch to the function computing ``measure``; similarity returns the edge samples."""
    if measure is Measure.JUMP_LENGTH:
        return jump_lengths(trajs)
    if measure is Measure.RADIUS_OF_GYRATION:
        return radius_of_gyration(trajs)
    if measure is Measure.VISITS_PER_LOCATION:
        if tess is None:
            raise ConfigError("visits_per_location needs a tessellation")
        return visits_per_location(trajs, tess)
    if measure is Measure.LOCATION_FREQUENCY_RANK:
        return location_frequency_rank(trajs)
    if measure is Measure.WAITING_TIME:
        return waiting_times(trajs, waiting_mode)
    if measure is Measure.UNCORRELATED_ENTROPY:
        return uncorrelated_entropy(trajs)
    if measure is Measure.ACTIVITY_PER_HOUR:
        return activity_per_hour(trajs)
    if measure is Measure.MOBILITY_SIMILARITY:
        if graph is None:
            raise ConfigError("mobility_similarity needs a social graph")
        return mobility_similarity_distribution(trajs, graph, rng or np.random.default_rng(0))[0]
    return checkins_per_user(trajs)


def write_measure(samples: MeasureSamples, path: str) -> None:
    """Dump samples as (measure, value) rows, or (index, value) for per-hour and per-rank curves."""
    if samples.measure in (Measure.ACTIVITY_PER_HOUR, Measure.LOCATION_FREQUENCY_RANK):
        frame = pd.DataFrame({"index": np.arange(len(samples)), "value": samples.values})
    else:
        frame = pd.DataFrame({"measure": samples.measure.value, "value": samples.values})
    frame.to_csv(path, index=False)
