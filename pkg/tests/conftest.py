"""
Pytest configuration and shared fixtures for mobility simulator tests.
"""

from datetime import datetime
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import pytest

from config.model_config import ModelConfig
from src.core.geometry import EARTH_RADIUS_KM
from src.diary.diary_generator import N_STATES, DiaryGenerator
from src.engine.agent import AgentState
from src.models.data_models import DATETIME, LAT, LNG, UID, GeoPoint, Location, LocationVector, ModelVariant
from src.tessellation.tessellation import WeightedTessellation

START = datetime(2012, 4, 10)
END = datetime(2012, 4, 17)

# degrees of longitude per km along the equator
DEG_PER_KM = 180.0 / (np.pi * EARTH_RADIUS_KM)


def make_tessellation(points: Sequence[Tuple[float, float]], relevance: Optional[Sequence[float]] = None):
    """Tessellation without grid geometry from explicit centroids."""
    relevance = relevance if relevance is not None else [1.0] * len(points)
    locations = [Location(i, GeoPoint(lat, lng), w) for i, ((lat, lng), w) in enumerate(zip(points, relevance))]
    lats = [p[0] for p in points]
    lngs = [p[1] for p in points]
    return WeightedTessellation(locations, 1000.0, (min(lats), min(lngs), max(lats), max(lngs)))


def equator_line(distances_km: Sequence[float], relevance: Optional[Sequence[float]] = None):
    """Tiles on the equator at the given distances (km) from the origin."""
    return make_tessellation([(0.0, d * DEG_PER_KM) for d in distances_km], relevance)


def make_agent(uid: int, visits: Dict[int, int], current: int, home: Optional[int] = None) -> AgentState:
    return AgentState(
        id=uid,
        home=current if home is None else home,
        current=current,
        next_event=START,
        lv=LocationVector(visits),
    )


def make_config(variant: ModelVariant = ModelVariant.GEOSIM_GRAVITY, **overrides) -> ModelConfig:
    values = dict(variant=variant, n_agents=2, start=START, end=END, seed=7)
    values.update(overrides)
    return ModelConfig(**values)


def trajectory_frame(rows) -> pd.DataFrame:
    """Frame from (uid, lat, lng, timestamp) tuples."""
    return pd.DataFrame(rows, columns=[UID, LAT, LNG, DATETIME]).assign(
        **{DATETIME: lambda f: pd.to_datetime(f[DATETIME])}
    )


def uniform_generator() -> DiaryGenerator:
    return DiaryGenerator.from_counts(np.zeros((N_STATES, N_STATES), dtype=int))


@pytest.fixture
def line_tessellation():
    """Three tiles on the equator at 0, 1 and 2 km, relevance (1, 2, 8)."""
    return equator_line([0.0, 1.0, 2.0], [1.0, 2.0, 8.0])


@pytest.fixture
def five_tiles():
    """Five tiles along the equator with heterogeneous relevance."""
    return equator_line([0.0, 1.0, 2.5, 4.0, 7.0], [5.0, 2.0, 8.0, 1.0, 3.0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def config():
    return make_config()


@pytest.fixture
def sample_trajectories():
    """Two users, a few records each, one hour apart."""
    return trajectory_frame(
        [
            (0, 40.70, -74.00, "2012-04-10 09:00:00"),
            (0, 40.71, -74.00, "2012-04-10 10:00:00"),
            (0, 40.70, -74.00, "2012-04-10 12:00:00"),
            (1, 40.75, -73.98, "2012-04-10 09:30:00"),
            (1, 40.76, -73.97, "2012-04-10 21:30:00"),
        ]
    )
