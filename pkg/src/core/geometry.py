"""
Spherical distance and location-vector arithmetic.
"""

import math
from typing import Hashable

import numpy as np

from src.models.data_models import GeoPoint, LocationVector
from src.models.exceptions import EmptyVector

EARTH_RADIUS_KM = 6371.0


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points, in kilometers."""
    lat1, lat2 = math.radians(a.lat), math.radians(b.lat)
    dlat = lat2 - lat1
    dlng = math.radians(b.lng) - math.radians(a.lng)
    h = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlng / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(math.sqrt(min(1.0, h)))


def haversine_km_vector(
    lat1: np.ndarray, lng1: np.ndarray, lat2: np.ndarray, lng2: np.ndarray
) -> np.ndarray:
    """
    Vectorized haversine distance (degrees in, kilometers out).

    Arguments broadcast against each other, so a scalar origin and an array
    of destinations yields a distance row.
    """
    phi1 = np.radians(lat1)
    phi2 = np.radians(lat2)
    dphi = phi2 - phi1
    dlmb = np.radians(lng2) - np.radians(lng1)
    h = np.sin(dphi / 2.0) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlmb / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.minimum(1.0, h)))


def location_frequency(lv: LocationVector, location: Hashable) -> float:
    """Fraction of the visits in ``lv`` made to ``location``."""
    if lv.total == 0:
        raise EmptyVector("Cannot compute frequencies of an empty location vector")
    return lv.count(location) / lv.total


def mobility_similarity(a: LocationVector, b: LocationVector) -> float:
    """
    Cosine similarity of two sparse visit-count vectors.

    Defined as 0 when either vector has no visits.
    """
    if a.total == 0 or b.total == 0:
        return 0.0
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    dot = sum(count * large.count(key) for key, count in small.items())
    if dot == 0:
        return 0.0
    return min(1.0, dot / (a.norm() * b.norm()))
