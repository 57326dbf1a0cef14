"""
Lazily populated distance matrix between tile centroids.

Only the rows that are actually needed are computed, one full row at a time,
and kept for the rest of the run. Whole rows are cached because every
exploration weighs all candidates from the agent's tile, so a single entry
is never looked up on its own. Memory grows with the number of distinct
origins and reaches |L|^2 floats only if agents start moves from every tile.
An instance belongs to a single simulation and is not shared across threads.
"""

from typing import Dict

import numpy as np

from src.core.geometry import haversine_km_vector
from src.tessellation.tessellation import WeightedTessellation


class DistanceMatrix:
    """Great-circle distances in km between the centroids of a tessellation."""

    def __init__(self, tess: WeightedTessellation):
        self.tess = tess
        self._rows: Dict[int, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self.tess)

    @property
    def cached_rows(self) -> int:
        return len(self._rows)

    def row(self, i: int) -> np.ndarray:
        """Distances from location ``i`` to every location."""
        row = self._rows.get(i)
        if row is None:
            self.tess.check_id(i)
            row = haversine_km_vector(self.tess.lats[i], self.tess.lngs[i], self.tess.lats, self.tess.lngs)
            row[i] = 0.0
            row.setflags(write=False)
            self._rows[i] = row
        return row

    def lookup(self, i: int, j: int) -> float:
        self.tess.check_id(i)
        self.tess.check_id(j)
        if i not in self._rows and j in self._rows:
            return float(self._rows[j][i])
        return float(self.row(i)[j])


def distance_lookup(dm: DistanceMatrix, i: int, j: int) -> float:
    """Distance in km between locations ``i`` and ``j``, computed on first use."""
    return dm.lookup(i, j)
