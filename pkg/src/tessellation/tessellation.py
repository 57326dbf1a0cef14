"""
Weighted squared tessellations.

Tiles are laid out with fixed angular steps: the side in meters is converted
to degrees of latitude with 111,320 m per degree and to degrees of longitude
at the bounding box's middle latitude. Tiles own the half-open interval
[lower, upper) on both axes; the last row and column also own the closing
edge, and are clipped to the bounding box.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from src.models.data_models import GeoPoint, Location
from src.models.exceptions import DegenerateBBox, EmptyResult, FormatError, IdOutOfRange

logger = logging.getLogger(__name__)

METERS_PER_DEGREE = 111_320.0

BBox = Tuple[float, float, float, float]


def _snap_to_edges(values: np.ndarray, origin: float, step: float, n: int) -> np.ndarray:
    """
    Index of the [lower, upper) interval holding each value.

    Division rounding can put a value lying exactly on an edge one interval
    off, so the floor estimate is corrected against the same edge expression
    ``origin + k * step`` that ``GridSpec.cell_bounds`` uses.
    """
    index = np.clip(np.floor((values - origin) / step), 0, n - 1).astype(np.int64)
    index = np.where((index < n - 1) & (values >= origin + (index + 1) * step), index + 1, index)
    index = np.where((index > 0) & (values < origin + index * step), index - 1, index)
    return index


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a squared tessellation before any tile was dropped."""

    min_lat: float
    min_lng: float
    max_lat: float
    max_lng: float
    dlat: float
    dlng: float
    n_rows: int
    n_cols: int

    @property
    def n_cells(self) -> int:
        return self.n_rows * self.n_cols

    def cell_of(self, lat: np.ndarray, lng: np.ndarray) -> np.ndarray:
        """Grid cell index of each point, -1 for points outside the box."""
        lat = np.asarray(lat, dtype=float)
        lng = np.asarray(lng, dtype=float)
        inside = (
            (lat >= self.min_lat)
            & (lat <= self.max_lat)
            & (lng >= self.min_lng)
            & (lng <= self.max_lng)
        )
        rows = _snap_to_edges(lat, self.min_lat, self.dlat, self.n_rows)
        cols = _snap_to_edges(lng, self.min_lng, self.dlng, self.n_cols)
        cells = rows * self.n_cols + cols
        return np.where(inside, cells, -1)

    def cell_bounds(self, cell: int) -> BBox:
        row, col = divmod(cell, self.n_cols)
        lo_lat = self.min_lat + row * self.dlat
        lo_lng = self.min_lng + col * self.dlng
        hi_lat = self.max_lat if row == self.n_rows - 1 else self.min_lat + (row + 1) * self.dlat
        hi_lng = self.max_lng if col == self.n_cols - 1 else self.min_lng + (col + 1) * self.dlng
        return (lo_lat, lo_lng, hi_lat, hi_lng)


class WeightedTessellation:
    """
    Ordered tiles with centroids and relevance weights.

    Location ids are always 0..n-1. When the tessellation is a subset of a
    larger one, ``id_map`` maps the parent's ids to this one's.
    """

    def __init__(
        self,
        locations: List[Location],
        tile_side_m: float,
        bbox: BBox,
        grid: Optional[GridSpec] = None,
        cells: Optional[Sequence[int]] = None,
        id_map: Optional[Dict[int, int]] = None,
    ):
        for expected, location in enumerate(locations):
            if location.id != expected:
                raise FormatError(f"Location ids must be contiguous, found {location.id} at {expected}")
        self.locations = locations
        self.tile_side_m = tile_side_m
        self.bbox = bbox
        self.grid = grid
        self.cells = np.asarray(cells if cells is not None else [], dtype=np.int64)
        self.id_map = id_map or {}
        self.lats = np.array([loc.centroid.lat for loc in locations], dtype=float)
        self.lngs = np.array([loc.centroid.lng for loc in locations], dtype=float)
        self.relevances = np.array([loc.relevance for loc in locations], dtype=float)
        self._id_of_cell: Optional[Dict[int, int]] = None
        self._tree: Optional[cKDTree] = None

    def __len__(self) -> int:
        return len(self.locations)

    def __getitem__(self, location_id: int) -> Location:
        self.check_id(location_id)
        return self.locations[location_id]

    def check_id(self, location_id: int) -> None:
        if not 0 <= location_id < len(self.locations):
            raise IdOutOfRange(f"Location id {location_id} outside [0, {len(self.locations)})")

    def centroid(self, location_id: int) -> GeoPoint:
        return self[location_id].centroid

    def with_relevance(self, relevance: Sequence[float]) -> "WeightedTessellation":
        """Copy of this tessellation with new relevance weights."""
        weights = np.asarray(relevance, dtype=float)
        if weights.shape != (len(self),):
            raise FormatError(f"Expected {len(self)} relevance values, got {weights.size}")
        locations = [
            Location(loc.id, loc.centroid, float(w)) for loc, w in zip(self.locations, weights)
        ]
        return WeightedTessellation(
            locations, self.tile_side_m, self.bbox, self.grid, self.cells, dict(self.id_map)
        )

    def subset(self, keep: Iterable[int]) -> "WeightedTessellation":
        """Keep the given ids (ascending order), re-indexed contiguously."""
        kept = sorted(set(keep))
        if not kept:
            raise EmptyResult("No location left in the tessellation")
        for location_id in kept:
            self.check_id(location_id)
        mapping = {old: new for new, old in enumerate(kept)}
        locations = [
            Location(new, self.locations[old].centroid, self.locations[old].relevance)
            for old, new in mapping.items()
        ]
        cells = self.cells[kept] if self.cells.size else None
        return WeightedTessellation(locations, self.tile_side_m, self.bbox, self.grid, cells, mapping)

    def locate(self, lat: np.ndarray, lng: np.ndarray) -> np.ndarray:
        """Location id of each point, -1 when it falls in no tile."""
        lat = np.atleast_1d(np.asarray(lat, dtype=float))
        lng = np.atleast_1d(np.asarray(lng, dtype=float))
        if self.grid is not None and self.cells.size:
            if self._id_of_cell is None:
                self._id_of_cell = {int(cell): i for i, cell in enumerate(self.cells)}
            lookup = self._id_of_cell
            cells = self.grid.cell_of(lat, lng)
            return np.array([lookup.get(int(c), -1) for c in cells], dtype=np.int64)
        return self._nearest(lat, lng)

    def _nearest(self, lat: np.ndarray, lng: np.ndarray) -> np.ndarray:
        # without grid geometry every point snaps to its closest centroid
        scale = math.cos(math.radians(float(np.mean(self.lats)))) if len(self) else 1.0
        if self._tree is None:
            self._tree = cKDTree(np.column_stack([self.lats, self.lngs * scale]))
        if lat.size == 0:
            return np.empty(0, dtype=np.int64)
        _, index = self._tree.query(np.column_stack([lat, lng * scale]))
        return np.asarray(index, dtype=np.int64)


def _validate_bbox(bbox: BBox) -> None:
    min_lat, min_lng, max_lat, max_lng = bbox
    if not all(math.isfinite(v) for v in bbox):
        raise DegenerateBBox(f"Non-finite bounding box {bbox}")
    if not (-90.0 <= min_lat < max_lat <= 90.0) or not (-180.0 <= min_lng < max_lng <= 180.0):
        raise DegenerateBBox(f"Bounding box {bbox} has no area or is out of range")


def build_squared_tessellation(bbox: BBox, tile_side_m: float) -> WeightedTessellation:
    """
    Cover ``bbox`` = (min_lat, min_lng, max_lat, max_lng) with square tiles.

    Args:
        bbox: Bounding box in degrees
        tile_side_m: Tile side in meters

    Returns:
        Tessellation with ids in row-major order and zero relevance
    """
    _validate_bbox(bbox)
    if not tile_side_m > 0:
        raise DegenerateBBox(f"Tile side must be positive, got {tile_side_m}")
    min_lat, min_lng, max_lat, max_lng = bbox
    mid_lat = math.radians((min_lat + max_lat) / 2.0)
    dlat = tile_side_m / METERS_PER_DEGREE
    dlng = tile_side_m / (METERS_PER_DEGREE * math.cos(mid_lat))
    # tolerance absorbs float noise on boxes that are exact multiples of the side
    n_rows = max(1, math.ceil((max_lat - min_lat) / dlat - 1e-9))
    n_cols = max(1, math.ceil((max_lng - min_lng) / dlng - 1e-9))
    grid = GridSpec(min_lat, min_lng, max_lat, max_lng, dlat, dlng, n_rows, n_cols)

    locations = []
    for cell in range(grid.n_cells):
        lo_lat, lo_lng, hi_lat, hi_lng = grid.cell_bounds(cell)
        centroid = GeoPoint((lo_lat + hi_lat) / 2.0, (lo_lng + hi_lng) / 2.0)
        locations.append(Location(cell, centroid, 0.0))

    logger.info(f"Built {n_rows}x{n_cols} tessellation ({len(locations)} tiles of {tile_side_m:g} m)")
    return WeightedTessellation(locations, tile_side_m, bbox, grid, range(grid.n_cells))


def filter_relevant(tess: WeightedTessellation, threshold: float = 1.0) -> WeightedTessellation:
    """Keep the locations with relevance >= ``threshold``, re-indexed."""
    keep = np.flatnonzero(tess.relevances >= threshold)
    if keep.size == 0:
        raise EmptyResult(f"No location has relevance >= {threshold}")
    logger.info(f"Relevance filter kept {keep.size} of {len(tess)} locations")
    return tess.subset(int(i) for i in keep)


def exclude_locations(tess: WeightedTessellation, excluded: Iterable[int]) -> WeightedTessellation:
    """Drop the listed ids (e.g. water tiles), re-indexed."""
    dropped = set(excluded)
    unknown = [i for i in dropped if not 0 <= i < len(tess)]
    if unknown:
        raise IdOutOfRange(f"Exclusion list names unknown tiles {sorted(unknown)[:5]}")
    logger.info(f"Excluding {len(dropped)} of {len(tess)} locations")
    return tess.subset(i for i in range(len(tess)) if i not in dropped)
