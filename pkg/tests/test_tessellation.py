"""
Tests for squared tessellations, relevance, distances and tessellation files.
"""

import math

import numpy as np
import pytest

from src.models.data_models import GeoPoint
from src.models.exceptions import DegenerateBBox, EmptyResult, FormatError, IdOutOfRange
from src.tessellation.distance_matrix import DistanceMatrix, distance_lookup
from src.tessellation.io import read_exclusion_list, read_tessellation, write_tessellation
from src.tessellation.relevance import DEFAULT_RELEVANCE, assign_relevance, sample_synthetic_relevance
from src.tessellation.tessellation import (
    METERS_PER_DEGREE,
    build_squared_tessellation,
    exclude_locations,
    filter_relevant,
)
from tests.conftest import equator_line


def two_by_three_bbox(side_m=1000.0):
    dlat = side_m / METERS_PER_DEGREE
    mid = math.radians(dlat)
    dlng = side_m / (METERS_PER_DEGREE * math.cos(mid))
    return (0.0, 0.0, 2 * dlat, 3 * dlng), dlat, dlng


class TestBuildSquaredTessellation:
    def test_exact_two_by_three(self):
        bbox, _, _ = two_by_three_bbox()
        tess = build_squared_tessellation(bbox, 1000.0)
        assert len(tess) == 6
        assert [loc.id for loc in tess.locations] == list(range(6))
        assert np.all(tess.relevances == 0.0)

    def test_centroids_inside_bbox(self):
        bbox = (40.5, -74.3, 40.93, -73.7)
        tess = build_squared_tessellation(bbox, 2000.0)
        assert np.all((tess.lats >= bbox[0]) & (tess.lats <= bbox[2]))
        assert np.all((tess.lngs >= bbox[1]) & (tess.lngs <= bbox[3]))

    def test_centroid_is_tile_center(self):
        bbox, dlat, dlng = two_by_three_bbox()
        tess = build_squared_tessellation(bbox, 1000.0)
        assert tess.centroid(0).lat == pytest.approx(dlat / 2)
        assert tess.centroid(0).lng == pytest.approx(dlng / 2)

    @pytest.mark.parametrize("bbox", [(1.0, 1.0, 1.0, 2.0), (1.0, 1.0, 2.0, 1.0), (2.0, 1.0, 1.0, 2.0)])
    def test_degenerate_bbox(self, bbox):
        with pytest.raises(DegenerateBBox):
            build_squared_tessellation(bbox, 1000.0)

    def test_non_positive_side(self):
        with pytest.raises(DegenerateBBox):
            build_squared_tessellation((0.0, 0.0, 1.0, 1.0), 0.0)

    def test_shared_edge_belongs_to_upper_tile(self):
        bbox, dlat, dlng = two_by_three_bbox()
        tess = build_squared_tessellation(bbox, 1000.0)
        # point on the vertical edge between column 0 and 1 of row 0
        assert tess.locate([dlat / 2], [dlng])[0] == 1
        # the closing edges belong to the last row and column
        assert tess.locate([bbox[2]], [bbox[3]])[0] == 5

    def test_tile_corners_on_offset_bbox(self):
        tess = build_squared_tessellation((40.5, -74.3, 40.9, -73.7), 250.0)
        grid = tess.grid
        cells = np.arange(grid.n_cells)
        corners = np.array([grid.cell_bounds(int(cell))[:2] for cell in cells])
        np.testing.assert_array_equal(grid.cell_of(corners[:, 0], corners[:, 1]), cells)
        # the top edge of each row is the bottom edge of the next one
        tops = np.array([grid.cell_bounds(int(row * grid.n_cols))[2] for row in range(grid.n_rows - 1)])
        rows = grid.cell_of(tops, np.full_like(tops, -74.3)) // grid.n_cols
        np.testing.assert_array_equal(rows, np.arange(1, grid.n_rows))

    def test_outside_points(self):
        bbox, _, _ = two_by_three_bbox()
        tess = build_squared_tessellation(bbox, 1000.0)
        assert tess.locate([-0.001], [0.001])[0] == -1


class TestAssignRelevance:
    def test_counts_with_floor(self):
        bbox, dlat, dlng = two_by_three_bbox()
        tess = build_squared_tessellation(bbox, 1000.0)
        points = [GeoPoint(dlat / 2, dlng / 2)] * 3
        weighted, dropped = assign_relevance(tess, points)
        assert dropped == 0
        assert weighted.relevances[0] == 3.0
        assert np.all(weighted.relevances[1:] == DEFAULT_RELEVANCE)

    def test_empty_points(self):
        bbox, _, _ = two_by_three_bbox()
        weighted, dropped = assign_relevance(build_squared_tessellation(bbox, 1000.0), [])
        assert dropped == 0
        assert np.all(weighted.relevances == DEFAULT_RELEVANCE)

    def test_outside_points_are_dropped(self):
        bbox, dlat, dlng = two_by_three_bbox()
        tess = build_squared_tessellation(bbox, 1000.0)
        weighted, dropped = assign_relevance(tess, [GeoPoint(10.0, 10.0), GeoPoint(dlat / 2, dlng / 2)])
        assert dropped == 1
        assert weighted.relevances.max() == 1.0


class TestFilterRelevant:
    def test_keeps_relevant_and_maps_ids(self):
        tess = equator_line([0.0, 1.0, 2.0], [3.0, 0.1, 1.0])
        kept = filter_relevant(tess)
        assert len(kept) == 2
        assert kept.id_map == {0: 0, 2: 1}
        assert list(kept.relevances) == [3.0, 1.0]

    def test_nothing_relevant(self):
        with pytest.raises(EmptyResult):
            filter_relevant(equator_line([0.0, 1.0], [0.1, 0.1]))

    def test_exclusion_reindexes(self):
        kept = exclude_locations(equator_line([0.0, 1.0, 2.0]), [1])
        assert len(kept) == 2
        assert kept.id_map == {0: 0, 2: 1}

    def test_exclusion_of_unknown_tile(self):
        with pytest.raises(IdOutOfRange):
            exclude_locations(equator_line([0.0, 1.0]), [7])


class TestSyntheticRelevance:
    def test_zero_draws(self, rng):
        assert sample_synthetic_relevance(0, rng=rng).size == 0

    def test_support(self, rng):
        assert sample_synthetic_relevance(1000, rng=rng).min() >= 1.0


class TestDistanceMatrix:
    def test_diagonal_is_zero(self, line_tessellation):
        dm = DistanceMatrix(line_tessellation)
        assert distance_lookup(dm, 1, 1) == 0.0

    def test_adjacent_tiles_on_equator(self):
        bbox = (0.0, 0.0, 0.005, 0.03)
        tess = build_squared_tessellation(bbox, 1000.0)
        dm = DistanceMatrix(tess)
        assert distance_lookup(dm, 0, 1) == pytest.approx(1.0, rel=0.01)

    def test_symmetric_and_cached(self, five_tiles):
        dm = DistanceMatrix(five_tiles)
        first = distance_lookup(dm, 0, 3)
        assert dm.cached_rows == 1
        assert distance_lookup(dm, 3, 0) == first
        assert distance_lookup(dm, 0, 3) == first
        assert dm.cached_rows == 1

    def test_matches_haversine(self, line_tessellation):
        dm = DistanceMatrix(line_tessellation)
        assert distance_lookup(dm, 0, 2) == pytest.approx(2.0, rel=1e-9)

    def test_invalid_id(self, line_tessellation):
        with pytest.raises(IdOutOfRange):
            distance_lookup(DistanceMatrix(line_tessellation), 0, 3)


class TestTessellationFiles:
    def test_round_trip_keeps_grid(self, tmp_path):
        bbox, dlat, dlng = two_by_three_bbox()
        tess, _ = assign_relevance(build_squared_tessellation(bbox, 1000.0), [GeoPoint(dlat / 2, dlng * 1.5)])
        tess = filter_relevant(tess)
        path = tmp_path / "tess.csv"
        write_tessellation(tess, str(path))
        loaded = read_tessellation(str(path))
        assert len(loaded) == 1
        assert loaded.relevances[0] == 1.0
        assert loaded.locate([dlat / 2], [dlng * 1.5])[0] == 0
        assert loaded.locate([dlat / 2], [dlng / 2])[0] == -1

    def test_file_without_header_snaps_to_nearest(self, tmp_path):
        path = tmp_path / "plain.csv"
        path.write_text("id,lat,lng,relevance\n0,0.0,0.0,2\n1,0.0,1.0,0\n")
        loaded = read_tessellation(str(path), min_relevance=0.1)
        assert list(loaded.relevances) == [2.0, 0.1]
        assert list(loaded.locate([0.0, 0.1], [0.9, 0.2])) == [1, 0]

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,lat\n0,1.0\n")
        with pytest.raises(FormatError):
            read_tessellation(str(path))

    def test_exclusion_list(self, tmp_path):
        path = tmp_path / "water.txt"
        path.write_text("3\n\n5\n")
        assert read_exclusion_list(str(path)) == [3, 5]
