"""
Property-based tests for tessellations and diaries.
"""

from datetime import timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.diary.diary_generator import N_STATES, DiaryGenerator, generate_diary
from src.tessellation.tessellation import build_squared_tessellation, filter_relevant
from tests.conftest import START

boxes = st.tuples(
    st.floats(min_value=-60, max_value=60),
    st.floats(min_value=-170, max_value=170),
    st.floats(min_value=0.01, max_value=0.3),
    st.floats(min_value=0.01, max_value=0.3),
).map(lambda t: (t[0], t[1], t[0] + t[2], t[1] + t[3]))


@pytest.mark.property
@settings(max_examples=40, deadline=None)
@given(bbox=boxes, side=st.floats(min_value=500, max_value=5000), seed=st.integers(0, 2**31))
def test_points_fall_in_exactly_one_tile(bbox, side, seed):
    tess = build_squared_tessellation(bbox, side)
    rng = np.random.default_rng(seed)
    lats = rng.uniform(bbox[0], bbox[2], 200)
    lngs = rng.uniform(bbox[1], bbox[3], 200)
    ids = tess.locate(lats, lngs)
    assert np.all(ids >= 0)
    for lat, lng, tile in zip(lats, lngs, ids):
        lo_lat, lo_lng, hi_lat, hi_lng = tess.grid.cell_bounds(int(tess.cells[tile]))
        assert lo_lat <= lat <= hi_lat
        assert lo_lng <= lng <= hi_lng


@pytest.mark.property
@settings(max_examples=40, deadline=None)
@given(weights=st.lists(st.floats(min_value=0, max_value=20), min_size=4, max_size=4))
def test_relevance_filter_is_idempotent(weights):
    tess = build_squared_tessellation((0.0, 0.0, 0.017, 0.017), 1000.0).with_relevance(weights)
    if max(weights) < 1.0:
        return
    once = filter_relevant(tess)
    twice = filter_relevant(once)
    assert len(twice) == len(once)
    np.testing.assert_array_equal(twice.relevances, once.relevances)
    assert np.all(once.relevances >= 1.0)


@pytest.mark.property
@settings(max_examples=200, deadline=None)
@given(chain_seed=st.integers(0, 50), seed=st.integers(0, 2**32 - 1), days=st.integers(1, 7))
def test_generated_diaries_are_valid(chain_seed, seed, days):
    counts = np.random.default_rng(chain_seed).integers(0, 20, size=(N_STATES, N_STATES))
    gen = DiaryGenerator.from_counts(counts)
    diary = generate_diary(gen, START, START + timedelta(days=days), np.random.default_rng(seed))
    assert diary.validate()
    gaps = [b.timestamp - a.timestamp for a, b in zip(diary.entries, diary.entries[1:])]
    assert all(gap >= timedelta(hours=gen.slot_hours) for gap in gaps)
