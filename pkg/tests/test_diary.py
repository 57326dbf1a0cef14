"""
Tests for diary training, generation and generator files.
"""

from datetime import datetime, timedelta

import numpy as np
import pandas as pd
import pytest

from src.diary.diary_generator import (
    HOURS,
    N_STATES,
    OTHER,
    TYPICAL,
    DiaryGenerator,
    count_transitions,
    generate_diary,
    hourly_tiles,
    load_diary_generator,
    save_diary_generator,
    state_index,
    train_diary_generator,
    user_states,
    walk_states,
)
from src.models.data_models import HOME
from src.models.exceptions import ConfigError, FormatError, InsufficientData
from tests.conftest import START, equator_line, trajectory_frame, uniform_generator


def forced_generator(flip: bool) -> DiaryGenerator:
    """Deterministic chain: keep the current kind, or flip it every hour."""
    probs = np.zeros((N_STATES, N_STATES))
    for state in range(N_STATES):
        hour, kind = state % HOURS, state // HOURS
        next_kind = 1 - kind if flip else TYPICAL
        probs[state, state_index(hour + 1, next_kind)] = 1.0
    return DiaryGenerator(probs)


def random_generator(seed: int) -> DiaryGenerator:
    counts = np.random.default_rng(seed).integers(0, 30, size=(N_STATES, N_STATES))
    return DiaryGenerator.from_counts(counts)


def at(hour: int, minute: int = 0) -> pd.Timestamp:
    return pd.Timestamp(2012, 4, 10, hour, minute)


class TestDiaryGenerator:
    def test_smoothing(self):
        counts = np.zeros((N_STATES, N_STATES), dtype=int)
        counts[0, 1] = 52
        gen = DiaryGenerator.from_counts(counts)
        assert gen.transition_probs[0, 1] == pytest.approx(53 / 100)
        assert gen.transition_probs[0, 2] == pytest.approx(1 / 100)
        assert gen.transition_probs[5, 7] == pytest.approx(1 / 48)

    def test_rows_are_stochastic(self):
        gen = random_generator(3)
        assert np.allclose(gen.transition_probs.sum(axis=1), 1.0, atol=1e-12)

    def test_rejects_bad_shape(self):
        with pytest.raises(FormatError):
            DiaryGenerator(np.ones((24, 24)) / 24)

    def test_rejects_non_stochastic_rows(self):
        with pytest.raises(FormatError):
            DiaryGenerator(np.ones((N_STATES, N_STATES)))

    def test_next_state_probabilities_renormalize(self):
        gen = uniform_generator()
        assert list(gen.next_state_probabilities(state_index(3, OTHER))) == [0.5, 0.5]


class TestHourlyTiles:
    def test_dwell_majority(self):
        slots = hourly_tiles([at(10), at(10, 40), at(11, 10)], [3, 5, 3])
        hours = {slot % 24: tile for slot, tile in slots.items()}
        assert hours == {10: 3, 11: 3}

    def test_tie_goes_to_smallest_id(self):
        slots = hourly_tiles([at(10), at(10, 30)], [5, 2])
        assert list(slots.values()) == [2]

    def test_gaps_carry_previous_tile(self):
        slots = hourly_tiles([at(10), at(13, 30)], [1, 2])
        assert [slots[s] for s in sorted(slots)] == [1, 1, 1, 1]

    def test_states_use_modal_tile_per_hour(self):
        base = int(at(0).timestamp() // 3600)
        slot_tiles = {base + 9: 4, base + 33: 4, base + 57: 7}
        states = user_states(slot_tiles)
        assert states == [state_index(9, TYPICAL), state_index(9, TYPICAL), state_index(9, OTHER)]


class TestTrainDiaryGenerator:
    def test_single_location_user(self):
        tess = equator_line([0.0, 1.0])
        rows = [
            (0, tess.lats[0], tess.lngs[0], START + timedelta(hours=h)) for h in range(72)
        ]
        gen = train_diary_generator(trajectory_frame(rows), tess)
        for hour in range(HOURS):
            state = state_index(hour, TYPICAL)
            assert np.argmax(gen.transition_probs[state]) == state_index(hour + 1, TYPICAL)
        assert gen.transition_counts[HOURS:].sum() == 0

    def test_counts_match_brute_force(self):
        tess = equator_line([0.0, 1.0])
        tiles = [1 if day == 2 and 10 <= hour <= 12 else 0 for day in range(3) for hour in range(24)]
        tiles[30] = 1  # day 1, 06:00
        rows = [
            (0, tess.lats[tile], tess.lngs[tile], START + timedelta(hours=t)) for t, tile in enumerate(tiles)
        ]
        gen = train_diary_generator(trajectory_frame(rows), tess)

        # every hour's modal tile is 0
        expected = np.zeros((N_STATES, N_STATES), dtype=int)
        for t in range(len(tiles) - 1):
            src = t % 24 + 24 * tiles[t]
            dst = (t + 1) % 24 + 24 * tiles[t + 1]
            expected[src, dst] += 1
        np.testing.assert_array_equal(gen.transition_counts, expected)

    def test_users_are_counted_separately(self):
        tess = equator_line([0.0, 1.0])
        rows = [(uid, 0.0, 0.0, START + timedelta(hours=h)) for uid in (0, 1) for h in range(3)]
        gen = train_diary_generator(trajectory_frame(rows), tess)
        assert gen.transition_counts.sum() == 4

    def test_empty_input(self):
        with pytest.raises(InsufficientData):
            train_diary_generator(trajectory_frame([]), equator_line([0.0]))

    def test_single_record_users(self):
        rows = [(0, 0.0, 0.0, START), (1, 0.0, 0.0, START)]
        with pytest.raises(InsufficientData):
            train_diary_generator(trajectory_frame(rows), equator_line([0.0]))

    def test_merging_is_elementwise_addition(self):
        tess = equator_line([0.0, 1.0])
        rows_a = [(0, 0.0, tess.lngs[h % 2], START + timedelta(hours=h)) for h in range(10)]
        rows_b = [(1, 0.0, 0.0, START + timedelta(hours=h)) for h in range(5)]
        a = train_diary_generator(trajectory_frame(rows_a), tess).transition_counts
        b = train_diary_generator(trajectory_frame(rows_b), tess).transition_counts
        both = train_diary_generator(trajectory_frame(rows_a + rows_b), tess).transition_counts
        np.testing.assert_array_equal(both, a + b)


class TestGenerateDiary:
    def test_absorbing_home(self, rng):
        diary = generate_diary(forced_generator(flip=False), START, START + timedelta(days=3), rng)
        assert len(diary) == 1
        assert diary[0].abstract_id == HOME
        assert diary[0].timestamp == START

    def test_forced_alternation(self, rng):
        diary = generate_diary(forced_generator(flip=True), START, START + timedelta(hours=6), rng)
        assert [e.abstract_id for e in diary.entries] == [HOME, 1, HOME, 2, HOME, 3]
        assert [e.timestamp for e in diary.entries] == [START + timedelta(hours=h) for h in range(6)]

    def test_covers_window_only(self, rng):
        end = START + timedelta(hours=5, minutes=30)
        diary = generate_diary(forced_generator(flip=True), START, end, rng)
        assert diary.entries[-1].timestamp < end
        assert len(diary) == 6

    def test_empty_window(self, rng):
        with pytest.raises(ConfigError):
            generate_diary(uniform_generator(), START, START, rng)

    def test_fresh_ids_increase(self, rng):
        diary = generate_diary(random_generator(1), START, START + timedelta(days=7), rng)
        away = [e.abstract_id for e in diary.entries if e.abstract_id != HOME]
        assert away == list(range(1, len(away) + 1))
        assert diary.validate()

    def test_same_seed_same_diary(self):
        gen = random_generator(2)
        end = START + timedelta(days=2)
        first = generate_diary(gen, START, end, np.random.default_rng(5))
        second = generate_diary(gen, START, end, np.random.default_rng(5))
        assert first.entries == second.entries

    def test_first_state_follows_start_hour(self, rng):
        states = walk_states(forced_generator(flip=True), 22.5, 4, rng)
        assert states == [
            state_index(22, TYPICAL),
            state_index(23, OTHER),
            state_index(0, TYPICAL),
            state_index(1, OTHER),
        ]

    @pytest.mark.slow
    def test_other_fraction_matches_stationary_mass(self):
        gen = random_generator(11)
        states = np.array(walk_states(gen, 0, 50_000, np.random.default_rng(0)))
        assert np.mean(states >= HOURS) == pytest.approx(gen.stationary_other_mass(), abs=0.01)

    @pytest.mark.slow
    def test_retraining_recovers_chain(self):
        gen = random_generator(4)
        states = walk_states(gen, 0, 1_000_000, np.random.default_rng(1))
        counts = count_transitions([states])
        for state in range(N_STATES):
            following = (state % HOURS) + 1
            typical, other = state_index(following, TYPICAL), state_index(following, OTHER)
            total = counts[state, typical] + counts[state, other]
            assert total > 0
            expected = gen.next_state_probabilities(state)[0]
            assert counts[state, typical] / total == pytest.approx(expected, abs=0.02)


class TestGeneratorFiles:
    def test_save_and_load(self, tmp_path):
        gen = random_generator(6)
        path = tmp_path / "diary.txt"
        save_diary_generator(gen, str(path))
        loaded = load_diary_generator(str(path))
        np.testing.assert_allclose(loaded.transition_probs, gen.transition_probs, rtol=1e-12)
        np.testing.assert_array_equal(loaded.transition_counts, gen.transition_counts)
        assert loaded.slot_hours == 1.0

    def test_probabilities_only(self, tmp_path):
        path = tmp_path / "foreign.txt"
        with open(path, "w") as handle:
            handle.write("# slot_hours: 1.0\n")
            np.savetxt(handle, np.full((N_STATES, N_STATES), 1.0 / N_STATES))
        loaded = load_diary_generator(str(path))
        assert loaded.transition_counts.sum() == 0

    def test_missing_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("0.5 0.5\n")
        with pytest.raises(FormatError):
            load_diary_generator(str(path))
