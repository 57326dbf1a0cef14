"""
Markov mobility diaries.

The chain has 48 states: hour of day (0..23) times whether the individual is
at their typical location for that hour or somewhere else. State index is
``hour + 24 * kind`` with kind 0 for typical and 1 for other.

Training turns each user's trajectory into an hourly series of occupied
tiles, labels every slot typical or other, and counts slot-to-slot
transitions. Generation walks the chain hour by hour, so each step only
chooses between the two states of the next hour.
"""

import logging
import math
from collections import defaultdict
from datetime import datetime, timedelta
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.models.data_models import (
    DATETIME,
    HOME,
    LAT,
    LNG,
    UID,
    DiaryEntry,
    MobilityDiary,
    TrajectoryRecord,
)
from src.models.exceptions import ConfigError, FileUnreadable, FormatError, InsufficientData
from src.tessellation.tessellation import WeightedTessellation

logger = logging.getLogger(__name__)

HOURS = 24
N_STATES = 2 * HOURS
TYPICAL = 0
OTHER = 1

Trajectories = Union[pd.DataFrame, Mapping[int, Sequence[TrajectoryRecord]]]


def state_index(hour: int, kind: int) -> int:
    return hour % HOURS + HOURS * kind


class DiaryGenerator:
    """Trained 48-state chain plus the counts it was estimated from."""

    def __init__(
        self,
        transition_probs: np.ndarray,
        transition_counts: Optional[np.ndarray] = None,
        slot_hours: float = 1.0,
    ):
        probs = np.asarray(transition_probs, dtype=float)
        if probs.shape != (N_STATES, N_STATES):
            raise FormatError(f"Transition matrix must be {N_STATES}x{N_STATES}, got {probs.shape}")
        if np.any(probs < 0) or not np.allclose(probs.sum(axis=1), 1.0, atol=1e-9):
            raise FormatError("Transition matrix rows must be non-negative and sum to one")
        if not slot_hours > 0:
            raise ConfigError(f"slot_hours must be positive, got {slot_hours}")
        self.transition_probs = probs / probs.sum(axis=1, keepdims=True)
        if transition_counts is None:
            transition_counts = np.zeros((N_STATES, N_STATES), dtype=np.int64)
        self.transition_counts = np.asarray(transition_counts, dtype=np.int64)
        self.slot_hours = float(slot_hours)

    @classmethod
    def from_counts(cls, counts: np.ndarray, slot_hours: float = 1.0) -> "DiaryGenerator":
        """Add-one smoothed estimate: (count + 1) / (row total + 48)."""
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (N_STATES, N_STATES) or np.any(counts < 0):
            raise FormatError(f"Transition counts must be a non-negative {N_STATES}x{N_STATES} matrix")
        probs = (counts + 1.0) / (counts.sum(axis=1, keepdims=True) + N_STATES)
        return cls(probs, counts, slot_hours)

    def next_state_probabilities(self, state: int, next_hour: Optional[int] = None) -> np.ndarray:
        """Probabilities of (typical, other) at ``next_hour`` (default: the following hour) from ``state``."""
        if next_hour is None:
            next_hour = state % HOURS + 1
        row = self.transition_probs[state]
        pair = np.array([row[state_index(next_hour, TYPICAL)], row[state_index(next_hour, OTHER)]])
        total = pair.sum()
        return pair / total if total > 0 else np.array([0.5, 0.5])

    def conditioned_matrix(self) -> np.ndarray:
        """The chain actually walked by ``generate_diary``."""
        matrix = np.zeros((N_STATES, N_STATES))
        for state in range(N_STATES):
            hour = state % HOURS
            p_typ, p_other = self.next_state_probabilities(state)
            matrix[state, state_index(hour + 1, TYPICAL)] = p_typ
            matrix[state, state_index(hour + 1, OTHER)] = p_other
        return matrix

    def stationary_other_mass(self) -> float:
        """Long-run fraction of slots spent away from the typical location."""
        matrix = self.conditioned_matrix()
        system = np.vstack([matrix.T - np.eye(N_STATES), np.ones(N_STATES)])
        rhs = np.zeros(N_STATES + 1)
        rhs[-1] = 1.0
        stationary, *_ = np.linalg.lstsq(system, rhs, rcond=None)
        return float(stationary[HOURS:].sum())


def count_transitions(sequences: Iterable[Sequence[int]]) -> np.ndarray:
    """48x48 matrix of consecutive state pairs summed over all sequences."""
    counts = np.zeros((N_STATES, N_STATES), dtype=np.int64)
    for sequence in sequences:
        states = np.asarray(sequence, dtype=np.int64)
        if states.size >= 2:
            np.add.at(counts, (states[:-1], states[1:]), 1)
    return counts


def _slot_start(ts: pd.Timestamp, slot_hours: float) -> int:
    return math.floor(ts.timestamp() / 3600.0 / slot_hours)


def hourly_tiles(times: Sequence[pd.Timestamp], tiles: Sequence[int], slot_hours: float = 1.0) -> Dict[int, int]:
    """
    Tile occupied in each slot, from the first record's slot to the last's.

    Each record holds its tile until the next record; the last record holds
    it until the end of its slot. The tile with the most dwell time wins a
    slot, ties going to the smallest tile id.
    """
    slot_seconds = slot_hours * 3600.0
    dwell: Dict[int, Dict[int, float]] = defaultdict(lambda: defaultdict(float))
    seconds = [t.timestamp() for t in times]
    for i, (begin, tile) in enumerate(zip(seconds, tiles)):
        if i + 1 < len(seconds):
            finish = seconds[i + 1]
        else:
            finish = (math.floor(begin / slot_seconds) + 1) * slot_seconds
        slot = math.floor(begin / slot_seconds)
        if finish <= begin:
            # simultaneous records still mark the slot
            dwell[slot][tile] += 0.0
            continue
        while slot * slot_seconds < finish:
            lo = max(begin, slot * slot_seconds)
            hi = min(finish, (slot + 1) * slot_seconds)
            dwell[slot][tile] += hi - lo
            slot += 1
    return {slot: min(occupancy, key=lambda t: (-occupancy[t], t)) for slot, occupancy in dwell.items()}


def user_states(slot_tiles: Mapping[int, int], slot_hours: float = 1.0) -> List[int]:
    """Label each slot typical or other and return the state sequence."""
    if not slot_tiles:
        return []
    slots = sorted(slot_tiles)

    def hour_of(slot: int) -> int:
        return int(slot * slot_hours) % HOURS

    by_hour: Dict[int, Dict[int, int]] = defaultdict(lambda: defaultdict(int))
    for slot in slots:
        by_hour[hour_of(slot)][slot_tiles[slot]] += 1
    typical = {
        hour: min(tiles, key=lambda t: (-tiles[t], t)) for hour, tiles in by_hour.items()
    }
    states = []
    for slot in slots:
        hour = hour_of(slot)
        kind = TYPICAL if slot_tiles[slot] == typical[hour] else OTHER
        states.append(state_index(hour, kind))
    return states


def _per_user_frames(trajectories: Trajectories) -> Iterable[pd.DataFrame]:
    if isinstance(trajectories, pd.DataFrame):
        frame = trajectories
    else:
        rows = [record.as_row() for records in trajectories.values() for record in records]
        frame = pd.DataFrame(rows, columns=[UID, LAT, LNG, DATETIME])
    if frame.empty:
        return []
    frame = frame.assign(**{DATETIME: pd.to_datetime(frame[DATETIME])})
    return (group for _, group in frame.sort_values([UID, DATETIME]).groupby(UID, sort=True))


def train_diary_generator(
    trajectories: Trajectories, tess: WeightedTessellation, slot_hours: float = 1.0
) -> DiaryGenerator:
    """
    Estimate the diary chain from real trajectories.

    Args:
        trajectories: Frame with uid, lat, lng and timestamp columns, or
            TrajectoryRecord sequences keyed by user
        tess: Tessellation used to turn points into tiles
        slot_hours: Slot duration

    Returns:
        Trained generator

    Raises:
        InsufficientData: if no user yields two consecutive slots
    """
    counts = np.zeros((N_STATES, N_STATES), dtype=np.int64)
    users = 0
    for group in _per_user_frames(trajectories):
        tiles = tess.locate(group[LAT].to_numpy(), group[LNG].to_numpy())
        keep = tiles >= 0
        if keep.sum() < 2:
            continue
        times = list(group[DATETIME][keep])
        states = user_states(hourly_tiles(times, tiles[keep].tolist(), slot_hours), slot_hours)
        user_counts = count_transitions([states])
        if user_counts.sum():
            counts += user_counts
            users += 1
    if counts.sum() == 0:
        raise InsufficientData("No user has two consecutive slots to train the diary generator")
    logger.info(f"Trained diary generator on {users} users and {int(counts.sum())} transitions")
    return DiaryGenerator.from_counts(counts, slot_hours)


def walk_states(gen: DiaryGenerator, hour0: float, n_slots: int, rng: np.random.Generator) -> List[int]:
    """State of each of ``n_slots`` consecutive slots, the first one typical at ``hour0``."""
    states = [state_index(int(hour0), TYPICAL)] if n_slots > 0 else []
    for k in range(1, n_slots):
        hour = int(hour0 + k * gen.slot_hours) % HOURS
        p_typical, _ = gen.next_state_probabilities(states[-1], hour)
        kind = TYPICAL if rng.random() < p_typical else OTHER
        states.append(state_index(hour, kind))
    return states


def generate_diary(
    gen: DiaryGenerator, start: datetime, end: datetime, rng: np.random.Generator
) -> MobilityDiary:
    """
    Walk the chain from (hour(start), typical) over [start, end).

    Typical slots map to home. Each maximal block of other slots is one fresh
    abstract location, stamped at the block's first slot.
    """
    if not start < end:
        raise ConfigError(f"Diary window is empty ({start} to {end})")
    step = timedelta(hours=gen.slot_hours)
    n_slots = math.ceil((end - start) / step)
    hour0 = start.hour + start.minute / 60.0 + start.second / 3600.0

    entries = [DiaryEntry(HOME, start)]
    next_abstract = HOME + 1
    states = walk_states(gen, hour0, n_slots, rng)
    for k, state in enumerate(states[1:], start=1):
        kind = state // HOURS
        previous_home = entries[-1].abstract_id == HOME
        if kind == TYPICAL and not previous_home:
            entries.append(DiaryEntry(HOME, start + k * step))
        elif kind == OTHER and previous_home:
            entries.append(DiaryEntry(next_abstract, start + k * step))
            next_abstract += 1
    return MobilityDiary(entries)


def save_diary_generator(gen: DiaryGenerator, path: str) -> None:
    """Write probabilities and counts as plain text."""
    with open(path, "w") as handle:
        handle.write(f"# slot_hours: {gen.slot_hours!r}\n")
        np.savetxt(handle, gen.transition_probs, fmt="%.17g")
        handle.write("# counts\n")
        np.savetxt(handle, gen.transition_counts, fmt="%d")
    logger.info(f"Saved diary generator to {path}")


def load_diary_generator(path: str) -> DiaryGenerator:
    """Read a generator file written by ``save_diary_generator``."""
    try:
        with open(path) as handle:
            lines = [line.strip() for line in handle if line.strip()]
    except OSError as e:
        raise FileUnreadable(f"Cannot read diary generator {path}: {e}") from e
    if not lines or not lines[0].startswith("#") or "slot_hours" not in lines[0]:
        raise FormatError(f"{path} lacks the slot_hours header")
    try:
        slot_hours = float(lines[0].split(":", 1)[1])
        body = lines[1:]
        split = body.index("# counts") if "# counts" in body else len(body)
        probs = np.array([[float(v) for v in line.split()] for line in body[:split]])
        counts = None
        if split < len(body):
            counts = np.array([[int(v) for v in line.split()] for line in body[split + 1 :]])
    except ValueError as e:
        raise FormatError(f"Malformed diary generator {path}: {e}") from e
    if counts is not None and counts.shape != (N_STATES, N_STATES):
        raise FormatError(f"{path} counts section is not {N_STATES}x{N_STATES}")
    return DiaryGenerator(probs, counts, slot_hours)
