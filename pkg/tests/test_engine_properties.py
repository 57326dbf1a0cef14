"""
Statistical and structural properties of whole simulations.

Everything here is seeded; the slow tests run the engine long enough for
the laws to show up in aggregate.
"""

from collections import Counter, defaultdict
from datetime import timedelta

import numpy as np
import pytest
from scipy import stats

from src.diary.diary_generator import HOURS, N_STATES, OTHER, TYPICAL, DiaryGenerator, generate_diary, state_index
from src.engine.simulator import init_simulation, run_simulation
from src.engine.social_graph import SocialGraph
from src.metrics.measures import jump_lengths
from src.metrics.scores import bin_samples, kl_divergence
from src.models.data_models import Action, BinningScheme, ModelVariant
from src.tessellation.relevance import with_synthetic_relevance
from src.tessellation.tessellation import build_squared_tessellation
from tests.conftest import DEG_PER_KM, START, equator_line, make_config
from tests.test_diary import random_generator

EXPLORATIONS = (Action.EXPLORE_INDIVIDUAL, Action.EXPLORE_SOCIAL)


def square_world(tiles_per_side: int, seed: int = 0):
    """Square grid of 1 km tiles at the equator with power-law relevance."""
    side = tiles_per_side * DEG_PER_KM
    tess = build_squared_tessellation((0.0, 0.0, side, side), 1000.0)
    return with_synthetic_relevance(tess, np.random.default_rng(seed))


def afternoon_generator() -> DiaryGenerator:
    """Leaves home at 13:00 and comes back at 18:00, nearly every day."""
    counts = np.zeros((N_STATES, N_STATES), dtype=np.int64)
    for hour in range(HOURS):
        away = 13 <= (hour + 1) % HOURS <= 17
        kind = OTHER if 13 <= hour <= 17 else TYPICAL
        counts[state_index(hour, kind), state_index(hour + 1, OTHER if away else TYPICAL)] = 1000
    return DiaryGenerator.from_counts(counts)


def hourly_shares(timestamps) -> np.ndarray:
    counts = np.bincount([ts.hour for ts in timestamps], minlength=HOURS).astype(float)
    return counts / counts.sum()


def jump_density_trend(frame) -> float:
    """
    Spearman correlation between log-bin index and jump-length density.

    Bins holding no jump are left out: below a few tile sides the distances
    between tile centroids are sparse and most narrow log bins stay empty.
    """
    binned = bin_samples(jump_lengths(frame), BinningScheme("log", 50))
    density = binned.density / np.diff(binned.edges)
    filled = np.flatnonzero(density > 0)
    return float(stats.spearmanr(filled, density[filled])[0])


@pytest.mark.slow
def test_exploration_rate_follows_power_law():
    tess = square_world(40)
    deciles = 20
    explored = defaultdict(list)
    expected = defaultdict(list)
    for seed in range(500):
        config = make_config(ModelVariant.GEOSIM, n_agents=1, end=START + timedelta(days=400), seed=seed)
        state = init_simulation(config, tess, SocialGraph.from_edges([], 1))
        visited = {state.agents[0].home}
        for move in run_simulation(state).trace:
            s = len(visited)
            if s > 10 * deciles:
                break
            explored[(s - 1) // 10].append(move.chosen in EXPLORATIONS)
            expected[(s - 1) // 10].append(config.rho * s**-config.gamma)
            visited.add(move.destination)

    assert sorted(explored) == list(range(deciles))
    # 99% coverage for all deciles jointly
    z = stats.norm.ppf(1.0 - 0.01 / (2 * deciles))
    for decile, outcomes in explored.items():
        n = len(outcomes)
        p = float(np.mean(expected[decile]))
        half_width = z * np.sqrt(p * (1 - p) / n)
        assert abs(np.mean(outcomes) - p) <= half_width, f"S-decile {decile}: {np.mean(outcomes):.4f} vs {p:.4f}"


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(1000))
def test_diary_runs_keep_structure(seed):
    tess = equator_line(np.arange(10.0), np.arange(1.0, 11.0))
    config = make_config(ModelVariant.STS_EPR, n_agents=3, end=START + timedelta(days=3), seed=seed)
    graph = SocialGraph.from_edges([(0, 1), (1, 2)])
    state = init_simulation(config, tess, graph, random_generator(seed))
    result = run_simulation(state)

    per_user = Counter(record.uid for record in result.records)
    for agent in state.agents:
        assert agent.lv.total == per_user[agent.id]
    in_run = defaultdict(set)
    for move in result.trace:
        if move.final is Action.HOME_RETURN or move.destination == state.agents[move.uid].home:
            in_run[move.uid] = set()
            continue
        assert move.destination not in in_run[move.uid]
        in_run[move.uid].add(move.destination)


@pytest.mark.slow
def test_only_gravity_jumps_decrease_with_distance():
    tess = square_world(20, seed=1)
    n_agents = 100
    graph = SocialGraph.random(n_agents, 0.05, seed=1)

    def trend(variant):
        config = make_config(variant, n_agents=n_agents, end=START + timedelta(days=14), seed=5)
        return jump_density_trend(run_simulation(init_simulation(config, tess, graph)).to_frame())

    assert trend(ModelVariant.GEOSIM_GRAVITY) <= -0.9
    assert trend(ModelVariant.GEOSIM) > -0.9


@pytest.mark.slow
def test_only_diary_model_has_circadian_rhythm():
    tess = square_world(10, seed=2)
    n_agents = 100
    graph = SocialGraph.random(n_agents, 0.05, seed=2)
    gen = afternoon_generator()

    def move_hours(variant):
        config = make_config(variant, n_agents=n_agents, end=START + timedelta(days=14), seed=9)
        result = run_simulation(init_simulation(config, tess, graph, gen if variant.uses_diary else None))
        return hourly_shares([move.timestamp for move in result.trace])

    rng = np.random.default_rng(11)
    diary_times = [
        entry.timestamp
        for _ in range(500)
        for entry in generate_diary(gen, START, START + timedelta(days=14), rng).entries[1:]
    ]
    reference = hourly_shares(diary_times)

    sts = move_hours(ModelVariant.STS_EPR)
    assert sts[13] + sts[18] > 0.8
    assert kl_divergence(reference, sts) < 0.05

    geosim = move_hours(ModelVariant.GEOSIM)
    assert np.all(np.abs(geosim - 1.0 / HOURS) <= 0.02)
