"""
Action selection and the location-selection mechanisms.

Each mechanism raises ``NoCandidate`` when it has nothing to choose from;
the simulator turns that into an action correction.
"""

from typing import AbstractSet, Dict, Optional, Sequence, Tuple

import numpy as np

from config.model_config import ModelConfig
from src.core.geometry import mobility_similarity
from src.core.sampling import sample_truncated_power_law, weighted_index
from src.engine.agent import AgentState
from src.engine.social_graph import SocialGraph
from src.models.data_models import Action, ModelVariant
from src.models.exceptions import NoCandidate, NoNeighbors, NothingReachable
from src.tessellation.distance_matrix import DistanceMatrix
from src.tessellation.tessellation import WeightedTessellation

# centroids closer than this are treated as this far apart
MIN_DISTANCE_KM = 1e-3

MOBSIM = "mobsim"
DEGREE = "degree"


def exploration_probability(S: int, config: ModelConfig) -> float:
    """rho * S^(-gamma)."""
    return config.rho * S ** (-config.gamma)


def select_action(agent: AgentState, rng: np.random.Generator, config: ModelConfig) -> Action:
    """Explore or return first, then social or individual."""
    explore = rng.random() < exploration_probability(agent.S, config)
    social = rng.random() < config.alpha
    if explore:
        return Action.EXPLORE_SOCIAL if social else Action.EXPLORE_INDIVIDUAL
    return Action.RETURN_SOCIAL if social else Action.RETURN_INDIVIDUAL


def sample_waiting_time(
    rng: np.random.Generator, config: ModelConfig, longer_than: Optional[float] = None
) -> float:
    """
    Waiting time in hours.

    With ``longer_than`` the draw comes from the same law conditioned on
    exceeding that value.
    """
    x_min = config.min_wt_hours if longer_than is None else max(longer_than, config.min_wt_hours)
    return float(sample_truncated_power_law(rng, 1, config.wt_beta, config.wt_tau_hours, x_min)[0])


def reachable_set(
    agent: AgentState,
    dt_hours: float,
    speed_kmh: float,
    candidates: Sequence[int],
    dm: DistanceMatrix,
) -> np.ndarray:
    """Candidates within ``dt_hours * speed_kmh`` km of the agent's location."""
    candidates = np.asarray(candidates, dtype=np.int64)
    if candidates.size == 0:
        return candidates
    row = dm.row(agent.current)
    return candidates[row[candidates] <= dt_hours * speed_kmh]


def exploration_weights(
    variant: ModelVariant, tess: WeightedTessellation, dm: DistanceMatrix, current: int, candidates: np.ndarray
) -> np.ndarray:
    """Selection weights of ``candidates`` for an exploration from ``current``."""
    if variant is ModelVariant.GEOSIM:
        return np.ones(candidates.size)
    distances = np.maximum(dm.row(current)[candidates], MIN_DISTANCE_KM)
    if variant is ModelVariant.GEOSIM_D:
        return 1.0 / distances
    return tess.relevances[candidates] / distances**2


def explore_individual(
    agent: AgentState,
    tess: WeightedTessellation,
    dm: DistanceMatrix,
    rng: np.random.Generator,
    variant: ModelVariant,
    excluded: AbstractSet[int] = frozenset(),
    reach: Optional[Tuple[float, float]] = None,
) -> int:
    """
    New location, weighted by the variant's exploration law.

    Args:
        reach: Optional (dt_hours, speed_kmh) restricting candidates to the
            reachable set
    """
    mask = np.ones(len(tess), dtype=bool)
    mask[[loc for loc, _ in agent.lv.items()]] = False
    if excluded:
        mask[[loc for loc in excluded if 0 <= loc < len(tess)]] = False
    candidates = np.flatnonzero(mask)
    if candidates.size == 0:
        raise NoCandidate(f"Agent {agent.id} has no location left to explore")
    if reach is not None:
        candidates = reachable_set(agent, reach[0], reach[1], candidates, dm)
        if candidates.size == 0:
            raise NothingReachable(f"Agent {agent.id} can reach no new location in {reach[0]:.2f} h")
    weights = exploration_weights(variant, tess, dm, agent.current, candidates)
    return int(candidates[weighted_index(rng, weights)])


def _sample_visits(
    rng: np.random.Generator, locations: Sequence[int], counts: Sequence[int], what: str
) -> int:
    if not locations:
        raise NoCandidate(f"No candidate for {what}")
    return int(locations[weighted_index(rng, counts)])


def return_individual(
    agent: AgentState, rng: np.random.Generator, excluded: AbstractSet[int] = frozenset()
) -> int:
    """Visited location, proportional to the agent's own visit counts."""
    pairs = [(loc, n) for loc, n in agent.lv.items() if loc not in excluded]
    return _sample_visits(rng, [p[0] for p in pairs], [p[1] for p in pairs], "individual return")


def explore_social(
    agent: AgentState, contact: AgentState, rng: np.random.Generator, excluded: AbstractSet[int] = frozenset()
) -> int:
    """Location the contact visited and the agent did not, proportional to the contact's visits."""
    pairs = [(loc, n) for loc, n in contact.lv.items() if loc not in agent.lv and loc not in excluded]
    return _sample_visits(rng, [p[0] for p in pairs], [p[1] for p in pairs], "social exploration")


def return_social(
    agent: AgentState, contact: AgentState, rng: np.random.Generator, excluded: AbstractSet[int] = frozenset()
) -> int:
    """Location both visited, proportional to the contact's visits."""
    pairs = [(loc, n) for loc, n in contact.lv.items() if loc in agent.lv and loc not in excluded]
    return _sample_visits(rng, [p[0] for p in pairs], [p[1] for p in pairs], "social return")


class SimilarityCache:
    """Mobility similarities per agent pair, invalidated by agent versions."""

    def __init__(self) -> None:
        self._values: Dict[Tuple[int, int], Tuple[int, int, float]] = {}

    def __len__(self) -> int:
        return len(self._values)

    def get(self, a: AgentState, b: AgentState) -> float:
        first, second = (a, b) if a.id <= b.id else (b, a)
        key = (first.id, second.id)
        cached = self._values.get(key)
        if cached is not None and cached[0] == first.version and cached[1] == second.version:
            return cached[2]
        value = mobility_similarity(first.lv, second.lv)
        self._values[key] = (first.version, second.version, value)
        return value


def select_contact(
    agent: AgentState,
    graph: SocialGraph,
    mode: str,
    rng: np.random.Generator,
    agents: Sequence[AgentState],
    cache: Optional[SimilarityCache] = None,
) -> int:
    """
    Neighbor to imitate.

    ``mobsim`` weights neighbors by mobility similarity (uniform when every
    similarity is zero); ``degree`` weights them by their degree.
    """
    neighbors = graph.neighbors(agent.id)
    if not neighbors:
        raise NoNeighbors(f"Agent {agent.id} has no contacts")
    if mode == DEGREE:
        weights = np.array([graph.degree(c) for c in neighbors], dtype=float)
    elif mode == MOBSIM:
        cache = cache if cache is not None else SimilarityCache()
        weights = np.array([cache.get(agent, agents[c]) for c in neighbors], dtype=float)
        if not weights.sum() > 0:
            weights = np.ones(len(neighbors))
    else:
        raise ValueError(f"Unknown contact selection mode '{mode}'")
    return neighbors[weighted_index(rng, weights)]
