"""
Event-driven simulation of agents moving on a weighted tessellation.

One run processes moves in global time order (ties by agent id) because
social actions read other agents' visit histories. GeoSim-family agents
move after power-law waiting times; STS-EPR agents move at the timestamps of
their mobility diaries. An exploration that only became reachable with a
longer waiting time is held in ``SimulationState.deferred`` and recorded when
that waiting time has passed.
"""

import heapq
import logging
import os
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import AbstractSet, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from config.model_config import ModelConfig
from src.diary.diary_generator import DiaryGenerator, generate_diary
from src.engine import actions
from src.engine.agent import AgentState
from src.engine.social_graph import SocialGraph
from src.models.data_models import (
    DATETIME,
    HOME,
    LAT,
    LNG,
    TRAJECTORY_COLUMNS,
    UID,
    Action,
    DiaryEntry,
    MobilityDiary,
    TrajectoryRecord,
)
from src.models.exceptions import (
    ConfigMismatch,
    FileUnreadable,
    FormatError,
    NoCandidate,
    NoNeighbors,
    NothingReachable,
)
from src.tessellation.distance_matrix import DistanceMatrix
from src.tessellation.tessellation import WeightedTessellation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MoveTrace:
    """How one move was resolved."""

    uid: int
    timestamp: datetime
    chosen: Action
    final: Action
    corrections: Tuple[Action, ...]
    origin: int
    destination: int


@dataclass(frozen=True)
class Movement:
    """
    A resolved move. ``wait_hours`` is set when the exploration only became
    possible after drawing a longer waiting time; the move then happens that
    many hours after the agent's previous one.
    """

    location: int
    chosen: Action
    final: Action
    corrections: Tuple[Action, ...] = ()
    wait_hours: Optional[float] = None


@dataclass
class SimulationState:
    config: ModelConfig
    tess: WeightedTessellation
    dm: DistanceMatrix
    graph: SocialGraph
    agents: List[AgentState]
    rng: np.random.Generator
    records: List[TrajectoryRecord] = field(default_factory=list)
    trace: List[MoveTrace] = field(default_factory=list)
    similarities: actions.SimilarityCache = field(default_factory=actions.SimilarityCache)
    deferred: Dict[int, Movement] = field(default_factory=dict)


@dataclass
class SimulationResult:
    """Immutable output of one run: sorted records plus the move trace."""

    records: List[TrajectoryRecord]
    trace: List[MoveTrace]
    config: ModelConfig

    def action_counts(self) -> Dict[str, int]:
        return dict(Counter(move.final.value for move in self.trace))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.as_row() for r in self.records], columns=TRAJECTORY_COLUMNS)


def _round_to_second(ts: datetime) -> datetime:
    return ts.replace(microsecond=0) + timedelta(seconds=1 if ts.microsecond >= 500_000 else 0)


def _after(ts: datetime, hours: float) -> datetime:
    return ts + timedelta(seconds=round(hours * 3600.0))


def assign_starting_locations(
    tess: WeightedTessellation, n_agents: int, rng: np.random.Generator, rsl: bool = True
) -> np.ndarray:
    """Starting tile per agent: proportional to relevance with ``rsl``, otherwise uniform."""
    if rsl:
        weights = tess.relevances
        return rng.choice(len(tess), size=n_agents, p=weights / weights.sum())
    return rng.integers(0, len(tess), size=n_agents)


def init_simulation(
    config: ModelConfig,
    tess: WeightedTessellation,
    graph: SocialGraph,
    diary_gen: Optional[DiaryGenerator] = None,
) -> SimulationState:
    """
    Place agents, give them diaries or first waiting times and record their start.

    Raises:
        ConfigMismatch: if the graph size differs from ``n_agents`` or a
            diary-driven model has no generator
    """
    config.validate()
    if len(graph) != config.n_agents:
        raise ConfigMismatch(f"Social graph has {len(graph)} nodes but n_agents is {config.n_agents}")
    if config.variant.uses_diary and diary_gen is None:
        raise ConfigMismatch(f"Model {config.variant.value} needs a diary generator")
    if config.rsl and not tess.relevances.sum() > 0:
        raise ConfigMismatch("Relevance-based starting locations need positive relevance")

    main_seed, diary_seed = np.random.SeedSequence(config.seed).spawn(2)
    rng = np.random.default_rng(main_seed)
    diary_streams = diary_seed.spawn(config.n_agents)
    start = _round_to_second(config.start)
    starts = assign_starting_locations(tess, config.n_agents, rng, config.rsl)

    agents = []
    records = []
    for uid, location in enumerate(int(s) for s in starts):
        agent = AgentState(id=uid, home=location, current=location, next_event=start, last_move=start)
        agent.visit(location)
        if config.variant.uses_diary:
            if start < config.end:
                agent.diary = generate_diary(diary_gen, start, config.end, np.random.default_rng(diary_streams[uid]))
            else:
                agent.diary = MobilityDiary([DiaryEntry(HOME, start)])
            if agent.has_diary_entries():
                agent.next_event = agent.diary[agent.cursor].timestamp
            else:
                agent.next_event = config.end
        else:
            agent.last_wait_hours = actions.sample_waiting_time(rng, config)
            agent.next_event = _after(start, agent.last_wait_hours)
        agents.append(agent)
        records.append(TrajectoryRecord(uid, tess.centroid(location), start))

    logger.info(
        f"Initialised {config.n_agents} {config.variant.value} agents on {len(tess)} locations (seed {config.seed})"
    )
    return SimulationState(config, tess, DistanceMatrix(tess), graph, agents, rng, records)


def _excluded(agent: AgentState, state: SimulationState) -> AbstractSet[int]:
    if state.config.variant.uses_diary:
        return agent.run_used | {agent.home}
    return frozenset()


def _reach(state: SimulationState, dt_hours: float) -> Optional[Tuple[float, float]]:
    speed = state.config.reachable_speed_kmh
    return None if speed is None else (dt_hours, speed)


def _attempt(
    action: Action, agent: AgentState, state: SimulationState, excluded: AbstractSet[int], dt_hours: float
) -> int:
    config = state.config
    if action is Action.HOME_RETURN:
        return agent.home
    if action is Action.EXPLORE_INDIVIDUAL:
        return actions.explore_individual(
            agent, state.tess, state.dm, state.rng, config.variant, excluded, _reach(state, dt_hours)
        )
    if action is Action.RETURN_INDIVIDUAL:
        return actions.return_individual(agent, state.rng, excluded)

    mode = actions.DEGREE if action is Action.EXPLORE_SOCIAL and config.degree_social_exploration else actions.MOBSIM
    contact_id = actions.select_contact(agent, state.graph, mode, state.rng, state.agents, state.similarities)
    contact = state.agents[contact_id]
    if action is Action.RETURN_SOCIAL:
        return actions.return_social(agent, contact, state.rng, excluded)
    location = actions.explore_social(agent, contact, state.rng, excluded)
    reach = _reach(state, dt_hours)
    if reach is not None and state.dm.lookup(agent.current, location) > reach[0] * reach[1]:
        raise NothingReachable(f"Agent {agent.id}: socially suggested location {location} is out of reach")
    return location


def _next_action(action: Action, diary_driven: bool, tried: List[Action]) -> Action:
    if not diary_driven:
        return Action.HOME_RETURN if Action.RETURN_INDIVIDUAL in tried else Action.RETURN_INDIVIDUAL
    if action.is_social:
        return action.individual
    complementary = action.complementary
    return Action.HOME_RETURN if complementary in tried else complementary


def _stretch_exploration(
    agent: AgentState, state: SimulationState, excluded: AbstractSet[int], dt_hours: float, limit_hours: float
) -> Optional[Tuple[int, float]]:
    """
    Retry exploring with longer waiting times.

    Returns the location and the waiting time that made it reachable, or None
    after ``n_max`` failures or once a draw reaches ``limit_hours``.
    """
    for _ in range(state.config.n_max):
        dt_hours = actions.sample_waiting_time(state.rng, state.config, longer_than=dt_hours)
        if dt_hours >= limit_hours:
            return None
        try:
            return _attempt(Action.EXPLORE_INDIVIDUAL, agent, state, excluded, dt_hours), dt_hours
        except NothingReachable:
            continue
        except NoCandidate:
            return None
    return None


def resolve_movement(
    agent: AgentState,
    state: SimulationState,
    dt_hours: float = float("inf"),
    forced: Optional[Action] = None,
    limit_hours: float = float("inf"),
) -> Movement:
    """
    Choose the next location of ``agent``, correcting actions that fail.

    Args:
        agent: Agent about to move
        state: Simulation state
        dt_hours: Time available for the move, used by the reachability filter
        forced: Action to use instead of drawing one
        limit_hours: Longest waiting time a stretched exploration may use

    Returns:
        The chosen location with the selected and the executed action
    """
    diary_driven = state.config.variant.uses_diary
    chosen = forced if forced is not None else actions.select_action(agent, state.rng, state.config)
    excluded = _excluded(agent, state)
    action = chosen
    tried: List[Action] = []
    while True:
        tried.append(action)
        try:
            location = _attempt(action, agent, state, excluded, dt_hours)
            return Movement(location, chosen, action, tuple(tried[1:]))
        except NothingReachable:
            stretched = _stretch_exploration(agent, state, excluded, dt_hours, limit_hours)
            if stretched is not None:
                tried.append(Action.EXPLORE_INDIVIDUAL)
                location, wait_hours = stretched
                return Movement(location, chosen, Action.EXPLORE_INDIVIDUAL, tuple(tried[1:]), wait_hours)
            action = Action.RETURN_INDIVIDUAL if Action.RETURN_INDIVIDUAL not in tried else Action.HOME_RETURN
        except (NoCandidate, NoNeighbors):
            action = _next_action(action, diary_driven, tried)


def _move(agent: AgentState, state: SimulationState, when: datetime, movement: Movement) -> None:
    origin = agent.current
    agent.visit(movement.location)
    agent.last_move = when
    state.records.append(TrajectoryRecord(agent.id, state.tess.centroid(movement.location), when))
    state.trace.append(
        MoveTrace(agent.id, when, movement.chosen, movement.final, movement.corrections, origin, movement.location)
    )
    logger.debug(
        f"agent {agent.id} at {when}: {movement.chosen.value} -> {movement.final.value} "
        f"{origin} -> {movement.location}"
    )


def _defer(agent: AgentState, state: SimulationState, when: datetime, movement: Movement) -> bool:
    """Hold a stretched exploration until its waiting time has passed; True when held."""
    if movement.wait_hours is None or agent.last_move is None:
        return False
    later = _after(agent.last_move, movement.wait_hours)
    if later <= when:
        return False
    state.deferred[agent.id] = movement
    agent.next_event = later
    return True


def _next_diary_event(agent: AgentState, state: SimulationState) -> datetime:
    return agent.diary[agent.cursor].timestamp if agent.has_diary_entries() else state.config.end  # type: ignore[index]


def _diary_step(agent: AgentState, state: SimulationState, when: datetime) -> None:
    movement = state.deferred.pop(agent.id, None)
    if movement is None:
        entry = agent.diary[agent.cursor]  # type: ignore[index]
        agent.cursor += 1
        if entry.abstract_id == HOME:
            agent.run_used.clear()
            movement = Movement(agent.home, Action.HOME_RETURN, Action.HOME_RETURN)
        else:
            last = agent.last_move or when
            dt_hours = (when - last).total_seconds() / 3600.0
            # a stretched exploration must land before the next diary entry
            limit_hours = ((_next_diary_event(agent, state) - last).total_seconds() - 1.0) / 3600.0
            movement = resolve_movement(agent, state, dt_hours, limit_hours=limit_hours)
            if movement.final is Action.HOME_RETURN:
                agent.run_used.clear()
            else:
                agent.run_used.add(movement.location)
            if _defer(agent, state, when, movement):
                return
    _move(agent, state, when, movement)
    agent.next_event = _next_diary_event(agent, state)


def _waiting_step(agent: AgentState, state: SimulationState, when: datetime) -> None:
    movement = state.deferred.pop(agent.id, None)
    if movement is None:
        movement = resolve_movement(agent, state, agent.last_wait_hours)
        if _defer(agent, state, when, movement):
            return
    _move(agent, state, when, movement)
    agent.last_wait_hours = actions.sample_waiting_time(state.rng, state.config)
    agent.next_event = _after(when, agent.last_wait_hours)


def run_simulation(state: SimulationState) -> SimulationResult:
    """Process every move inside [start, end) and return the sorted trajectories."""
    end = state.config.end
    queue = [(agent.next_event, agent.id) for agent in state.agents if agent.next_event < end]
    heapq.heapify(queue)
    step = _diary_step if state.config.variant.uses_diary else _waiting_step
    while queue:
        when, uid = heapq.heappop(queue)
        agent = state.agents[uid]
        step(agent, state, when)
        if agent.next_event < end:
            heapq.heappush(queue, (agent.next_event, uid))

    records = sorted(state.records, key=lambda r: (r.uid, r.timestamp))
    result = SimulationResult(records, list(state.trace), state.config)
    logger.info(f"Simulated {len(state.trace)} moves; final actions {result.action_counts()}")
    return result


def write_trajectories(records: List[TrajectoryRecord], path: str) -> None:
    """Write records as uid,lat,lng,timestamp with ISO-8601 second precision, atomically."""
    frame = pd.DataFrame([r.as_row() for r in records], columns=TRAJECTORY_COLUMNS)
    frame[DATETIME] = pd.to_datetime(frame[DATETIME]).dt.strftime("%Y-%m-%dT%H:%M:%S")
    tmp = f"{path}.tmp"
    frame.to_csv(tmp, index=False, float_format="%.8f")
    os.replace(tmp, path)
    logger.info(f"Wrote {len(frame)} records to {path}")


def read_trajectories(path: str) -> pd.DataFrame:
    """Read a trajectory file into a frame sorted by uid and timestamp."""
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.EmptyDataError) as e:
        raise FileUnreadable(f"Cannot read trajectories {path}: {e}") from e
    missing = [c for c in TRAJECTORY_COLUMNS if c not in frame.columns]
    if missing:
        raise FormatError(f"Trajectory file {path} lacks columns {missing}")
    frame[DATETIME] = pd.to_datetime(frame[DATETIME])
    frame[UID] = frame[UID].astype(int)
    return frame.sort_values([UID, DATETIME], kind="mergesort").reset_index(drop=True)[[UID, LAT, LNG, DATETIME]]
