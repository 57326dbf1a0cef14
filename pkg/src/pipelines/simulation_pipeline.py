"""
Simulation pipeline: one or several seeded runs written to trajectory files.

Run k uses seed ``config.seed + k``. Runs share no mutable state, so they are
dispatched through joblib; each run writes its own file atomically.
"""

import logging
import os
from typing import List, Optional

from joblib import Parallel, delayed

from config.model_config import ModelConfig
from src.diary.diary_generator import DiaryGenerator
from src.engine.simulator import SimulationResult, init_simulation, run_simulation, write_trajectories
from src.engine.social_graph import SocialGraph
from src.models.exceptions import ConfigError
from src.tessellation.tessellation import WeightedTessellation

logger = logging.getLogger(__name__)


def run_path(out_path: str, run: int, runs: int) -> str:
    """``out_path`` itself for a single run, ``<stem>_run<k><ext>`` otherwise."""
    if runs == 1:
        return out_path
    stem, ext = os.path.splitext(out_path)
    return f"{stem}_run{run}{ext}"


def simulate(
    config: ModelConfig,
    tess: WeightedTessellation,
    graph: SocialGraph,
    diary_gen: Optional[DiaryGenerator] = None,
) -> SimulationResult:
    """Initialise and run one simulation."""
    state = init_simulation(config, tess, graph, diary_gen)
    return run_simulation(state)


def _simulate_to_file(
    config: ModelConfig,
    tess: WeightedTessellation,
    graph: SocialGraph,
    diary_gen: Optional[DiaryGenerator],
    path: str,
) -> str:
    result = simulate(config, tess, graph, diary_gen)
    write_trajectories(result.records, path)
    return path


def run_simulations(
    config: ModelConfig,
    tess: WeightedTessellation,
    graph: SocialGraph,
    out_path: str,
    diary_gen: Optional[DiaryGenerator] = None,
    runs: int = 1,
    n_jobs: int = 1,
) -> List[str]:
    """
    Execute ``runs`` seeded simulations and write one trajectory file each.

    Args:
        config: Base configuration; run k uses seed ``config.seed + k``
        tess: Weighted tessellation
        graph: Social graph with one node per agent
        out_path: Output file (suffixed per run when ``runs`` > 1)
        diary_gen: Diary generator for diary-driven models
        runs: Number of runs
        n_jobs: Parallel workers

    Returns:
        Paths of the written trajectory files, in run order
    """
    if runs < 1:
        raise ConfigError(f"runs must be >= 1, got {runs}")
    directory = os.path.dirname(out_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    configs = [config.updated(seed=config.seed + k) for k in range(runs)]
    for run_config in configs:
        run_config.validate()
    jobs = (
        delayed(_simulate_to_file)(run_config, tess, graph, diary_gen, run_path(out_path, k, runs))
        for k, run_config in enumerate(configs)
    )
    paths = list(Parallel(n_jobs=n_jobs)(jobs))
    logger.info(f"Finished {runs} {config.variant.value} runs (seeds {config.seed}..{config.seed + runs - 1})")
    return paths
