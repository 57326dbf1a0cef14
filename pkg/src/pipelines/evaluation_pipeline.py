"""
Evaluation pipeline: compare synthetic trajectories against real ones.

For every measure and every synthetic run the real and synthetic samples are
binned on shared edges and scored; scores are then aggregated per model over
runs. Binned densities of the real data and of each model's first run are
kept for plotting.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.engine.social_graph import SocialGraph
from src.metrics.measures import compute_measure
from src.metrics.scores import (
    DEFAULT_SCHEMES,
    aggregate_runs,
    bin_together,
    compute_scores,
    distribution_rows,
)
from src.models.data_models import BinningScheme, Measure, MeasureSamples, ScoreReport, ScoreSet
from src.models.exceptions import EmptySamples
from src.tessellation.tessellation import WeightedTessellation

logger = logging.getLogger(__name__)

REAL = "real"


@dataclass
class EvaluationResult:
    report: ScoreReport
    distributions: pd.DataFrame
    skipped: Dict[str, str] = field(default_factory=dict)


def resolve_schemes(overrides: Optional[Mapping[Measure, BinningScheme]] = None) -> Dict[Measure, BinningScheme]:
    schemes = dict(DEFAULT_SCHEMES)
    schemes.update(overrides or {})
    return schemes


def _measure_inputs_missing(
    measure: Measure, tess: Optional[WeightedTessellation], graph: Optional[SocialGraph]
) -> Optional[str]:
    if measure is Measure.VISITS_PER_LOCATION and tess is None:
        return "needs a tessellation"
    if measure is Measure.MOBILITY_SIMILARITY and graph is None:
        return "needs a social graph"
    return None


def evaluate(
    real: pd.DataFrame,
    synthetic: Mapping[str, Sequence[pd.DataFrame]],
    measures: Sequence[Measure],
    schemes: Optional[Mapping[Measure, BinningScheme]] = None,
    tess: Optional[WeightedTessellation] = None,
    graph: Optional[SocialGraph] = None,
    seed: int = 0,
    seeds: Optional[List[int]] = None,
    config_digest: str = "",
    waiting_mode: str = "all",
) -> EvaluationResult:
    """
    Score each synthetic model against the real trajectories.

    Args:
        real: Real trajectory frame
        synthetic: Runs per model label
        measures: Measures to compare
        schemes: Binning overrides per measure
        tess: Tessellation, needed by visits per location
        graph: Social graph, needed by mobility similarity
        seed: Seed of the random pairs drawn by mobility similarity
        seeds: Simulation seeds recorded in the report header
        config_digest: Configuration fingerprint recorded in the report header
        waiting_mode: Waiting-time treatment of sub-hour gaps

    Returns:
        Aggregated score report and binned distributions
    """
    resolved = resolve_schemes(schemes)
    n_runs = max((len(runs) for runs in synthetic.values()), default=0)
    per_run: List[Dict[Tuple[str, str], ScoreSet]] = [{} for _ in range(n_runs)]
    dumps = []
    skipped: Dict[str, str] = {}

    def samples_of(measure: Measure, frame: pd.DataFrame) -> MeasureSamples:
        rng = np.random.default_rng(seed)
        return compute_measure(measure, frame, tess, graph, rng, waiting_mode)

    for measure in measures:
        reason = _measure_inputs_missing(measure, tess, graph)
        if reason:
            logger.warning(f"Skipping {measure.value}: {reason}")
            skipped[measure.value] = reason
            continue
        scheme = resolved[measure]
        real_samples = samples_of(measure, real)
        first_runs: Dict[str, MeasureSamples] = {REAL: real_samples}
        for label, runs in synthetic.items():
            for k, frame in enumerate(runs):
                model_samples = samples_of(measure, frame)
                if k == 0:
                    first_runs[label] = model_samples
                try:
                    binned = bin_together({REAL: real_samples, label: model_samples}, scheme)
                except EmptySamples as e:
                    logger.warning(f"Skipping {measure.value} for {label} run {k}: {e}")
                    skipped[f"{measure.value}/{label}/{k}"] = str(e)
                    continue
                per_run[k][(measure.value, label)] = compute_scores(binned[REAL], binned[label])
        try:
            dumps.append(distribution_rows(measure.value, bin_together(first_runs, scheme)))
        except EmptySamples as e:
            logger.warning(f"No distribution dump for {measure.value}: {e}")

    runs_with_scores = [run for run in per_run if run]
    if not runs_with_scores:
        raise EmptySamples("No measure could be scored")
    report = aggregate_runs(
        runs_with_scores,
        {m.value: resolved[m].describe() for m in measures if m.value not in skipped},
        seeds,
        config_digest,
    )
    distributions = pd.concat(dumps, ignore_index=True) if dumps else pd.DataFrame()
    logger.info(f"Scored {len(report.cells)} cells for models {report.models()}")
    return EvaluationResult(report, distributions, skipped)
