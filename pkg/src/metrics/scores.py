"""
Distribution comparison scores.

Samples are binned into distributions sharing the same edges, then compared
with RMSE, Kullback-Leibler divergence, Hellinger distance, Pearson and
Spearman correlation. Scores over several runs are reported as mean and
population standard deviation.
"""

import logging
import math
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats
from scipy.special import rel_entr

from src.models.data_models import (
    SCORE_NAMES,
    BinnedDistribution,
    BinningScheme,
    Measure,
    MeasureSamples,
    ScoreCell,
    ScoreReport,
    ScoreSet,
)
from src.models.exceptions import EdgeMismatch, EmptySamples, FileUnreadable, FormatError

logger = logging.getLogger(__name__)

KL_FLOOR = 1e-12
KL_LOG_BASE = math.e

# measures whose samples are already masses over fixed bins
MASS_MEASURES = (Measure.ACTIVITY_PER_HOUR, Measure.LOCATION_FREQUENCY_RANK)

DEFAULT_SCHEMES: Dict[Measure, BinningScheme] = {
    Measure.JUMP_LENGTH: BinningScheme("log", 50),
    Measure.RADIUS_OF_GYRATION: BinningScheme("log", 50),
    Measure.VISITS_PER_LOCATION: BinningScheme("log", 50),
    Measure.WAITING_TIME: BinningScheme("log", 50),
    Measure.CHECKINS_PER_USER: BinningScheme("log", 50),
    Measure.UNCORRELATED_ENTROPY: BinningScheme("linear", 50),
    Measure.ACTIVITY_PER_HOUR: BinningScheme("hour24", 24),
    Measure.MOBILITY_SIMILARITY: BinningScheme("linear", 40, 0.0, 1.0),
    Measure.LOCATION_FREQUENCY_RANK: BinningScheme("rank", 20),
}


def _usable(values: np.ndarray, scheme: BinningScheme) -> np.ndarray:
    if scheme.kind == "log":
        return values[values > 0]
    return values


def common_edges(sample_sets: Sequence[MeasureSamples], scheme: BinningScheme) -> np.ndarray:
    """Bin edges covering the union of the supports of ``sample_sets``."""
    if scheme.kind == "hour24":
        return np.arange(25, dtype=float)
    if scheme.kind == "rank":
        return np.arange(scheme.n_bins + 1, dtype=float) + 0.5
    pooled = np.concatenate([_usable(s.values, scheme) for s in sample_sets] or [np.empty(0)])
    if pooled.size == 0:
        raise EmptySamples("No usable sample to bin")
    lo = float(pooled.min()) if scheme.lo is None else scheme.lo
    hi = float(pooled.max()) if scheme.hi is None else scheme.hi
    if scheme.kind == "log":
        if hi <= lo:
            lo, hi = lo / 2.0, hi * 2.0
        return np.geomspace(lo, hi, scheme.n_bins + 1)
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    return np.linspace(lo, hi, scheme.n_bins + 1)


def from_masses(masses: np.ndarray, edges: np.ndarray) -> BinnedDistribution:
    """Distribution from one non-negative mass per bin."""
    masses = np.asarray(masses, dtype=float)
    if masses.size < edges.size - 1:
        masses = np.concatenate([masses, np.zeros(edges.size - 1 - masses.size)])
    masses = masses[: edges.size - 1]
    total = masses.sum()
    if not total > 0:
        raise EmptySamples("All masses are zero")
    return BinnedDistribution(edges, masses / total)


def bin_samples(
    samples: MeasureSamples, scheme: BinningScheme, edges: Optional[np.ndarray] = None
) -> BinnedDistribution:
    """
    Bin ``samples`` into a distribution.

    Args:
        samples: Measure samples
        scheme: log, linear, hour24 or rank
        edges: Shared edges when several sample sets are compared;
            computed from ``samples`` alone otherwise

    Returns:
        Normalised distribution

    Raises:
        EmptySamples: if no sample falls in the bins
    """
    if len(samples) == 0:
        raise EmptySamples(f"No {samples.measure.value} samples to bin")
    edges = common_edges([samples], scheme) if edges is None else np.asarray(edges, dtype=float)
    if samples.measure in MASS_MEASURES:
        return from_masses(samples.values, edges)
    values = _usable(samples.values, scheme)
    dropped = len(samples) - values.size
    if dropped:
        logger.debug(f"Log binning dropped {dropped} non-positive {samples.measure.value} samples")
    counts, _ = np.histogram(values, bins=edges)
    total = counts.sum()
    if total == 0:
        raise EmptySamples(f"No {samples.measure.value} sample falls inside the bins")
    return BinnedDistribution(edges, counts / total)


def bin_together(
    sample_sets: Mapping[str, MeasureSamples], scheme: BinningScheme
) -> Dict[str, BinnedDistribution]:
    """Bin several sample sets on identical edges."""
    edges = common_edges(list(sample_sets.values()), scheme)
    return {name: bin_samples(samples, scheme, edges) for name, samples in sample_sets.items()}


def _correlation(p: np.ndarray, q: np.ndarray, method) -> float:
    if np.ptp(p) == 0 or np.ptp(q) == 0:
        return 1.0 if np.array_equal(p, q) else 0.0
    value = float(method(p, q)[0])
    if not math.isfinite(value):
        return 0.0
    return max(-1.0, min(1.0, value))


def kl_divergence(p: np.ndarray, q: np.ndarray, base: float = KL_LOG_BASE) -> float:
    """KL(p || q) with q floored at ``KL_FLOOR`` and renormalised."""
    floored = np.maximum(q, KL_FLOOR)
    floored = floored / floored.sum()
    return max(0.0, float(rel_entr(p, floored).sum()) / math.log(base))


def hellinger(p: np.ndarray, q: np.ndarray) -> float:
    return min(1.0, float(np.sqrt(((np.sqrt(p) - np.sqrt(q)) ** 2).sum()) / math.sqrt(2.0)))


def compute_scores(p: BinnedDistribution, q: BinnedDistribution, kl_base: float = KL_LOG_BASE) -> ScoreSet:
    """
    Compare a real distribution ``p`` with a synthetic one ``q``.

    Raises:
        EdgeMismatch: if the two were not binned on the same edges
    """
    if p.edges.shape != q.edges.shape or not np.allclose(p.edges, q.edges, rtol=1e-12, atol=0.0):
        raise EdgeMismatch("Distributions have different bin edges")
    a, b = p.density, q.density
    return ScoreSet(
        rmse=float(np.sqrt(np.mean((a - b) ** 2))),
        kl=kl_divergence(a, b, kl_base),
        hellinger=hellinger(a, b),
        pearson=_correlation(a, b, stats.pearsonr),
        spearman=_correlation(a, b, stats.spearmanr),
    )


RunScores = Mapping[Tuple[str, str], ScoreSet]


def aggregate_runs(
    per_run: Sequence[RunScores],
    schemes: Optional[Dict[str, str]] = None,
    seeds: Optional[List[int]] = None,
    config_digest: str = "",
) -> ScoreReport:
    """
    Mean and population standard deviation of each score over runs.

    Args:
        per_run: One mapping (measure, model) -> ScoreSet per run
    """
    if not per_run:
        raise EmptySamples("Need at least one run to aggregate")
    collected: Dict[Tuple[str, str, str], List[float]] = {}
    for run in per_run:
        for (measure, model), scores in run.items():
            for name, value in scores.as_dict().items():
                collected.setdefault((measure, model, name), []).append(value)
    cells = {
        key: ScoreCell(float(np.mean(values)), float(np.std(values)))
        for key, values in sorted(collected.items())
    }
    return ScoreReport(cells, dict(schemes or {}), list(seeds or []), config_digest)


def write_score_report(report: ScoreReport, path: str) -> None:
    """Header block (schemes, seeds, config digest) followed by measure,model,score,mean,std rows."""
    rows = [
        (measure, model, score, cell.mean, cell.std)
        for (measure, model, score), cell in sorted(report.cells.items(), key=lambda kv: _row_key(kv[0]))
    ]
    frame = pd.DataFrame(rows, columns=["measure", "model", "score", "mean", "std"])
    with open(path, "w", newline="") as handle:
        schemes = ";".join(f"{m}={s}" for m, s in sorted(report.schemes.items()))
        handle.write(f"# schemes: {schemes}\n")
        handle.write(f"# seeds: {','.join(str(s) for s in report.seeds)}\n")
        handle.write(f"# config_digest: {report.config_digest}\n")
        frame.to_csv(handle, index=False, float_format="%.10g")
    logger.info(f"Wrote {len(frame)} score cells to {path}")


def _row_key(key: Tuple[str, str, str]) -> Tuple[str, str, int]:
    measure, model, score = key
    return measure, model, SCORE_NAMES.index(score) if score in SCORE_NAMES else len(SCORE_NAMES)


def read_score_report(path: str) -> ScoreReport:
    try:
        with open(path) as handle:
            header = [line[1:].strip() for line in handle if line.startswith("#")]
        frame = pd.read_csv(path, comment="#")
    except (OSError, pd.errors.EmptyDataError) as e:
        raise FileUnreadable(f"Cannot read score report {path}: {e}") from e
    meta = dict(line.split(":", 1) for line in header if ":" in line)
    try:
        schemes = dict(
            item.split("=", 1) for item in meta.get("schemes", "").strip().split(";") if "=" in item
        )
        seeds = [int(s) for s in meta.get("seeds", "").strip().split(",") if s]
    except ValueError as e:
        raise FormatError(f"Malformed score report header in {path}") from e
    cells = {
        (row.measure, row.model, row.score): ScoreCell(float(row.mean), float(row.std))
        for row in frame.itertuples(index=False)
    }
    return ScoreReport(cells, schemes, seeds, meta.get("config_digest", "").strip())


def distribution_rows(measure: str, distributions: Mapping[str, BinnedDistribution]) -> pd.DataFrame:
    """(measure, bin_left, bin_right, model, density) rows for a distribution dump."""
    frames = [
        pd.DataFrame(
            {
                "measure": measure,
                "bin_left": dist.edges[:-1],
                "bin_right": dist.edges[1:],
                "model": model,
                "density": dist.density,
            }
        )
        for model, dist in distributions.items()
    ]
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()
