"""
Data models for the mobility simulator.
Defines the domain types shared by the tessellation, diary, engine, metrics
and ingest layers.
"""

import math
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Dict, Hashable, Iterable, Iterator, List, Optional, Tuple

import numpy as np

from src.models.exceptions import EmptyVector, FormatError

# Trajectory frame columns
UID = "uid"
LAT = "lat"
LNG = "lng"
DATETIME = "timestamp"
TRAJECTORY_COLUMNS = [UID, LAT, LNG, DATETIME]

HOME = 0


class Action(Enum):
    """Location-selection action of one move."""

    EXPLORE_INDIVIDUAL = "explore_individual"
    EXPLORE_SOCIAL = "explore_social"
    RETURN_INDIVIDUAL = "return_individual"
    RETURN_SOCIAL = "return_social"
    HOME_RETURN = "home_return"

    @property
    def is_explore(self) -> bool:
        return self in (Action.EXPLORE_INDIVIDUAL, Action.EXPLORE_SOCIAL)

    @property
    def is_social(self) -> bool:
        return self in (Action.EXPLORE_SOCIAL, Action.RETURN_SOCIAL)

    @property
    def individual(self) -> "Action":
        """Same spatial mechanism without social influence."""
        if self.is_explore:
            return Action.EXPLORE_INDIVIDUAL
        if self is Action.RETURN_SOCIAL:
            return Action.RETURN_INDIVIDUAL
        return self

    @property
    def complementary(self) -> "Action":
        """Opposite spatial mechanism, individual flavour."""
        if self.is_explore:
            return Action.RETURN_INDIVIDUAL
        return Action.EXPLORE_INDIVIDUAL


class ModelVariant(Enum):
    """Supported generative models, keyed by their command-line names."""

    GEOSIM = "geosim"
    GEOSIM_D = "geosim-d"
    GEOSIM_GRAVITY = "geosim-gravity"
    STS_EPR = "sts-epr"

    @property
    def uses_diary(self) -> bool:
        return self is ModelVariant.STS_EPR

    @classmethod
    def parse(cls, name: str) -> "ModelVariant":
        normalized = name.strip().lower().replace("_", "-")
        aliases = {"geosimd": "geosim-d", "geosimgravity": "geosim-gravity", "stsepr": "sts-epr"}
        normalized = aliases.get(normalized.replace("-", ""), normalized)
        try:
            return cls(normalized)
        except ValueError:
            valid = ", ".join(v.value for v in cls)
            raise FormatError(f"Unknown model '{name}' (expected one of: {valid})") from None


@dataclass(frozen=True)
class GeoPoint:
    """A point on the sphere, in degrees."""

    lat: float
    lng: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat) and math.isfinite(self.lng)):
            raise FormatError(f"Non-finite coordinates ({self.lat}, {self.lng})")
        if not -90.0 <= self.lat <= 90.0:
            raise FormatError(f"Latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lng < 180.0:
            raise FormatError(f"Longitude {self.lng} outside [-180, 180)")


@dataclass(frozen=True)
class Location:
    """A tile of a weighted tessellation."""

    id: int
    centroid: GeoPoint
    relevance: float = 0.0

    def __post_init__(self) -> None:
        if self.relevance < 0:
            raise FormatError(f"Location {self.id} has negative relevance {self.relevance}")


class LocationVector:
    """
    Sparse visit counts of one agent (or user).

    Absent keys mean zero visits; stored counts are always positive.
    """

    __slots__ = ("_counts", "_total")

    def __init__(self, counts: Optional[Dict[Hashable, int]] = None):
        self._counts: Dict[Hashable, int] = {}
        self._total = 0
        for key, value in (counts or {}).items():
            if value < 0:
                raise FormatError(f"Negative visit count {value} for location {key}")
            if value > 0:
                self._counts[key] = int(value)
                self._total += int(value)

    @classmethod
    def from_visits(cls, visits: Iterable[Hashable]) -> "LocationVector":
        vector = cls()
        for key in visits:
            vector.add(key)
        return vector

    def add(self, key: Hashable, n: int = 1) -> bool:
        """Record ``n`` visits; returns True when ``key`` was unvisited before."""
        if n <= 0:
            raise FormatError("Visit increments must be positive")
        is_new = key not in self._counts
        self._counts[key] = self._counts.get(key, 0) + n
        self._total += n
        return is_new

    def count(self, key: Hashable) -> int:
        return self._counts.get(key, 0)

    @property
    def total(self) -> int:
        return self._total

    @property
    def distinct(self) -> int:
        """Number of distinct visited locations (S)."""
        return len(self._counts)

    def support(self) -> List[Hashable]:
        return list(self._counts)

    def items(self) -> Iterator[Tuple[Hashable, int]]:
        return iter(self._counts.items())

    def frequencies(self) -> Dict[Hashable, float]:
        if self._total == 0:
            raise EmptyVector("Location vector has no visits")
        return {key: value / self._total for key, value in self._counts.items()}

    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self._counts.values()))

    def copy(self) -> "LocationVector":
        return LocationVector(dict(self._counts))

    def __contains__(self, key: object) -> bool:
        return key in self._counts

    def __len__(self) -> int:
        return len(self._counts)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, LocationVector) and self._counts == other._counts

    def __repr__(self) -> str:
        return f"LocationVector({self._counts})"


@dataclass(frozen=True)
class TrajectoryRecord:
    """Output atom of the simulator and input atom of the metrics."""

    uid: int
    point: GeoPoint
    timestamp: datetime

    def as_row(self) -> Tuple[int, float, float, datetime]:
        return (self.uid, self.point.lat, self.point.lng, self.timestamp)


@dataclass(frozen=True)
class DiaryEntry:
    abstract_id: int
    timestamp: datetime


@dataclass
class MobilityDiary:
    """Timed sequence of abstract locations; abstract id 0 is home."""

    entries: List[DiaryEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, index: int) -> DiaryEntry:
        return self.entries[index]

    def runs(self) -> List[List[int]]:
        """Abstract ids of each run (segment between consecutive home entries)."""
        runs: List[List[int]] = []
        current: List[int] = []
        for entry in self.entries:
            if entry.abstract_id == HOME:
                if current:
                    runs.append(current)
                current = []
            else:
                current.append(entry.abstract_id)
        if current:
            runs.append(current)
        return runs

    def validate(self) -> bool:
        if not self.entries:
            raise FormatError("Mobility diary is empty")
        if self.entries[0].abstract_id != HOME:
            raise FormatError("Mobility diary must start at home")
        for previous, entry in zip(self.entries, self.entries[1:]):
            if entry.timestamp <= previous.timestamp:
                raise FormatError(f"Diary timestamps not increasing at {entry.timestamp}")
        for run in self.runs():
            if len(set(run)) != len(run) or HOME in run:
                raise FormatError(f"Run {run} repeats an abstract location")
        return True


@dataclass(frozen=True)
class CheckinRecord:
    """One row of the check-in file."""

    user_id: str
    location_id: str
    utc_time: datetime
    tz_offset_min: int


@dataclass(frozen=True)
class VenueRecord:
    """One row of the venue lookup file."""

    location_id: str
    point: GeoPoint
    category: str
    country_code: str


class Measure(Enum):
    """Mobility measures; the value is the unit of the samples."""

    JUMP_LENGTH = "jump_length"
    RADIUS_OF_GYRATION = "radius_of_gyration"
    VISITS_PER_LOCATION = "visits_per_location"
    LOCATION_FREQUENCY_RANK = "location_frequency_rank"
    WAITING_TIME = "waiting_time"
    UNCORRELATED_ENTROPY = "uncorrelated_entropy"
    ACTIVITY_PER_HOUR = "activity_per_hour"
    MOBILITY_SIMILARITY = "mobility_similarity"
    CHECKINS_PER_USER = "checkins_per_user"

    @classmethod
    def parse(cls, name: str) -> "Measure":
        try:
            return cls(name.strip().lower().replace("-", "_"))
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise FormatError(f"Unknown measure '{name}' (expected one of: {valid})") from None


MEASURE_UNITS = {
    Measure.JUMP_LENGTH: "km",
    Measure.RADIUS_OF_GYRATION: "km",
    Measure.VISITS_PER_LOCATION: "count",
    Measure.LOCATION_FREQUENCY_RANK: "fraction",
    Measure.WAITING_TIME: "hours",
    Measure.UNCORRELATED_ENTROPY: "bits",
    Measure.ACTIVITY_PER_HOUR: "count-per-hour",
    Measure.MOBILITY_SIMILARITY: "cosine",
    Measure.CHECKINS_PER_USER: "count",
}


@dataclass
class MeasureSamples:
    """Samples of one mobility measure, with measure-specific metadata."""

    measure: Measure
    values: np.ndarray
    metadata: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.size and not np.all(np.isfinite(self.values)):
            raise FormatError(f"{self.measure.value} produced non-finite values")

    @property
    def unit(self) -> str:
        return MEASURE_UNITS[self.measure]

    @property
    def is_empty(self) -> bool:
        return self.values.size == 0 or not np.any(self.values)

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class BinningScheme:
    """How samples are turned into a distribution: log, linear, hour24 or rank."""

    kind: str
    n_bins: int = 50
    lo: Optional[float] = None
    hi: Optional[float] = None

    KINDS = ("log", "linear", "hour24", "rank")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise FormatError(f"Unknown binning scheme '{self.kind}'")
        if self.n_bins < 1:
            raise FormatError("Binning schemes need at least one bin")

    @classmethod
    def parse(cls, text: str) -> "BinningScheme":
        """Parse ``kind[:n_bins]``, e.g. ``log:50`` or ``hour24``."""
        kind, _, count = text.strip().partition(":")
        if kind == "hour24":
            return cls("hour24", 24)
        try:
            return cls(kind, int(count)) if count else cls(kind)
        except ValueError:
            raise FormatError(f"Invalid binning scheme '{text}'") from None

    def describe(self) -> str:
        if self.kind == "hour24":
            return "hour24"
        bounds = "" if self.lo is None else f"[{self.lo:g},{self.hi:g}]"
        return f"{self.kind}:{self.n_bins}{bounds}"


@dataclass
class BinnedDistribution:
    edges: np.ndarray
    density: np.ndarray

    def __post_init__(self) -> None:
        self.edges = np.asarray(self.edges, dtype=float)
        self.density = np.asarray(self.density, dtype=float)
        if self.density.size != self.edges.size - 1:
            raise FormatError("A distribution needs exactly one mass per bin")
        if np.any(np.diff(self.edges) <= 0):
            raise FormatError("Bin edges must be strictly ascending")
        if np.any(self.density < 0) or abs(self.density.sum() - 1.0) > 1e-9:
            raise FormatError("Bin masses must be non-negative and sum to one")


SCORE_NAMES = ("rmse", "kl", "hellinger", "pearson", "spearman")


@dataclass(frozen=True)
class ScoreSet:
    """The five similarity scores between a real and a synthetic distribution."""

    rmse: float
    kl: float
    hellinger: float
    pearson: float
    spearman: float

    def as_dict(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in SCORE_NAMES}


@dataclass(frozen=True)
class ScoreCell:
    mean: float
    std: float


@dataclass
class ScoreReport:
    """Scores per (measure, model, score) aggregated over runs."""

    cells: Dict[Tuple[str, str, str], ScoreCell] = field(default_factory=dict)
    schemes: Dict[str, str] = field(default_factory=dict)
    seeds: List[int] = field(default_factory=list)
    config_digest: str = ""

    def get(self, measure: str, model: str, score: str) -> ScoreCell:
        return self.cells[(measure, model, score)]

    def models(self) -> List[str]:
        return sorted({model for _, model, _ in self.cells})


@dataclass(frozen=True)
class StepCount:
    step: str
    users: int
    checkins: int


@dataclass
class PipelineReport:
    """Per-step survivor counts of the ingest pipeline."""

    steps: List[StepCount] = field(default_factory=list)
    skipped_lines: Dict[str, int] = field(default_factory=dict)
    graph_summary: Dict[str, object] = field(default_factory=dict)

    def record(self, step: str, users: int, checkins: int) -> None:
        self.steps.append(StepCount(step, users, checkins))

    def final(self) -> StepCount:
        return self.steps[-1]
