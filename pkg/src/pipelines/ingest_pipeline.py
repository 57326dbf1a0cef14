"""
Check-in ingestion pipeline.

Turns a raw check-in dump, its venue lookup and a social graph into
trajectories of socially connected users. Steps run in this order: venue
join, bounding box, localisation, graph membership, time window, fast
check-in collapse, users with at least two check-ins and one edge, main
component of the social graph.
"""

import csv
import logging
import os
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Iterator, List, Optional, Tuple

import networkx as nx
import pandas as pd

from src.engine.social_graph import SocialGraph, graph_summary, read_edge_list
from src.engine.simulator import write_trajectories
from src.models.data_models import (
    DATETIME,
    LAT,
    LNG,
    UID,
    CheckinRecord,
    GeoPoint,
    PipelineReport,
    TrajectoryRecord,
    VenueRecord,
)
from src.models.exceptions import EmptyResult, FileUnreadable
from src.tessellation.tessellation import BBox

logger = logging.getLogger(__name__)

CHECKIN_COLUMNS = ["user_id", "location_id", "utc_time", "tz_offset_min"]
VENUE_COLUMNS = ["location_id", LAT, LNG, "category", "country_code"]
TIME_FORMAT = "%a %b %d %H:%M:%S %Y"
# the public dumps also write the zone: "Tue Apr 03 18:00:06 +0000 2012"
ZONED_TIME_FORMAT = "%a %b %d %H:%M:%S %z %Y"
MAX_OFFSET_MIN = 14 * 60
FAST_CHECKIN_SECONDS = 7.0


def _read_tab_file(path: str, columns: List[str]) -> Tuple[pd.DataFrame, int]:
    bad_lines = []

    def on_bad_line(line: List[str]) -> None:
        bad_lines.append(line)

    try:
        frame = pd.read_csv(
            path,
            sep="\t",
            header=None,
            names=columns,
            dtype=str,
            engine="python",
            on_bad_lines=on_bad_line,
            skip_blank_lines=True,
            quoting=csv.QUOTE_NONE,
        )
    except pd.errors.EmptyDataError:
        return pd.DataFrame(columns=columns), 0
    except OSError as e:
        raise FileUnreadable(f"Cannot read {path}: {e}") from e
    complete = frame.dropna()
    return complete.reset_index(drop=True), len(bad_lines) + len(frame) - len(complete)


def _parse_utc(times: pd.Series) -> pd.Series:
    """Naive UTC datetimes from either timestamp form; NaT where neither matches."""
    parsed = pd.to_datetime(times, format=TIME_FORMAT, errors="coerce")
    zoned = parsed.isna() & times.notna()
    if zoned.any():
        aware = pd.to_datetime(times[zoned], format=ZONED_TIME_FORMAT, errors="coerce", utc=True)
        parsed.loc[zoned] = aware.dt.tz_convert(None)
    return parsed


def parse_checkins(path: str) -> Tuple[pd.DataFrame, int]:
    """
    Parse a tab-separated check-in file.

    Args:
        path: File with user_id, location_id, UTC time and offset columns

    Returns:
        Tuple of the parsed frame (``utc_time`` as datetime, offset as int)
        and the number of skipped lines
    """
    frame, skipped = _read_tab_file(path, CHECKIN_COLUMNS)
    times = frame["utc_time"].str.split().str.join(" ")
    frame = frame.assign(
        utc_time=_parse_utc(times),
        tz_offset_min=pd.to_numeric(frame["tz_offset_min"].str.strip(), errors="coerce"),
        user_id=frame["user_id"].str.strip(),
        location_id=frame["location_id"].str.strip(),
    )
    valid = frame["utc_time"].notna() & frame["tz_offset_min"].between(-MAX_OFFSET_MIN, MAX_OFFSET_MIN)
    valid &= frame["tz_offset_min"].round() == frame["tz_offset_min"]
    skipped += int((~valid).sum())
    frame = frame[valid].astype({"tz_offset_min": int}).reset_index(drop=True)
    if skipped:
        logger.warning(f"Skipped {skipped} malformed check-in lines in {path}")
    logger.info(f"Parsed {len(frame)} check-ins from {path}")
    return frame, skipped


def parse_venues(path: str) -> Tuple[pd.DataFrame, int]:
    """Parse a tab-separated venue lookup; returns the frame and the skipped-line count."""
    frame, skipped = _read_tab_file(path, VENUE_COLUMNS)
    frame = frame.assign(
        **{
            LAT: pd.to_numeric(frame[LAT], errors="coerce"),
            LNG: pd.to_numeric(frame[LNG], errors="coerce"),
            "location_id": frame["location_id"].str.strip(),
        }
    )
    valid = frame[LAT].between(-90.0, 90.0) & (frame[LNG] >= -180.0) & (frame[LNG] < 180.0)
    skipped += int((~valid).sum())
    frame = frame[valid].drop_duplicates("location_id").reset_index(drop=True)
    if skipped:
        logger.warning(f"Skipped {skipped} malformed venue lines in {path}")
    logger.info(f"Parsed {len(frame)} venues from {path}")
    return frame, skipped


def checkin_records(frame: pd.DataFrame) -> Iterator[CheckinRecord]:
    for row in frame.itertuples(index=False):
        yield CheckinRecord(row.user_id, row.location_id, row.utc_time.to_pydatetime(), int(row.tz_offset_min))


def venue_records(frame: pd.DataFrame) -> Iterator[VenueRecord]:
    for row in frame.itertuples(index=False):
        yield VenueRecord(row.location_id, GeoPoint(float(row.lat), float(row.lng)), row.category, row.country_code)


def localize(utc: datetime, tz_offset_min: int) -> datetime:
    """Local time of a UTC timestamp given the venue's offset in minutes."""
    return utc + timedelta(minutes=tz_offset_min)


def read_raw_graph(path: str) -> Tuple[nx.Graph, int]:
    """Social graph keyed by raw user ids; returns the graph and the skipped-line count."""
    return read_edge_list(path)


def collapse_fast_checkins(
    frame: pd.DataFrame, threshold_s: float = FAST_CHECKIN_SECONDS, user_col: str = UID
) -> pd.DataFrame:
    """
    Merge chains of consecutive check-ins whose successive gaps are <= ``threshold_s``.

    Each chain becomes one record at the mean position and the mean time,
    rounded to the second.
    """
    if frame.empty:
        return frame.copy()
    ordered = frame.sort_values([user_col, DATETIME], kind="mergesort").reset_index(drop=True)
    gaps = ordered.groupby(user_col, sort=False)[DATETIME].diff().dt.total_seconds()
    chain = (~(gaps <= threshold_s)).cumsum()
    nanos = ordered[DATETIME].astype("datetime64[ns]").astype("int64")
    collapsed = pd.DataFrame(
        {
            user_col: ordered.groupby(chain)[user_col].first(),
            LAT: ordered.groupby(chain)[LAT].mean(),
            LNG: ordered.groupby(chain)[LNG].mean(),
            DATETIME: pd.to_datetime(nanos.groupby(chain).mean().round().astype("int64")).dt.round("s"),
        }
    )
    return collapsed.reset_index(drop=True)


@dataclass
class IngestResult:
    """Filtered trajectories (uid remapped to 0..n-1) and the matching social graph."""

    trajectories: pd.DataFrame
    graph: SocialGraph
    report: PipelineReport
    user_ids: List[str]

    def records(self) -> Iterator[TrajectoryRecord]:
        for row in self.trajectories.itertuples(index=False):
            yield TrajectoryRecord(int(row.uid), GeoPoint(row.lat, row.lng), row.timestamp.to_pydatetime())


def _user_key(user: str) -> Tuple[int, object]:
    return (0, int(user)) if user.lstrip("-").isdigit() else (1, user)


def _record(report: PipelineReport, step: str, frame: pd.DataFrame, user_col: str = "user_id") -> None:
    users = frame[user_col].nunique() if len(frame) else 0
    report.record(step, int(users), len(frame))
    logger.info(f"{step}: {users} users, {len(frame)} check-ins")


def filter_pipeline(
    checkins: pd.DataFrame,
    venues: pd.DataFrame,
    graph: nx.Graph,
    window: Optional[Tuple[datetime, datetime]] = None,
    bbox: Optional[BBox] = None,
    threshold_s: float = FAST_CHECKIN_SECONDS,
    report: Optional[PipelineReport] = None,
) -> IngestResult:
    """
    Apply the filtering steps to parsed check-ins.

    Args:
        checkins: Frame from ``parse_checkins``
        venues: Frame from ``parse_venues``
        graph: Social graph keyed by raw user ids
        window: Optional [start, end) in local time
        bbox: Optional (min_lat, min_lng, max_lat, max_lng)
        threshold_s: Fast check-in threshold in seconds
        report: Report to extend, e.g. with skipped-line counts

    Returns:
        Filtered trajectories, remapped graph and per-step counts

    Raises:
        EmptyResult: if no user survives
    """
    report = report if report is not None else PipelineReport()
    _record(report, "parsed", checkins)

    frame = checkins.merge(venues[["location_id", LAT, LNG]], on="location_id", how="inner")
    _record(report, "venue_join", frame)

    if bbox is not None:
        min_lat, min_lng, max_lat, max_lng = bbox
        frame = frame[frame[LAT].between(min_lat, max_lat) & frame[LNG].between(min_lng, max_lng)]
        _record(report, "bbox", frame)

    frame = frame.assign(**{DATETIME: frame["utc_time"] + pd.to_timedelta(frame["tz_offset_min"], unit="m")})

    members = set(graph.nodes)
    frame = frame[frame["user_id"].isin(members)]
    _record(report, "graph_membership", frame)

    if window is not None:
        start, end = window
        frame = frame[(frame[DATETIME] >= start) & (frame[DATETIME] < end)]
        _record(report, "window", frame)

    frame = collapse_fast_checkins(frame[["user_id", LAT, LNG, DATETIME]], threshold_s, user_col="user_id")
    _record(report, "fast_checkins", frame)

    counts = frame.groupby("user_id").size() if len(frame) else pd.Series(dtype=int)
    frame = frame[frame["user_id"].isin(set(counts[counts >= 2].index))]
    _record(report, "min_two_checkins", frame)

    sub = graph.subgraph(set(frame["user_id"])).copy()
    sub.remove_nodes_from([u for u, d in list(sub.degree()) if d == 0])
    frame = frame[frame["user_id"].isin(set(sub.nodes))]
    _record(report, "has_edge", frame)

    if sub.number_of_nodes() == 0:
        raise EmptyResult("No user survives the ingest filters")
    # largest component; ties go to the one holding the smallest user id
    main = min(nx.connected_components(sub), key=lambda c: (-len(c), min(_user_key(u) for u in c)))
    frame = frame[frame["user_id"].isin(main)]
    _record(report, "main_component", frame)

    user_ids = sorted(main, key=_user_key)
    new_id = {user: i for i, user in enumerate(user_ids)}
    trajectories = (
        frame.assign(**{UID: frame["user_id"].map(new_id)})[[UID, LAT, LNG, DATETIME]]
        .sort_values([UID, DATETIME], kind="mergesort")
        .reset_index(drop=True)
    )
    social = SocialGraph.from_edges(
        ((new_id[u], new_id[v]) for u, v in sub.subgraph(main).edges), n_nodes=len(user_ids)
    )
    report.graph_summary = graph_summary(social)
    return IngestResult(trajectories, social, report, user_ids)


def write_report(report: PipelineReport, path: str) -> None:
    """Plain-text report: per-step counts, skipped lines and graph summary."""
    lines = ["step\tusers\tcheckins"]
    lines += [f"{s.step}\t{s.users}\t{s.checkins}" for s in report.steps]
    lines += [f"skipped_{name}\t{count}" for name, count in sorted(report.skipped_lines.items())]
    for key, value in report.graph_summary.items():
        if key != "degree_sequence":
            lines.append(f"graph_{key}\t{value}")
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")


def run_ingest(
    checkins_path: str,
    venues_path: str,
    graph_path: str,
    out_prefix: str,
    window: Optional[Tuple[datetime, datetime]] = None,
    bbox: Optional[BBox] = None,
) -> IngestResult:
    """
    Parse, filter and write ``<prefix>_traj.csv``, ``<prefix>_graph.txt``,
    ``<prefix>_users.csv`` and ``<prefix>_report.txt``.
    """
    checkins, skipped_checkins = parse_checkins(checkins_path)
    venues, skipped_venues = parse_venues(venues_path)
    graph, skipped_edges = read_raw_graph(graph_path)
    report = PipelineReport(
        skipped_lines={"checkins": skipped_checkins, "venues": skipped_venues, "graph": skipped_edges}
    )
    result = filter_pipeline(checkins, venues, graph, window, bbox, report=report)

    directory = os.path.dirname(out_prefix)
    if directory:
        os.makedirs(directory, exist_ok=True)
    write_trajectories(list(result.records()), f"{out_prefix}_traj.csv")
    result.graph.write_edge_list(f"{out_prefix}_graph.txt")
    pd.DataFrame({UID: range(len(result.user_ids)), "user_id": result.user_ids}).to_csv(
        f"{out_prefix}_users.csv", index=False
    )
    write_report(result.report, f"{out_prefix}_report.txt")
    final = result.report.final()
    logger.info(
        f"Ingest kept {final.checkins} check-ins from {final.users} users "
        f"and {result.graph.number_of_edges()} edges"
    )
    return result
