"""
Tessellation and exclusion-list files.

A tessellation file is comma-separated with a header ``id,lat,lng,relevance``
and, for grid tessellations, a ``cell`` column. An optional first comment
line carries the grid geometry::

    # tile_side_m=1000 bbox=40.5,-74.3,40.9,-73.7 grid=40.5,-74.3,0.0089,0.0118,45,51
"""

import logging
import os
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from src.models.data_models import LAT, LNG, GeoPoint, Location
from src.models.exceptions import FileUnreadable, FormatError
from src.tessellation.tessellation import GridSpec, WeightedTessellation

logger = logging.getLogger(__name__)

TESSELLATION_COLUMNS = ["id", LAT, LNG, "relevance"]


def _format_floats(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def _header(tess: WeightedTessellation) -> str:
    parts = [f"tile_side_m={tess.tile_side_m!r}", f"bbox={_format_floats(tess.bbox)}"]
    if tess.grid is not None:
        g = tess.grid
        fields = (g.min_lat, g.min_lng, g.max_lat, g.max_lng, g.dlat, g.dlng)
        parts.append(f"grid={_format_floats(fields)},{g.n_rows},{g.n_cols}")
    return "# " + " ".join(parts)


def _parse_header(line: str) -> Dict[str, str]:
    meta = {}
    for token in line.lstrip("#").split():
        key, sep, value = token.partition("=")
        if sep:
            meta[key] = value
    return meta


def write_tessellation(tess: WeightedTessellation, path: str) -> None:
    """Write ``tess`` to ``path``, atomically."""
    frame = pd.DataFrame(
        {"id": np.arange(len(tess)), LAT: tess.lats, LNG: tess.lngs, "relevance": tess.relevances}
    )
    if tess.grid is not None and tess.cells.size:
        frame["cell"] = tess.cells
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as handle:
        handle.write(_header(tess) + "\n")
        frame.to_csv(handle, index=False, float_format="%.10g")
    os.replace(tmp, path)
    logger.info(f"Wrote {len(tess)} locations to {path}")


def read_tessellation(path: str, min_relevance: Optional[float] = None) -> WeightedTessellation:
    """
    Load a tessellation file.

    Args:
        path: File to read
        min_relevance: When given, replaces relevance values below it
            (tessellations written before relevance was assigned carry zeros)

    Returns:
        The tessellation, with grid geometry when the header carries it
    """
    try:
        with open(path) as handle:
            first = handle.readline()
        frame = pd.read_csv(path, comment="#")
    except (OSError, pd.errors.EmptyDataError) as e:
        raise FileUnreadable(f"Cannot read tessellation {path}: {e}") from e

    missing = [c for c in TESSELLATION_COLUMNS if c not in frame.columns]
    if missing:
        raise FormatError(f"Tessellation {path} lacks columns {missing}")
    frame = frame.sort_values("id")
    if not np.array_equal(frame["id"].to_numpy(), np.arange(len(frame))):
        raise FormatError(f"Tessellation {path} ids are not 0..n-1")

    relevance = frame["relevance"].to_numpy(dtype=float)
    if min_relevance is not None:
        relevance = np.maximum(relevance, min_relevance)
    locations = [
        Location(int(i), GeoPoint(float(lat), float(lng)), float(w))
        for i, lat, lng, w in zip(frame["id"], frame[LAT], frame[LNG], relevance)
    ]

    meta = _parse_header(first) if first.startswith("#") else {}
    try:
        tile_side = float(meta.get("tile_side_m", "nan"))
        if "bbox" in meta:
            bbox = tuple(float(v) for v in meta["bbox"].split(","))
        else:
            lats, lngs = frame[LAT], frame[LNG]
            bbox = (lats.min(), lngs.min(), lats.max(), lngs.max())
        grid = None
        if "grid" in meta and "cell" in frame.columns:
            values = meta["grid"].split(",")
            grid = GridSpec(*(float(v) for v in values[:6]), int(values[6]), int(values[7]))
    except (ValueError, IndexError, TypeError) as e:
        raise FormatError(f"Malformed tessellation header in {path}: {first.strip()}") from e

    cells = frame["cell"].to_numpy(dtype=np.int64) if grid is not None else None
    logger.info(f"Loaded {len(locations)} locations from {path}")
    return WeightedTessellation(locations, tile_side, bbox, grid, cells)  # type: ignore[arg-type]


def read_exclusion_list(path: str) -> List[int]:
    """Tile ids to exclude, one per line; blank lines are ignored."""
    try:
        with open(path) as handle:
            lines = [line.strip() for line in handle]
    except OSError as e:
        raise FileUnreadable(f"Cannot read exclusion list {path}: {e}") from e
    ids = []
    for number, line in enumerate(lines, start=1):
        if not line:
            continue
        try:
            ids.append(int(line))
        except ValueError:
            raise FormatError(f"{path}:{number}: '{line}' is not a tile id") from None
    return ids
