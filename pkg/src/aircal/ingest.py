"""Deployment CSV parsing into typed sensor records.

CSV convention: RFC-4180-style, UTF-8, one header line, empty cell =
missing. Cells that parse as finite decimal numbers become reals; anything
else stays text (so "nan"/"inf" text never smuggles a non-finite number
in). Numeric parsing accepts a decimal point only, never locale commas,
so files parse identically on every machine.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Mapping, Optional, Sequence, Union

from aircal.errors import IntegrityError, ParseError, SchemaError

Cell = Union[None, float, str]

# Record field -> CSV column. The sensor vocabulary (OPCN3PM25, Ref.PM2.5,
# SHT31TI/TE/HI/HE) is the deployment files' own; id, time, and position
# columns are bound here and can be remapped per file at run time.
DEFAULT_SCHEMA: dict[str, str] = {
    "sensor_id": "SensorID",
    "timestamp": "Timestamp",
    "raw_pm25": "OPCN3PM25",
    "ref_pm25": "Ref.PM2.5",
    "longitude": "Longitude",
    "latitude": "Latitude",
    "temp_internal": "SHT31TI",
    "temp_external": "SHT31TE",
    "hum_internal": "SHT31HI",
    "hum_external": "SHT31HE",
}

_REQUIRED_FIELDS = ("sensor_id", "timestamp", "longitude", "latitude")
_OPTIONAL_FIELDS = (
    "raw_pm25",
    "ref_pm25",
    "temp_internal",
    "temp_external",
    "hum_internal",
    "hum_external",
)


@dataclass(frozen=True)
class RawTable:
    """A parsed CSV: unique column names and rectangular rows of
    None | float | str cells."""

    column_names: tuple[str, ...]
    rows: tuple[tuple[Cell, ...], ...]

    def __post_init__(self) -> None:
        if len(set(self.column_names)) != len(self.column_names):
            raise SchemaError("duplicate column name in header")
        if any(not name for name in self.column_names):
            raise SchemaError("empty column name in header")
        width = len(self.column_names)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise ParseError(f"row {i} has {len(row)} cells, expected {width}")

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> tuple[Cell, ...]:
        try:
            j = self.column_names.index(name)
        except ValueError:
            raise SchemaError(f"no column named {name!r}") from None
        return tuple(row[j] for row in self.rows)


@dataclass(frozen=True)
class SensorRecord:
    """One timestamped reading from one deployment. Optional channels are
    None when the file had no value."""

    sensor_id: str
    timestamp: int
    raw_pm25: Optional[float]
    ref_pm25: Optional[float]
    longitude: float
    latitude: float
    temp_internal: Optional[float]
    temp_external: Optional[float]
    hum_internal: Optional[float]
    hum_external: Optional[float]


def _parse_cell(text: str) -> Cell:
    if text == "":
        return None
    try:
        value = float(text)
    except ValueError:
        return text
    # Textual "nan"/"inf" are treated as text, not numbers; missing is
    # spelled as the empty cell only.
    if not math.isfinite(value):
        return text
    return value


def parse_csv(text: str) -> RawTable:
    """Parse one CSV document. Errors carry 1-based line numbers."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input: no header line") from None
    names = tuple(h.strip() for h in header)
    if len(set(names)) != len(names):
        raise SchemaError("duplicate column name in header")
    if any(not n for n in names):
        raise SchemaError("empty column name in header")
    width = len(names)
    rows = []
    for lineno, raw in enumerate(reader, start=2):
        if not raw:
            continue
        if len(raw) != width:
            raise ParseError(
                f"line {lineno}: {len(raw)} cells vs {width} headers"
            )
        rows.append(tuple(_parse_cell(c) for c in raw))
    return RawTable(column_names=names, rows=tuple(rows))


def table_to_csv(table: RawTable) -> str:
    """Serialize a table; reparsing the output reproduces the table as
    long as text cells do not themselves look numeric. Reals print with
    shortest round-trip precision."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.column_names)
    for row in table.rows:
        writer.writerow(
            "" if c is None else (repr(float(c)) if isinstance(c, float) else c)
            for c in row
        )
    return buf.getvalue()


def _parse_timestamp(cell: Cell, where: str) -> int:
    if isinstance(cell, float):
        if not cell.is_integer():
            raise ParseError(f"{where}: fractional epoch timestamp {cell!r}")
        return int(cell)
    if isinstance(cell, str):
        text = cell.strip().replace("Z", "+00:00")
        try:
            dt = datetime.fromisoformat(text)
        except ValueError:
            raise ParseError(f"{where}: unparseable timestamp {cell!r}") from None
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return int(dt.timestamp())
    raise ParseError(f"{where}: missing timestamp")


def _numeric(cell: Cell, field: str, where: str, required: bool) -> Optional[float]:
    if cell is None:
        if required:
            raise IntegrityError(f"{where}: missing required value {field!r}")
        return None
    if isinstance(cell, str):
        raise ParseError(f"{where}: non-numeric {field!r} value {cell!r}")
    return float(cell)


def to_records(
    table: RawTable, schema: Mapping[str, str] = DEFAULT_SCHEMA
) -> list[SensorRecord]:
    """Bind table columns to record fields and return records sorted by
    (sensor_id, timestamp). Duplicate (sensor_id, timestamp) pairs are
    integrity errors, so per-sensor timestamps come out strictly
    increasing."""
    unknown = set(schema) - set(_REQUIRED_FIELDS) - set(_OPTIONAL_FIELDS)
    if unknown:
        raise SchemaError(f"unknown schema fields {sorted(unknown)!r}")
    missing = [f for f in _REQUIRED_FIELDS if f not in schema]
    if missing:
        raise SchemaError(f"schema lacks required fields {missing!r}")
    col_index: dict[str, int] = {}
    for field, col in schema.items():
        try:
            col_index[field] = table.column_names.index(col)
        except ValueError:
            raise SchemaError(
                f"schema maps {field!r} to absent column {col!r}"
            ) from None

    def cell(row: Sequence[Cell], field: str) -> Cell:
        j = col_index.get(field)
        return None if j is None else row[j]

    records = []
    for i, row in enumerate(table.rows):
        where = f"row {i}"
        sid = cell(row, "sensor_id")
        if not isinstance(sid, str):
            raise IntegrityError(f"{where}: sensor id must be text, got {sid!r}")
        ts = _parse_timestamp(cell(row, "timestamp"), where)
        lon = _numeric(cell(row, "longitude"), "longitude", where, required=True)
        lat = _numeric(cell(row, "latitude"), "latitude", where, required=True)
        if not -180.0 <= lon <= 180.0:
            raise IntegrityError(f"{where}: longitude {lon} outside [-180, 180]")
        if not -90.0 <= lat <= 90.0:
            raise IntegrityError(f"{where}: latitude {lat} outside [-90, 90]")
        channels = {
            f: _numeric(cell(row, f), f, where, required=False)
            for f in _OPTIONAL_FIELDS
        }
        for f in ("hum_internal", "hum_external"):
            v = channels[f]
            if v is not None and not 0.0 <= v <= 120.0:
                raise IntegrityError(f"{where}: {f} {v} outside [0, 120]")
        records.append(
            SensorRecord(
                sensor_id=sid,
                timestamp=ts,
                longitude=lon,
                latitude=lat,
                **channels,
            )
        )
    records.sort(key=lambda r: (r.sensor_id, r.timestamp))
    for a, b in zip(records, records[1:]):
        if a.sensor_id == b.sensor_id and a.timestamp == b.timestamp:
            raise IntegrityError(
                f"duplicate timestamp {b.timestamp} for sensor {b.sensor_id!r}"
            )
    return records


def group_by_sensor(records: Sequence[SensorRecord]) -> dict[str, list[SensorRecord]]:
    """Group time-sorted records per sensor; keys iterate in ascending
    sensor id."""
    grouped: dict[str, list[SensorRecord]] = {}
    for rec in sorted(records, key=lambda r: (r.sensor_id, r.timestamp)):
        grouped.setdefault(rec.sensor_id, []).append(rec)
    return grouped
