"""Power time series: data model, CSV ingestion, resampling, alignment and
ON/OFF state derivation.

Missing readings are stored as ``NaN`` inside float arrays. Timestamps are
UTC integer seconds; sample ``t`` of a series sits at ``start + t * interval``.
"""

from __future__ import annotations

import csv
import enum
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AlignmentError,
    DataError,
    DomainError,
    EmptyOverlapError,
    OrderingError,
    ParseError,
)

DEFAULT_ON_THRESHOLD = 15.0
CSV_HEADER = ("timestamp", "power_w")


class State(enum.IntEnum):
    MISSING = -1
    OFF = 0
    ON = 1


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PowerSeries:
    """Uniformly sampled power readings in watts.

    Parameters
    ----------
    start : int
        UTC timestamp (seconds) of the first sample.
    interval : int
        Sampling interval in seconds, strictly positive.
    values : array_like
        Readings; ``NaN`` marks a missing reading.
    """

    start: int
    interval: int
    values: np.ndarray

    def __post_init__(self):
        if int(self.interval) != self.interval or self.interval <= 0:
            raise DomainError(f"interval must be a positive integer, got {self.interval!r}")
        if int(self.start) != self.start:
            raise DomainError(f"start must be an integer timestamp, got {self.start!r}")
        values = _frozen_array(self.values)
        if values.ndim != 1 or values.size < 1:
            raise DomainError("a power series needs at least one sample")
        present = values[~np.isnan(values)]
        if np.any(~np.isfinite(present)) or np.any(present < 0):
            raise DomainError("power readings must be finite and non-negative")
        object.__setattr__(self, "start", int(self.start))
        object.__setattr__(self, "interval", int(self.interval))
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, PowerSeries):
            return NotImplemented
        return (
            self.start == other.start
            and self.interval == other.interval
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    __hash__ = None

    @property
    def end(self) -> int:
        """Exclusive end timestamp."""
        return self.start + len(self) * self.interval

    @property
    def timestamps(self) -> np.ndarray:
        return self.start + self.interval * np.arange(len(self), dtype=np.int64)

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    def window(self, t0: int, t1: int) -> "PowerSeries":
        """Samples whose timestamps fall in ``[t0, t1)``."""
        i0 = max(0, -(-(t0 - self.start) // self.interval))
        i1 = min(len(self), -(-(t1 - self.start) // self.interval))
        if i1 <= i0:
            raise EmptyOverlapError(f"window [{t0}, {t1}) does not intersect the series")
        return PowerSeries(self.start + i0 * self.interval, self.interval, self.values[i0:i1])

    def with_values(self, values) -> "PowerSeries":
        return PowerSeries(self.start, self.interval, values)


@dataclass(frozen=True, eq=False)
class Readings:
    """Irregular, strictly time-ordered readings as read from a file."""

    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ts = _frozen_array(self.timestamps, dtype=np.int64)
        vals = _frozen_array(self.values)
        if ts.shape != vals.shape or ts.ndim != 1:
            raise DomainError("timestamps and values must be 1-D and of equal length")
        if ts.size == 0:
            raise DomainError("at least one reading is required")
        if np.any(np.diff(ts) <= 0):
            raise OrderingError("timestamps must be strictly increasing")
        present = vals[~np.isnan(vals)]
        if np.any(~np.isfinite(present)) or np.any(present < 0):
            raise DomainError("power readings must be finite and non-negative")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.timestamps.size

    def inferred_interval(self) -> int:
        if len(self) < 2:
            raise DataError("cannot infer a sampling interval from a single reading")
        return max(1, int(round(float(np.median(np.diff(self.timestamps))))))


@dataclass(frozen=True)
class ApplianceTrace:
    appliance_id: str
    series: PowerSeries
    on_threshold: float = DEFAULT_ON_THRESHOLD

    def __post_init__(self):
        if not self.on_threshold > 0:
            raise DomainError(f"on_threshold must be > 0, got {self.on_threshold!r}")

    def states(self) -> np.ndarray:
        return derive_states(self)


@dataclass(frozen=True)
class HouseholdRecord:
    """One house: aggregate meter plus per-appliance ground truth."""

    house_id: str
    dataset_id: str
    aggregate: PowerSeries
    appliances: tuple[ApplianceTrace, ...]
    noise_floor: float | None = None

    def __post_init__(self):
        appliances = tuple(self.appliances)
        if not appliances:
            raise DomainError(f"house {self.house_id}: at least one appliance is required")
        ids = [a.appliance_id for a in appliances]
        if len(set(ids)) != len(ids):
            raise DomainError(f"house {self.house_id}: duplicate appliance ids {ids}")
        agg = self.aggregate
        for a in appliances:
            s = a.series
            if (s.start, s.interval, len(s)) != (agg.start, agg.interval, len(agg)):
                raise AlignmentError(
                    f"house {self.house_id}: appliance {a.appliance_id} is not aligned with the aggregate"
                )
        if self.noise_floor is not None and self.noise_floor < 0:
            raise DomainError("noise_floor must be >= 0")
        object.__setattr__(self, "appliances", appliances)

    @property
    def appliance_ids(self) -> list[str]:
        return [a.appliance_id for a in self.appliances]

    def appliance(self, appliance_id: str) -> ApplianceTrace:
        for a in self.appliances:
            if a.appliance_id == appliance_id:
                return a
        raise KeyError(appliance_id)

    def window(self, t0: int, t1: int) -> "HouseholdRecord":
        return HouseholdRecord(
            self.house_id,
            self.dataset_id,
            self.aggregate.window(t0, t1),
            tuple(
                ApplianceTrace(a.appliance_id, a.series.window(t0, t1), a.on_threshold)
                for a in self.appliances
            ),
            self.noise_floor,
        )


# --------------------------------------------------------------------------
# ingestion


def _parse_float(text: str, line: int, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"cannot parse {what} {text!r}", line) from None


def load_readings(path, columns: Sequence[str] = CSV_HEADER) -> Readings:
    """Read ``(timestamp, watts)`` rows from a CSV file.

    A header row naming ``columns`` is used to locate the two fields; without
    a header the first two columns are taken. Empty power fields and ``nan``
    mark missing readings.
    """
    path = Path(path)
    fast = _load_readings_fast(path, columns)
    if fast is not None:
        return fast
    ts_col, p_col = columns
    timestamps: list[int] = []
    values: list[float] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        idx = (0, 1)
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            cells = [c.strip() for c in row]
            if lineno == 1 and not _looks_numeric(cells[0]):
                try:
                    idx = (cells.index(ts_col), cells.index(p_col))
                except ValueError:
                    raise ParseError(f"header must contain {ts_col!r} and {p_col!r}", lineno) from None
                continue
            if len(cells) <= max(idx):
                raise ParseError(f"expected at least {max(idx) + 1} fields, got {len(cells)}", lineno)
            t = _parse_float(cells[idx[0]], lineno, "timestamp")
            if not math.isfinite(t) or t != int(t):
                raise ParseError(f"timestamp must be an integer, got {cells[idx[0]]!r}", lineno)
            raw = cells[idx[1]]
            p = math.nan if raw == "" else _parse_float(raw, lineno, "power")
            if not math.isnan(p):
                if not math.isfinite(p) or p < 0:
                    raise DomainError(f"{path.name}, line {lineno}: invalid power reading {raw!r}")
            if timestamps and int(t) <= timestamps[-1]:
                raise OrderingError(f"{path.name}, line {lineno}: timestamps must be strictly increasing")
            timestamps.append(int(t))
            values.append(p)
    if not timestamps:
        raise ParseError(f"{path.name}: no readings found")
    return Readings(np.array(timestamps, dtype=np.int64), np.array(values))


def _load_readings_fast(path: Path, columns: Sequence[str]) -> Readings | None:
    """Vectorised parse of well-formed files; ``None`` defers to the line-by-line parser."""
    try:
        with path.open(encoding="utf-8") as fh:
            first = fh.readline()
            cells = [c.strip() for c in first.split(",")]
            if not first.strip():
                return None
            if _looks_numeric(cells[0]):
                idx, skip = (0, 1), 0
            else:
                idx, skip = (cells.index(columns[0]), cells.index(columns[1])), 1
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            data = np.loadtxt(path, delimiter=",", skiprows=skip, usecols=idx, ndmin=2, encoding="utf-8")
    except (ValueError, IndexError, OSError):
        return None
    if data.shape[0] == 0:
        return None
    ts, vals = data[:, 0], data[:, 1]
    present = vals[~np.isnan(vals)]
    if (
        np.any(ts != np.round(ts))
        or np.any(np.diff(ts) <= 0)
        or np.any(~np.isfinite(present))
        or np.any(present < 0)
        or np.any(np.abs(ts) >= 2**53)
    ):
        return None
    return Readings(ts.astype(np.int64), vals)


def _looks_numeric(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_csv(path, columns: Sequence[str] = CSV_HEADER, interval: int | None = None) -> PowerSeries:
    """Load a CSV of readings and put it on a uniform grid.

    When ``interval`` is omitted it is inferred as the median spacing of the
    timestamps.
    """
    readings = load_readings(path, columns)
    if interval is None:
        interval = readings.inferred_interval()
    return resample(readings, interval)


def write_csv(series: PowerSeries, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        fh.writelines(
            f"{t},{'' if v != v else repr(v)}\n"
            for t, v in zip(series.timestamps.tolist(), series.values.tolist())
        )


# --------------------------------------------------------------------------
# resampling and alignment


def resample(series: PowerSeries | Readings, interval: int) -> PowerSeries:
    """Bucket-mean resampling onto a grid of multiples of ``interval``.

    Bucket ``k`` covers ``[k * interval, (k + 1) * interval)``. Buckets holding
    no present reading become missing. The output spans the buckets containing
    the first and the last reading. A ``PowerSeries`` already sampled at
    ``interval`` is returned unchanged.
    """
    if int(interval) != interval or interval <= 0:
        raise DomainError(f"interval must be a positive integer, got {interval!r}")
    interval = int(interval)
    if isinstance(series, PowerSeries):
        if series.interval == interval:
            return series
        ts, vals = series.timestamps, series.values
    else:
        ts, vals = series.timestamps, series.values
    bucket = ts // interval
    first = int(bucket[0])
    idx = bucket - first
    n = int(idx[-1]) + 1
    present = ~np.isnan(vals)
    counts = np.bincount(idx[present], minlength=n)
    sums = np.bincount(idx[present], weights=vals[present], minlength=n)
    out = np.full(n, np.nan)
    nz = counts > 0
    out[nz] = sums[nz] / counts[nz]
    return PowerSeries(first * interval, interval, out)


def align(a: PowerSeries, b: PowerSeries) -> tuple[PowerSeries, PowerSeries]:
    """Restrict two series to their common time range.

    A position missing in either input is missing in both outputs.
    """
    if a.interval != b.interval:
        raise AlignmentError(f"intervals differ: {a.interval} != {b.interval}")
    if (b.start - a.start) % a.interval:
        raise AlignmentError("sample grids are offset by a fraction of the interval")
    t0, t1 = max(a.start, b.start), min(a.end, b.end)
    if t1 <= t0:
        raise EmptyOverlapError("series do not overlap")
    va = a.window(t0, t1).values.copy()
    vb = b.window(t0, t1).values.copy()
    gap = np.isnan(va) | np.isnan(vb)
    va[gap] = np.nan
    vb[gap] = np.nan
    return PowerSeries(t0, a.interval, va), PowerSeries(t0, a.interval, vb)


def align_many(series: Iterable[PowerSeries]) -> list[PowerSeries]:
    """Common-range restriction of several series; missing values are not merged."""
    series = list(series)
    intervals = {s.interval for s in series}
    if len(intervals) != 1:
        raise AlignmentError(f"intervals differ: {sorted(intervals)}")
    ref = series[0]
    if any((s.start - ref.start) % ref.interval for s in series):
        raise AlignmentError("sample grids are offset by a fraction of the interval")
    t0 = max(s.start for s in series)
    t1 = min(s.end for s in series)
    if t1 <= t0:
        raise EmptyOverlapError("series do not overlap")
    return [s.window(t0, t1) for s in series]


# --------------------------------------------------------------------------
# states


def threshold_states(values, on_threshold: float) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    states = np.where(values >= on_threshold, State.ON, State.OFF).astype(np.int8)
    states[np.isnan(values)] = State.MISSING
    return states


def derive_states(trace: ApplianceTrace) -> np.ndarray:
    """ON/OFF/MISSING per sample as an ``int8`` array of :class:`State` codes."""
    return threshold_states(trace.series.values, trace.on_threshold)


# --------------------------------------------------------------------------
# household bundles


def load_household(directory, interval: int | None = None, thresholds: dict | None = None) -> HouseholdRecord:
    """Read a household bundle (``house.json`` + ``aggregate.csv`` + one CSV per appliance).

    Every series is resampled to ``interval`` (inferred from the aggregate
    when omitted) and cut to the common time range.
    """
    directory = Path(directory)
    manifest_path = directory / "house.json"
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"missing manifest {manifest_path}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{manifest_path}: {exc.msg}", exc.lineno) from None
    try:
        house_id = manifest["house_id"]
        entries = manifest["appliances"]
    except KeyError as exc:
        raise DataError(f"{manifest_path}: missing field {exc}") from None
    readings = load_readings(directory / "aggregate.csv")
    if interval is None:
        interval = readings.inferred_interval()
    agg = resample(readings, interval)
    apps = []
    for entry in entries:
        if isinstance(entry, str):
            entry = {"appliance_id": entry}
        app_id = entry["appliance_id"]
        threshold = entry.get("on_threshold", DEFAULT_ON_THRESHOLD)
        if thresholds and app_id in thresholds:
            threshold = thresholds[app_id]
        apps.append((app_id, threshold, load_csv(directory / f"{app_id}.csv", interval=interval)))
    aligned = align_many([agg] + [s for _, _, s in apps])
    return HouseholdRecord(
        house_id=house_id,
        dataset_id=manifest.get("dataset_id", ""),
        aggregate=aligned[0],
        appliances=tuple(
            ApplianceTrace(app_id, s, float(th)) for (app_id, th, _), s in zip(apps, aligned[1:])
        ),
        noise_floor=manifest.get("noise_floor"),
    )


def save_household(record: HouseholdRecord, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_csv(record.aggregate, directory / "aggregate.csv")
    for a in record.appliances:
        write_csv(a.series, directory / f"{a.appliance_id}.csv")
    manifest = {
        "house_id": record.house_id,
        "dataset_id": record.dataset_id,
        "appliances": [
            {"appliance_id": a.appliance_id, "on_threshold": a.on_threshold} for a in record.appliances
        ],
    }
    if record.noise_floor is not None:
        manifest["noise_floor"] = record.noise_floor
    (directory / "house.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return directory
