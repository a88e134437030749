"""
Hourly grid and price series: loading, normalization, alignment, CI checks.

Workflow:
1. load_generation_series / load_price_series: CSV -> hourly UTC records
   (provider files are mapped to the canonical schema by a SchemaAdapter)
2. align_series: inner join of one zone's grid and price hours
3. reconstruct_ci / validate_reported_ci: weighted-average carbon intensity
   from emission factors, compared against the reported value
4. aggregate_zones: several zones combined into one interconnected series
"""

import os
import json
import logging
from dataclasses import dataclass, field
import numpy as np
import pandas as pd
from core import settings
from core.errors import InputError

logger = logging.getLogger(__name__)

SOURCES = (
    "coal", "gas", "oil", "biomass", "solar", "geothermal",
    "wind", "hydro", "battery_discharge", "import",
)
GENERATION_COLUMNS = ("timestamp", "zone", *SOURCES, "reported_ci")
PRICE_COLUMNS = ("timestamp", "zone", "price_aud_per_mwh")

DEFAULT_EMISSION_FACTORS = {"coal": 820.0, "gas": 490.0, "oil": 650.0, "biomass": 230.0}

# Unit -> (factor to MW or MWh, is_power)
UNITS = {
    "MW": (1.0, True),
    "kW": (1e-3, True),
    "GW": (1e3, True),
    "MWh": (1.0, False),
    "kWh": (1e-3, False),
    "GWh": (1e3, False),
}


# ============================================================
# Domain types
# ============================================================
@dataclass(frozen=True)
class HourlyGridRecord:
    timestamp: pd.Timestamp
    zone: str
    generation: dict = field(default_factory=dict)  # source -> MWh
    reported_ci: float | None = None  # g CO2eq/kWh

    @property
    def total_generation(self) -> float:
        return float(sum(self.generation.values()))

    def shares(self, sources=SOURCES) -> np.ndarray:
        total = self.total_generation
        if total <= 0:
            raise InputError(f"zero total generation at {self.timestamp.isoformat()} ({self.zone})")
        return np.array([self.generation.get(s, 0.0) for s in sources]) / total


@dataclass(frozen=True)
class HourlyPriceRecord:
    timestamp: pd.Timestamp
    zone: str
    price: float  # AUD/MWh


@dataclass(frozen=True)
class AlignedRecord(HourlyGridRecord):
    price: float = 0.0


@dataclass(frozen=True)
class CoverageStats:
    grid_hours: int
    price_hours: int
    aligned_hours: int

    @property
    def dropped_grid(self) -> int:
        return self.grid_hours - self.aligned_hours

    @property
    def dropped_price(self) -> int:
        return self.price_hours - self.aligned_hours


@dataclass(frozen=True)
class AlignedSeries:
    zone: str
    records: tuple[AlignedRecord, ...]
    coverage: CoverageStats
    zone_coverage: dict[str, CoverageStats] = field(default_factory=dict)  # aggregated series only

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def timestamps(self) -> list[pd.Timestamp]:
        return [r.timestamp for r in self.records]

    @property
    def prices(self) -> np.ndarray:
        return np.array([r.price for r in self.records])

    def share_matrix(self, sources=SOURCES) -> np.ndarray:
        """(n_hours, n_sources) generation shares; raises on zero-generation hours."""
        return np.vstack([r.shares(sources) for r in self.records]) if self.records else np.zeros((0, len(sources)))

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {
                "timestamp": r.timestamp,
                "zone": r.zone,
                **{s: r.generation.get(s, 0.0) for s in SOURCES},
                "reported_ci": r.reported_ci,
                "price_aud_per_mwh": r.price,
            }
            for r in self.records
        ]
        return pd.DataFrame(rows, columns=[*GENERATION_COLUMNS, "price_aud_per_mwh"])


@dataclass(frozen=True)
class EmissionFactorTable:
    factors: dict = field(default_factory=dict)  # source -> g CO2eq/kWh

    def __post_init__(self):
        unknown = sorted(set(self.factors) - set(SOURCES))
        if unknown:
            raise InputError(f"emission factors for unknown sources: {', '.join(unknown)}")
        negative = sorted(s for s, v in self.factors.items() if v < 0)
        if negative:
            raise InputError(f"negative emission factors for: {', '.join(negative)}")
        # Sources not listed are explicitly zero
        object.__setattr__(self, "factors", {s: float(self.factors.get(s, 0.0)) for s in SOURCES})

    @classmethod
    def default(cls) -> "EmissionFactorTable":
        return cls(dict(DEFAULT_EMISSION_FACTORS))

    def factor(self, source: str) -> float:
        return self.factors[source]

    def vector(self, sources=SOURCES) -> np.ndarray:
        return np.array([self.factors[s] for s in sources])


@dataclass(frozen=True)
class SchemaAdapter:
    """
    How a provider file maps to the canonical schema.

    columns: provider column -> canonical column
    units: canonical column -> unit (MW, kW, GW, MWh, kWh, GWh)
    aggregation: "auto" (power and price mean, energy sum), "mean" or "sum"
    unknown_sources: "reject" or "drop"
    """

    name: str = "canonical"
    columns: dict = field(default_factory=dict)
    units: dict = field(default_factory=dict)
    timezone: str = "UTC"
    zone: str | None = None
    aggregation: str = "auto"
    unknown_sources: str = "reject"

    def __post_init__(self):
        if self.aggregation not in ("auto", "mean", "sum"):
            raise InputError(f"adapter '{self.name}': unknown aggregation '{self.aggregation}'")
        if self.unknown_sources not in ("reject", "drop"):
            raise InputError(f"adapter '{self.name}': unknown_sources must be 'reject' or 'drop'")
        for column, unit in self.units.items():
            if unit not in UNITS:
                raise InputError(
                    f"adapter '{self.name}': ambiguous unit '{unit}' for column '{column}' "
                    f"(expected one of {', '.join(UNITS)})"
                )

    @classmethod
    def from_dict(cls, data: dict) -> "SchemaAdapter":
        known = {"name", "columns", "units", "timezone", "zone", "aggregation", "unknown_sources"}
        extra = sorted(set(data) - known)
        if extra:
            raise InputError(f"unknown adapter keys: {', '.join(extra)}")
        return cls(**data)


CANONICAL = SchemaAdapter()


def load_adapter(path: str) -> SchemaAdapter:
    """Read a provider adapter from a JSON mapping file."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise InputError(f"adapter {os.path.basename(path)}: invalid JSON ({e})") from e
    data.setdefault("name", os.path.splitext(os.path.basename(path))[0])
    return SchemaAdapter.from_dict(data)


def load_emission_factors(path) -> EmissionFactorTable:
    """Emission-factor CSV with header `source,factor_g_per_kwh`; unlisted sources are zero."""
    frame = _read_csv(path)
    _require_columns(frame, ("source", "factor_g_per_kwh"), path)
    values = _numeric(frame, "factor_g_per_kwh")
    return EmissionFactorTable(dict(zip(frame["source"].str.strip(), values)))


# ============================================================
# Parsing helpers
# ============================================================
def _label(path) -> str:
    return os.path.basename(path) if isinstance(path, str) else getattr(path, "name", "upload")


def _read_csv(path) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InputError(f"{_label(path)}: unreadable CSV ({e})") from e
    frame.columns = [c.strip() for c in frame.columns]
    return frame


def _require_columns(frame: pd.DataFrame, required, path):
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise InputError(f"{_label(path)}: missing column(s) {', '.join(missing)}")


def _numeric(frame: pd.DataFrame, column: str, allow_blank: bool = False) -> pd.Series:
    raw = frame[column].astype(str).str.strip()
    values = pd.to_numeric(raw.replace("", np.nan), errors="coerce")
    bad = values.isna() & ((raw != "") | (not allow_blank))
    if bad.any():
        idx = _first_bad(bad)
        raise InputError(f"malformed value {raw.iloc[idx]!r} in column '{column}'", line=idx + 2)
    return values


def _first_bad(mask: pd.Series) -> int:
    return int(np.flatnonzero(mask.to_numpy())[0])


def _timestamps(frame: pd.DataFrame, timezone: str) -> pd.Series:
    """ISO-8601 strings -> UTC timestamps; naive values are read in the adapter timezone."""
    raw = frame["timestamp"].astype(str).str.strip()
    aware = raw.str.contains(r"(?:Z|[+-]\d{2}:?\d{2})$", regex=True)
    if aware.any() and not aware.all():
        idx = _first_bad(~aware) if aware.iloc[0] else _first_bad(aware)
        raise InputError(f"timestamp {raw.iloc[idx]!r} mixes offset and naive formats", line=idx + 2)

    parsed = pd.to_datetime(raw, errors="coerce", format="ISO8601", utc=bool(aware.all()))
    if parsed.isna().any():
        idx = _first_bad(parsed.isna())
        raise InputError(f"malformed timestamp {raw.iloc[idx]!r}", line=idx + 2)

    if parsed.dt.tz is None:
        parsed = parsed.dt.tz_localize(timezone, ambiguous="NaT", nonexistent="NaT")
        if parsed.isna().any():
            idx = _first_bad(parsed.isna())
            raise InputError(f"timestamp {raw.iloc[idx]!r} is ambiguous or missing in {timezone}", line=idx + 2)
    return parsed.dt.tz_convert("UTC")


def _normalize(path, adapter: SchemaAdapter) -> pd.DataFrame:
    """Read, rename and timestamp a file; returns a frame with a `line` column."""
    frame = _read_csv(path)
    frame = frame.rename(columns=adapter.columns)
    if adapter.zone is not None:
        frame["zone"] = adapter.zone
    _require_columns(frame, ("timestamp", "zone"), path)

    frame["line"] = np.arange(len(frame)) + 2
    frame["timestamp"] = _timestamps(frame, adapter.timezone)
    frame["zone"] = frame["zone"].astype(str).str.strip()

    duplicated = frame.duplicated(subset=["zone", "timestamp"], keep="first")
    if duplicated.any():
        row = frame[duplicated].iloc[0]
        raise InputError(
            f"duplicate interval for zone {row['zone']} at {row['timestamp'].isoformat()}",
            line=int(row["line"]),
        )
    return frame


def _to_hourly(frame: pd.DataFrame, rules: dict) -> pd.DataFrame:
    frame = frame.assign(timestamp=frame["timestamp"].dt.floor("h"))
    hourly = frame.groupby(["zone", "timestamp"], sort=True).agg(rules)
    return hourly.reset_index()


# ============================================================
# Loading
# ============================================================
def load_generation_series(path, adapter: SchemaAdapter | None = None) -> list[HourlyGridRecord]:
    """
    Load an hourly (or finer) generation file as canonical hourly records.

    Args:
        path: CSV path or file-like object
        adapter: Provider mapping (default: canonical schema, MWh, UTC)

    Returns:
        Records sorted by zone then timestamp

    Raises:
        InputError: malformed row (line-reported), ambiguous unit, unknown
            source, duplicate (zone, timestamp)
    """
    adapter = adapter or CANONICAL
    frame = _normalize(path, adapter)

    extra = [c for c in frame.columns if c not in (*GENERATION_COLUMNS, "line")]
    if extra:
        if adapter.unknown_sources == "reject":
            raise InputError(f"{_label(path)}: unknown source column(s) {', '.join(extra)}")
        logger.warning("Dropping unknown source columns from %s: %s", _label(path), ", ".join(extra))
        frame = frame.drop(columns=extra)

    rules = {}
    for source in SOURCES:
        if source not in frame.columns:
            logger.debug("%s: no '%s' column, treated as zero", _label(path), source)
            frame[source] = 0.0
            rules[source] = "sum"
            continue
        values = _numeric(frame, source)
        negative = values < 0
        if negative.any():
            idx = _first_bad(negative)
            raise InputError(f"negative {source} generation {values.iloc[idx]}", line=idx + 2)
        factor, is_power = UNITS[adapter.units.get(source, "MWh")]
        frame[source] = values * factor
        if adapter.aggregation == "auto":
            rules[source] = "mean" if is_power else "sum"
        else:
            rules[source] = adapter.aggregation

    if "reported_ci" in frame.columns:
        frame["reported_ci"] = _numeric(frame, "reported_ci", allow_blank=True)
    else:
        frame["reported_ci"] = np.nan
    rules["reported_ci"] = "mean"

    hourly = _to_hourly(frame, rules)
    records = [
        HourlyGridRecord(
            timestamp=row["timestamp"],
            zone=row["zone"],
            generation={s: float(row[s]) for s in SOURCES},
            reported_ci=None if pd.isna(row["reported_ci"]) else float(row["reported_ci"]),
        )
        # "import" is a keyword, so rows are read as dicts rather than namedtuples
        for row in hourly.to_dict("records")
    ]
    logger.info("Loaded %d hourly generation records from %s", len(records), _label(path))
    return records


def load_price_series(path, adapter: SchemaAdapter | None = None, max_gap_hours: float | None = None) -> list[HourlyPriceRecord]:
    """
    Load a spot-price file and average it to one record per (zone, hour).

    Args:
        path: CSV path or file-like object
        adapter: Provider mapping (default: canonical schema, UTC)
        max_gap_hours: Largest tolerated run of missing hours (default: settings)

    Returns:
        Records sorted by zone then timestamp; negative prices preserved
    """
    adapter = adapter or CANONICAL
    if max_gap_hours is None:
        max_gap_hours = settings.MAX_PRICE_GAP_HOURS

    frame = _normalize(path, adapter)
    _require_columns(frame, ("price_aud_per_mwh",), path)
    frame["price_aud_per_mwh"] = _numeric(frame, "price_aud_per_mwh")

    rule = "sum" if adapter.aggregation == "sum" else "mean"
    hourly = _to_hourly(frame, {"price_aud_per_mwh": rule})

    if max_gap_hours is not None:
        for zone, group in hourly.groupby("zone", sort=True):
            stamps = group["timestamp"].reset_index(drop=True)
            missing = stamps.diff().dt.total_seconds().div(3600).sub(1)
            over = np.flatnonzero((missing > max_gap_hours).to_numpy())
            if over.size:
                k = int(over[0])
                raise InputError(
                    f"{_label(path)}: gap of {int(missing.iloc[k])} hours in zone {zone} between "
                    f"{stamps.iloc[k - 1].isoformat()} and {stamps.iloc[k].isoformat()} "
                    f"exceeds max-gap {max_gap_hours:g}h"
                )

    records = [
        HourlyPriceRecord(row.timestamp, row.zone, float(row.price_aud_per_mwh))
        for row in hourly.itertuples(index=False)
    ]
    logger.info("Loaded %d hourly price records from %s", len(records), _label(path))
    return records


# ============================================================
# Alignment
# ============================================================
def _single_zone(records, zone: str | None, label: str) -> tuple[str, list]:
    if zone is not None:
        records = [r for r in records if r.zone == zone]
    zones = sorted({r.zone for r in records})
    if len(zones) > 1:
        raise InputError(f"{label} series has several zones ({', '.join(zones)}); choose one")
    return (zones[0] if zones else zone or ""), records


def align_series(grid, price, zone: str | None = None) -> AlignedSeries:
    """
    Inner-join grid and price records of one zone on the hour.

    Args:
        grid: HourlyGridRecord list
        price: HourlyPriceRecord list
        zone: Zone to select when the inputs hold several

    Returns:
        AlignedSeries with coverage stats of dropped hours

    Raises:
        InputError: zone mismatch or empty intersection
    """
    grid_zone, grid = _single_zone(grid, zone, "grid")
    price_zone, price = _single_zone(price, zone, "price")
    if grid and price and grid_zone != price_zone:
        raise InputError(f"zone mismatch: grid '{grid_zone}', price '{price_zone}'")

    prices = {r.timestamp: r.price for r in price}
    records = tuple(
        AlignedRecord(
            timestamp=g.timestamp,
            zone=g.zone,
            generation=g.generation,
            reported_ci=g.reported_ci,
            price=prices[g.timestamp],
        )
        for g in sorted(grid, key=lambda r: r.timestamp)
        if g.timestamp in prices
    )
    if not records:
        raise InputError(f"no overlapping hours between grid and price series for zone '{grid_zone or price_zone}'")

    coverage = CoverageStats(len(grid), len(prices), len(records))
    if coverage.dropped_grid or coverage.dropped_price:
        logger.warning(
            "Zone %s: dropped %d grid hours and %d price hours at alignment",
            grid_zone, coverage.dropped_grid, coverage.dropped_price,
        )
    return AlignedSeries(grid_zone, records, coverage)


def aggregate_zones(series_list, zone: str = "NEM") -> AlignedSeries:
    """
    Combine several zones into one interconnected series.

    Generation is summed per source; reported CI and price are
    generation-weighted (CI only when every zone reports it). Coverage
    counts the hours any zone covers against the common hours, and
    zone_coverage holds the same check for each zone.
    """
    if not series_list:
        raise InputError("no zones to aggregate")

    common = set(series_list[0].timestamps)
    for series in series_list[1:]:
        common &= set(series.timestamps)
    if not common:
        raise InputError("zones share no hours")

    by_time = [{r.timestamp: r for r in s.records} for s in series_list]
    records = []
    for ts in sorted(common):
        parts = [lookup[ts] for lookup in by_time]
        weights = np.array([p.total_generation for p in parts])
        total = weights.sum()
        if total <= 0:
            raise InputError(f"zero total generation at {ts.isoformat()} across zones")
        generation = {s: float(sum(p.generation.get(s, 0.0) for p in parts)) for s in SOURCES}
        ci = None
        if all(p.reported_ci is not None for p in parts):
            ci = float(np.dot(weights, [p.reported_ci for p in parts]) / total)
        price = float(np.dot(weights, [p.price for p in parts]) / total)
        records.append(AlignedRecord(ts, zone, generation, ci, price))

    zone_coverage = {}
    for series in series_list:
        zone_coverage[series.zone] = CoverageStats(
            series.coverage.grid_hours, series.coverage.price_hours, len(records),
        )
        if len(series) > len(records):
            logger.warning(
                "Zone %s: %d of %d aligned hours fall outside the common period",
                series.zone, len(series) - len(records), len(series),
            )

    any_zone = set().union(*(s.timestamps for s in series_list))
    coverage = CoverageStats(len(any_zone), len(any_zone), len(records))
    logger.info("Aggregated %d zones into %s: %d common hours", len(series_list), zone, len(records))
    return AlignedSeries(zone, tuple(records), coverage, zone_coverage)


# ============================================================
# Carbon intensity
# ============================================================
@dataclass(frozen=True)
class CIDeviation:
    timestamp: pd.Timestamp
    reconstructed: float
    reported: float

    @property
    def deviation(self) -> float:
        return abs(self.reconstructed - self.reported)


@dataclass(frozen=True)
class CIValidationReport:
    deviations: tuple[CIDeviation, ...]
    tolerance: float

    @property
    def flagged(self) -> tuple[CIDeviation, ...]:
        return tuple(d for d in self.deviations if d.deviation > self.tolerance)

    @property
    def max_deviation(self) -> float:
        return max((d.deviation for d in self.deviations), default=0.0)

    @property
    def mean_deviation(self) -> float:
        return float(np.mean([d.deviation for d in self.deviations])) if self.deviations else 0.0

    @property
    def ok(self) -> bool:
        return not self.flagged

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                (d.timestamp, d.reconstructed, d.reported, d.deviation, d.deviation > self.tolerance)
                for d in self.deviations
            ],
            columns=["timestamp", "reconstructed_ci", "reported_ci", "deviation", "flagged"],
        )


def reconstruct_ci(record: HourlyGridRecord, ef: EmissionFactorTable) -> float:
    """
    Generation-weighted carbon intensity of one hour (g CO2eq/kWh).

    Raises:
        InputError: zero total generation
    """
    total = record.total_generation
    if total <= 0:
        raise InputError(f"zero total generation at {record.timestamp.isoformat()} ({record.zone})")
    return sum(gen * ef.factor(s) for s, gen in record.generation.items()) / total


def reconstruct_ci_series(series, ef: EmissionFactorTable) -> np.ndarray:
    return np.array([reconstruct_ci(r, ef) for r in series])


def validate_reported_ci(series, ef: EmissionFactorTable, tol: float | None = None) -> CIValidationReport:
    """
    Compare reconstructed against reported CI hour by hour.

    Hours without a reported value are skipped. Hours whose absolute
    deviation exceeds tol are flagged in the report.
    """
    tol = settings.CI_TOLERANCE if tol is None else tol
    deviations = []
    skipped = 0
    for record in series:
        if record.reported_ci is None:
            skipped += 1
            continue
        deviations.append(CIDeviation(record.timestamp, reconstruct_ci(record, ef), record.reported_ci))

    report = CIValidationReport(tuple(deviations), tol)
    if skipped:
        logger.info("CI validation skipped %d hours without reported CI", skipped)
    if report.flagged:
        logger.warning(
            "%d of %d hours deviate by more than %.3g g/kWh (max %.3f)",
            len(report.flagged), len(deviations), tol, report.max_deviation,
        )
    return report
