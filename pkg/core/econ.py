"""
Costs, credits, monthly/yearly aggregation and plot-data export.

- cost_per_kg: price (AUD/MWh) -> AUD per kg H2, electricity plus operating cost
- aggregate_monthly: calendar months in UTC
- build_comparison: one yearly row per (zone, scenario), totals summed from months
  (operating cost is op_cost x kg when econ params are given)
- export_outputs / export_histograms: stable CSV/JSON tables for plotting
"""

import os
import json
import logging
import math
from dataclasses import dataclass, field, asdict
import numpy as np
import pandas as pd
from core import settings
from core.errors import InputError

logger = logging.getLogger(__name__)

SCENARIO_ORDER = ("baseline", "green-rule", "credit-threshold")

DISPATCH_COLUMNS = [
    "timestamp", "rate_kg_h", "energy_kwh", "emissions_kg",
    "elec_cost_aud", "op_cost_aud", "credit_aud", "eligible",
]
MONTHLY_COLUMNS = [
    "zone", "scenario", "month", "h2_t", "emissions_t", "elec_cost_aud",
    "op_cost_aud", "credits_aud", "avg_cost_per_kg", "ci_ratio",
]
COMPARISON_COLUMNS = [
    "zone", "scenario", "elec_cost_aud", "op_cost_aud", "total_cost_aud", "credits_aud",
    "net_cost_aud", "h2_t", "cost_per_kg", "emissions_t", "ci_ratio",
]
HISTOGRAM_COLUMNS = ["bin_start", "bin_end", "count", "density"]


# ============================================================
# Domain types
# ============================================================
@dataclass(frozen=True)
class EconParams:
    specific_energy: float = field(default_factory=lambda: settings.SPECIFIC_ENERGY)  # kWh/kg
    op_cost: float = field(default_factory=lambda: settings.OP_COST)  # AUD/kg
    credit_rate: float = field(default_factory=lambda: settings.CREDIT_RATE)  # AUD/kg
    credit_ci_cap: float = field(default_factory=lambda: settings.CREDIT_CI_CAP)  # kg CO2eq/kg

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value < 0:
                raise InputError(f"econ parameter {name} must be >= 0, got {value}")


@dataclass(frozen=True)
class MonthlyAggregate:
    zone: str
    month: str  # YYYY-MM
    h2_kg: float
    emissions_kg: float
    elec_cost: float
    op_cost: float
    credits: float
    scenario: str = ""

    @property
    def h2_t(self) -> float:
        return self.h2_kg / 1000.0

    @property
    def emissions_t(self) -> float:
        return self.emissions_kg / 1000.0

    @property
    def avg_cost_per_kg(self) -> float | None:
        return (self.elec_cost + self.op_cost) / self.h2_kg if self.h2_kg > 0 else None

    @property
    def ci_ratio(self) -> float | None:
        return self.emissions_kg / self.h2_kg if self.h2_kg > 0 else None


@dataclass(frozen=True)
class ComparisonRow:
    zone: str
    scenario: str
    elec_cost: float
    op_cost: float
    credits: float
    h2_kg: float
    emissions_kg: float

    @property
    def total_cost(self) -> float:
        """Electricity plus operating cost; credits are reported separately."""
        return self.elec_cost + self.op_cost

    @property
    def net_cost(self) -> float:
        return self.total_cost - self.credits

    @property
    def h2_t(self) -> float:
        return self.h2_kg / 1000.0

    @property
    def emissions_t(self) -> float:
        return self.emissions_kg / 1000.0

    @property
    def cost_per_kg(self) -> float | None:
        return self.total_cost / self.h2_kg if self.h2_kg > 0 else None

    @property
    def ci_ratio(self) -> float | None:
        return self.emissions_kg / self.h2_kg if self.h2_kg > 0 else None


# ============================================================
# Formulas
# ============================================================
def cost_per_kg(price: float, econ: EconParams) -> float:
    """AUD per kg H2: price/1000 x specific_energy + op_cost (negative prices allowed)."""
    return price / 1000.0 * econ.specific_energy + econ.op_cost


def parse_econ(text: str) -> EconParams:
    """Key/value econ file (specific_energy, op_cost, credit_rate, credit_ci_cap); missing keys use settings."""
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep or key not in EconParams.__dataclass_fields__:
            raise InputError(f"econ: expected one of {', '.join(EconParams.__dataclass_fields__)} = value", line=line_no)
        try:
            values[key] = float(value)
        except ValueError:
            raise InputError(f"econ: '{key}' must be a number, got {value!r}", line=line_no) from None
    return EconParams(**values)


def load_econ(path: str) -> EconParams:
    with open(path, "r", encoding="utf-8") as f:
        return parse_econ(f.read())


def credit_earnings(dispatch, econ: EconParams) -> float:
    """Sum of rate x credit_rate over credit-eligible hours."""
    return float(sum(d.rate * econ.credit_rate for d in dispatch if d.credit_eligible))


def operating_cost_total(dispatch, econ: EconParams) -> float:
    """op_cost x total kg produced."""
    return econ.op_cost * math.fsum(d.rate for d in dispatch)


def dispatch_frame(dispatch) -> pd.DataFrame:
    """Dispatch records in the stable export column order."""
    rows = [
        (
            d.timestamp.isoformat(), d.rate, d.energy, d.emissions,
            d.electricity_cost, d.operating_cost, d.credit, int(d.credit_eligible),
        )
        for d in dispatch
    ]
    return pd.DataFrame(rows, columns=DISPATCH_COLUMNS)


# ============================================================
# Aggregation
# ============================================================
def aggregate_monthly(dispatch, zone: str, scenario: str = "", econ: EconParams | None = None) -> list[MonthlyAggregate]:
    """
    Group dispatch records by calendar month (UTC).

    Args:
        dispatch: HourlyDispatch list sorted by time
        zone: Zone label carried on each aggregate
        scenario: Scenario label carried on each aggregate
        econ: When given, the operating cost is econ.op_cost x the month's kg;
            otherwise the hourly operating costs are summed

    Returns:
        One MonthlyAggregate per month present, in month order
    """
    if not dispatch:
        return []

    frame = pd.DataFrame({
        "timestamp": pd.DatetimeIndex([d.timestamp for d in dispatch]),
        "rate": [d.rate for d in dispatch],
        "emissions": [d.emissions for d in dispatch],
        "elec_cost": [d.electricity_cost for d in dispatch],
        "op_cost": [d.operating_cost for d in dispatch],
        "credit": [d.credit for d in dispatch],
    })
    stamps = frame["timestamp"]
    if stamps.dt.tz is not None:
        stamps = stamps.dt.tz_convert("UTC")
    frame["month"] = stamps.dt.strftime("%Y-%m")

    grouped = frame.groupby("month", sort=True)[["rate", "emissions", "elec_cost", "op_cost", "credit"]].sum()
    return [
        MonthlyAggregate(
            zone=zone,
            month=month,
            h2_kg=float(row["rate"]),
            emissions_kg=float(row["emissions"]),
            elec_cost=float(row["elec_cost"]),
            op_cost=econ.op_cost * float(row["rate"]) if econ is not None else float(row["op_cost"]),
            credits=float(row["credit"]),
            scenario=scenario,
        )
        for month, row in grouped.iterrows()
    ]


def _scenario_key(name: str) -> tuple[int, str]:
    return (SCENARIO_ORDER.index(name) if name in SCENARIO_ORDER else len(SCENARIO_ORDER), name)


def run_order(results: dict) -> list[tuple[str, str]]:
    """(zone, scenario) keys zone-major, scenarios in baseline, green-rule, credit-threshold order."""
    return sorted(results, key=lambda k: (k[0], _scenario_key(k[1])))


def monthly_for_runs(results: dict, econ: EconParams | None = None) -> list[MonthlyAggregate]:
    """Monthly aggregates of every run, in run_order."""
    return [
        month
        for zone, scenario in run_order(results)
        for month in aggregate_monthly(results[(zone, scenario)], zone, scenario, econ)
    ]


def build_comparison(results: dict, econ: EconParams | None = None) -> list[ComparisonRow]:
    """
    Yearly comparison table across (zone, scenario) runs.

    Args:
        results: Mapping (zone, scenario) -> HourlyDispatch list
        econ: When given, the yearly operating cost is econ.op_cost x the year's kg

    Returns:
        One ComparisonRow per run, zone-major; other yearly totals are sums of the monthly aggregates

    Raises:
        InputError: runs cover different periods
    """
    coverage = {
        key: (len(d), d[0].timestamp, d[-1].timestamp) if d else (0, None, None)
        for key, d in results.items()
    }
    if len(set(coverage.values())) > 1:
        detail = "; ".join(f"{z}/{s}: {c[0]} h" for (z, s), c in sorted(coverage.items()))
        raise InputError(f"mismatched coverage periods across runs ({detail})")

    rows = []
    for zone, scenario in run_order(results):
        months = aggregate_monthly(results[(zone, scenario)], zone, scenario, econ)
        h2_kg = math.fsum(m.h2_kg for m in months)
        rows.append(ComparisonRow(
            zone=zone,
            scenario=scenario,
            elec_cost=math.fsum(m.elec_cost for m in months),
            op_cost=econ.op_cost * h2_kg if econ is not None else math.fsum(m.op_cost for m in months),
            credits=math.fsum(m.credits for m in months),
            h2_kg=h2_kg,
            emissions_kg=math.fsum(m.emissions_kg for m in months),
        ))
    return rows


# ============================================================
# Tables and export
# ============================================================
def monthly_frame(aggregates) -> pd.DataFrame:
    rows = [
        (
            m.zone, m.scenario, m.month, m.h2_t, m.emissions_t, m.elec_cost,
            m.op_cost, m.credits, m.avg_cost_per_kg, m.ci_ratio,
        )
        for m in aggregates
    ]
    return pd.DataFrame(rows, columns=MONTHLY_COLUMNS).astype({"avg_cost_per_kg": float, "ci_ratio": float})


def comparison_frame(rows) -> pd.DataFrame:
    data = [
        (
            r.zone, r.scenario, r.elec_cost, r.op_cost, r.total_cost, r.credits,
            r.net_cost, r.h2_t, r.cost_per_kg, r.emissions_t, r.ci_ratio,
        )
        for r in rows
    ]
    return pd.DataFrame(data, columns=COMPARISON_COLUMNS).astype({"cost_per_kg": float, "ci_ratio": float})


def histogram_frame(values, bin_width: float) -> pd.DataFrame:
    """
    Fixed-width histogram with bins aligned to multiples of bin_width.

    density integrates to 1 over the occupied range.
    """
    if bin_width <= 0:
        raise InputError(f"bin width must be positive, got {bin_width}")
    values = np.asarray(values, dtype=np.float64)
    values = values[np.isfinite(values)]
    if values.size == 0:
        return pd.DataFrame(columns=HISTOGRAM_COLUMNS)

    start = math.floor(values.min() / bin_width) * bin_width
    n_bins = max(1, math.floor((values.max() - start) / bin_width) + 1)
    edges = start + bin_width * np.arange(n_bins + 1)
    counts, _ = np.histogram(values, bins=edges)
    return pd.DataFrame({
        "bin_start": edges[:-1],
        "bin_end": edges[1:],
        "count": counts,
        "density": counts / (values.size * bin_width),
    }, columns=HISTOGRAM_COLUMNS)


def write_frame(frame: pd.DataFrame, path: str, fmt: str) -> str:
    """Write a table as CSV (empty cell for undefined values) or JSON records (null)."""
    if fmt == "csv":
        frame.to_csv(path, index=False, na_rep="", float_format="%.10g", lineterminator="\n")
    elif fmt == "json":
        records = json.loads(frame.to_json(orient="records", double_precision=10))
        with open(path, "w", encoding="utf-8") as f:
            json.dump(records, f, indent=2)
            f.write("\n")
    else:
        raise InputError(f"unknown output format '{fmt}' (expected csv or json)")
    return path


def export_outputs(aggregates, comparison, fmt: str, path: str, dispatch: dict | None = None) -> list[str]:
    """
    Write monthly and comparison tables (and per-run dispatch tables) into a directory.

    Args:
        aggregates: MonthlyAggregate list
        comparison: ComparisonRow list
        fmt: "csv" or "json"
        path: Output directory (created if missing)
        dispatch: Optional mapping (zone, scenario) -> HourlyDispatch list

    Returns:
        Paths written, in a stable order
    """
    try:
        os.makedirs(path, exist_ok=True)
        written = [
            write_frame(monthly_frame(aggregates), os.path.join(path, f"monthly.{fmt}"), fmt),
            write_frame(comparison_frame(comparison), os.path.join(path, f"comparison.{fmt}"), fmt),
        ]
        for (zone, scenario), records in sorted((dispatch or {}).items()):
            name = f"dispatch_{zone}_{scenario}.{fmt}"
            written.append(write_frame(dispatch_frame(records), os.path.join(path, name), fmt))
    except OSError as e:
        raise InputError(f"cannot write outputs to {path}: {e}") from e
    logger.info("Wrote %d output files to %s", len(written), path)
    return written


def export_histograms(ci_values, prices, fmt: str, path: str, zone: str = "",
                      ci_bin_width: float | None = None, price_bin_width: float | None = None) -> list[str]:
    """CI (g/kWh) and price (AUD/MWh) histograms, bin widths defaulting to settings."""
    ci_bin_width = settings.CI_BIN_WIDTH if ci_bin_width is None else ci_bin_width
    price_bin_width = settings.PRICE_BIN_WIDTH if price_bin_width is None else price_bin_width
    suffix = f"_{zone}" if zone else ""
    try:
        os.makedirs(path, exist_ok=True)
        return [
            write_frame(histogram_frame(ci_values, ci_bin_width), os.path.join(path, f"hist_ci{suffix}.{fmt}"), fmt),
            write_frame(histogram_frame(prices, price_bin_width), os.path.join(path, f"hist_price{suffix}.{fmt}"), fmt),
        ]
    except OSError as e:
        raise InputError(f"cannot write histograms to {path}: {e}") from e
