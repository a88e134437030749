"""
Hydrogen production scenarios over an aligned hourly series.

Scenarios:
- baseline:          max_rate every hour
- green-rule:        rate looked up from a CI -> rate step function
- credit-threshold:  max_rate only when CI per kg is within the credit cap

Per-hour emissions come from the LCA solve against that hour's generation
mix (see core.grid_lca); costs and credits follow core.econ.
"""

import os
import bisect
import logging
from dataclasses import dataclass, field
import numpy as np
import pandas as pd
from core import settings
from core.errors import InputError
from core.econ import EconParams
from core.esn import steady_state_lca
from core.grid_lca import GridLCAModel, build_grid_model
from core.system_model import SystemModel
from core.data_ingest import AlignedSeries, EmissionFactorTable

logger = logging.getLogger(__name__)

SCENARIO_KINDS = ("baseline", "green-rule", "credit-threshold")
CI_SOURCES = ("auto", "reported", "reconstructed")
RATE_INCREMENT = 2.0


# ============================================================
# Domain types
# ============================================================
@dataclass(frozen=True)
class ElectrolyzerSpec:
    specific_energy: float = field(default_factory=lambda: settings.SPECIFIC_ENERGY)  # kWh/kg
    max_rate: float = field(default_factory=lambda: settings.MAX_RATE)  # kg/h
    min_rate: float = 0.0  # kg/h

    def __post_init__(self):
        if self.specific_energy <= 0:
            raise InputError(f"specific_energy must be positive, got {self.specific_energy}")
        if not 0 <= self.min_rate <= self.max_rate:
            raise InputError(f"need 0 <= min_rate <= max_rate, got {self.min_rate} / {self.max_rate}")


@dataclass(frozen=True)
class ProductionRule:
    """Step function: first breakpoint whose threshold >= CI gives the rate (inclusive upper bounds)."""

    breakpoints: tuple[tuple[float, float], ...]
    default_rate_above_last: float = 0.0

    def __post_init__(self):
        points = tuple((float(t), float(r)) for t, r in self.breakpoints)
        object.__setattr__(self, "breakpoints", points)
        if not points:
            raise InputError("production rule needs at least one breakpoint")

        thresholds = [t for t, _ in points]
        rates = [r for _, r in points] + [float(self.default_rate_above_last)]
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise InputError("rule thresholds must be strictly increasing")
        if any(b > a for a, b in zip(rates, rates[1:])):
            raise InputError("rule rates must be non-increasing")
        for rate in rates:
            if rate < 0 or not float(rate / RATE_INCREMENT).is_integer():
                raise InputError(f"rule rate {rate:g} is not a multiple of {RATE_INCREMENT:g} kg/h")

    @property
    def thresholds(self) -> list[float]:
        return [t for t, _ in self.breakpoints]

    @property
    def max_rate(self) -> float:
        return self.breakpoints[0][1]

    def rate_for(self, ci_kg: float) -> float:
        idx = bisect.bisect_left(self.thresholds, ci_kg)
        if idx < len(self.breakpoints):
            return self.breakpoints[idx][1]
        return float(self.default_rate_above_last)


def default_green_rule() -> ProductionRule:
    """
    Full output up to 14.50 kg CO2eq/kg, 8 kg/h in the (16.99, 17.00] band,
    off above 19.00, 2 kg steps in between.
    """
    return ProductionRule(
        breakpoints=(
            (14.50, 20), (15.00, 18), (15.50, 16), (16.00, 14), (16.50, 12),
            (16.99, 10), (17.00, 8), (17.50, 6), (18.00, 4), (19.00, 2),
        ),
        default_rate_above_last=0,
    )


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    electrolyzer: ElectrolyzerSpec = field(default_factory=ElectrolyzerSpec)
    rule: ProductionRule | None = None
    credit_ci_cap: float | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise InputError(f"unknown scenario kind '{self.kind}' (expected {', '.join(SCENARIO_KINDS)})")
        if (self.rule is not None) != (self.kind == "green-rule"):
            raise InputError("a production rule is required for green-rule and only for green-rule")
        if (self.credit_ci_cap is not None) != (self.kind == "credit-threshold"):
            raise InputError("credit_ci_cap is required for credit-threshold and only for credit-threshold")
        if self.credit_ci_cap is not None and self.credit_ci_cap < 0:
            raise InputError(f"credit_ci_cap must be >= 0, got {self.credit_ci_cap}")
        if self.rule is not None and self.rule.max_rate > self.electrolyzer.max_rate:
            raise InputError(
                f"rule rate {self.rule.max_rate:g} exceeds electrolyzer max_rate {self.electrolyzer.max_rate:g}"
            )
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    @classmethod
    def baseline(cls, electrolyzer: ElectrolyzerSpec | None = None) -> "ScenarioConfig":
        return cls("baseline", electrolyzer or ElectrolyzerSpec())

    @classmethod
    def green_rule(cls, rule: ProductionRule | None = None, electrolyzer: ElectrolyzerSpec | None = None):
        return cls("green-rule", electrolyzer or ElectrolyzerSpec(), rule=rule or default_green_rule())

    @classmethod
    def credit_threshold(cls, cap: float | None = None, electrolyzer: ElectrolyzerSpec | None = None):
        cap = settings.CREDIT_CI_CAP if cap is None else cap
        return cls("credit-threshold", electrolyzer or ElectrolyzerSpec(), credit_ci_cap=cap)


@dataclass(frozen=True)
class HourlyDispatch:
    timestamp: pd.Timestamp
    rate: float  # kg/h
    energy: float  # kWh
    emissions: float  # kg CO2eq
    electricity_cost: float  # AUD
    operating_cost: float  # AUD
    credit: float  # AUD
    credit_eligible: bool
    ci_kg: float = 0.0  # kg CO2eq/kg H2 used for the decision
    price: float = 0.0  # AUD/MWh


# ============================================================
# Decisions
# ============================================================
def ci_per_kg(grid_ci: float, spec: ElectrolyzerSpec) -> float:
    """Grid CI (g CO2eq/kWh) -> kg CO2eq per kg H2 through the specific energy."""
    return grid_ci * spec.specific_energy / 1000.0


def decide_rate(config: ScenarioConfig, ci_kg: float) -> float:
    """
    Production rate (kg/h) for one hour.

    Args:
        config: Scenario configuration
        ci_kg: Carbon intensity per kg H2 for the hour

    Returns:
        Rate in kg/h; rates below the electrolyzer's min_rate become 0
    """
    spec = config.electrolyzer
    if config.kind == "baseline":
        rate = spec.max_rate
    elif config.kind == "green-rule":
        rate = config.rule.rate_for(ci_kg)
    else:
        rate = spec.max_rate if ci_kg <= config.credit_ci_cap else 0.0

    if 0 < rate < spec.min_rate:
        return 0.0
    return float(rate)


def hourly_emissions(rate: float, shares, grid_model: GridLCAModel) -> float:
    """
    kg CO2eq of producing `rate` kg in one hour on the given generation mix (dE = B A^-1 dY).

    Raises:
        NumericalError: share vector does not sum to 1, or the solve fails
    """
    if rate < 0:
        raise InputError(f"rate must be >= 0, got {rate}")
    mixed = grid_model.apply_mix(shares)
    if rate == 0:
        return 0.0
    result = steady_state_lca(mixed, grid_model.product_vector(rate))
    return float(result.delta_e[grid_model.emission_row]) * grid_model.emission_scale


def hour_ci(series: AlignedSeries, ef: EmissionFactorTable, ci_source: str = "auto") -> np.ndarray:
    """
    Grid CI (g/kWh) used for dispatch decisions, one value per hour.

    auto: reported when present, otherwise reconstructed from the EF table.
    """
    if ci_source not in CI_SOURCES:
        raise InputError(f"unknown CI source '{ci_source}' (expected {', '.join(CI_SOURCES)})")

    weights = ef.vector()
    values = []
    for record in series:
        if ci_source != "reconstructed" and record.reported_ci is not None:
            values.append(record.reported_ci)
        elif ci_source == "reported":
            raise InputError(f"no reported CI at {record.timestamp.isoformat()} ({series.zone})")
        else:
            values.append(float(np.dot(record.shares(), weights)))
    return np.array(values, dtype=np.float64)


# ============================================================
# Scenario run
# ============================================================
def grid_models_for(model: SystemModel, configs) -> dict[float, GridLCAModel]:
    """One grid binding per distinct electrolyzer specific energy among the configs."""
    models: dict[float, GridLCAModel] = {}
    for config in configs:
        se = config.electrolyzer.specific_energy
        if se not in models:
            models[se] = build_grid_model(model, specific_energy=se)
    return models


def run_scenario(
    series: AlignedSeries,
    config: ScenarioConfig,
    econ: EconParams,
    grid_model: GridLCAModel,
    ef: EmissionFactorTable | None = None,
    ci_source: str = "auto",
) -> list[HourlyDispatch]:
    """
    Dispatch one scenario hour by hour.

    Args:
        series: Aligned grid/price series of one zone
        config: Scenario configuration
        econ: Cost and credit parameters
        grid_model: Grid-mix LCA binding of the system model
        ef: Emission factors for reconstructed CI (default table if omitted)
        ci_source: "auto", "reported" or "reconstructed"

    Returns:
        One HourlyDispatch per hour, in series order

    Credit eligibility always tests econ.credit_ci_cap. A credit-threshold
    config's own cap only decides whether the hour produces.
    """
    if len(series) == 0:
        raise InputError("series is empty")
    ef = ef or EmissionFactorTable.default()
    spec = config.electrolyzer
    if abs(econ.specific_energy - spec.specific_energy) > 1e-12:
        logger.warning(
            "Econ specific energy %.4g differs from electrolyzer %.4g; energy and emissions use the electrolyzer value",
            econ.specific_energy, spec.specific_energy,
        )
    if abs(grid_model.specific_energy - spec.specific_energy) > 1e-9:
        logger.warning(
            "Model electrolyzer draws %.4g kWh/kg, scenario specifies %.4g",
            grid_model.specific_energy, spec.specific_energy,
        )

    ci_g = hour_ci(series, ef, ci_source)
    ci_kg = ci_g * spec.specific_energy / 1000.0
    rates = np.array([decide_rate(config, c) for c in ci_kg])

    # Per-kg emissions only for producing hours; one batched solve
    per_kg = np.zeros(len(series))
    producing = np.flatnonzero(rates > 0)
    if producing.size:
        shares = np.vstack([series.records[i].shares(grid_model.sources) for i in producing])
        per_kg[producing] = grid_model.emissions_per_unit_batch(shares)

    prices = series.prices
    energy = rates * spec.specific_energy
    eligible = (rates > 0) & (ci_kg <= econ.credit_ci_cap)

    dispatch = [
        HourlyDispatch(
            timestamp=record.timestamp,
            rate=float(rates[i]),
            energy=float(energy[i]),
            emissions=float(rates[i] * per_kg[i]),
            electricity_cost=float(energy[i] * prices[i] / 1000.0),
            operating_cost=float(rates[i] * econ.op_cost),
            credit=float(rates[i] * econ.credit_rate) if eligible[i] else 0.0,
            credit_eligible=bool(eligible[i]),
            ci_kg=float(ci_kg[i]),
            price=float(prices[i]),
        )
        for i, record in enumerate(series.records)
    ]
    logger.info(
        "Scenario %s on %s: %d hours, %.1f kg H2",
        config.name, series.zone, len(dispatch), float(rates.sum()),
    )
    return dispatch


# ============================================================
# Config files
# ============================================================
def _key_values(text: str, label: str) -> dict[str, tuple[str, int]]:
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{label}: expected 'key = value'", line=line_no)
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = (value, line_no)
    return values


def _as_float(values: dict, key: str, label: str) -> float | None:
    if key not in values:
        return None
    raw, line_no = values[key]
    try:
        return float(raw)
    except ValueError:
        raise InputError(f"{label}: '{key}' must be a number, got {raw!r}", line=line_no) from None


def parse_rule(text: str) -> ProductionRule:
    """
    Parse a threshold table: one `threshold | rate` per line, ascending,
    plus an optional `above = rate` for CI beyond the last threshold.
    """
    breakpoints = []
    above = 0.0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith("above"):
                above = float(line.split("=", 1)[1])
                continue
            threshold, rate = (float(part) for part in line.split("|"))
        except (ValueError, IndexError):
            raise InputError(f"rule: expected 'threshold | rate' or 'above = rate', got {line!r}", line=line_no) from None
        breakpoints.append((threshold, rate))
    return ProductionRule(tuple(breakpoints), default_rate_above_last=above)


def load_rule(path: str) -> ProductionRule:
    with open(path, "r", encoding="utf-8") as f:
        return parse_rule(f.read())


def parse_scenario(text: str, base_dir: str | None = None, rule: ProductionRule | None = None) -> ScenarioConfig:
    """
    Parse a key/value scenario file.

    Keys: kind, name, specific_energy, max_rate, min_rate, credit_ci_cap,
    rule (path of a threshold table, relative to base_dir). An explicit
    `rule` argument wins over the file's rule path.
    """
    label = "scenario"
    values = _key_values(text, label)
    known = {"kind", "name", "specific_energy", "max_rate", "min_rate", "credit_ci_cap", "rule"}
    for key, (_, line_no) in values.items():
        if key not in known:
            raise InputError(f"{label}: unknown key '{key}'", line=line_no)
    if "kind" not in values:
        raise InputError(f"{label}: missing 'kind'")

    kind = values["kind"][0]
    spec_args = {
        key: value
        for key in ("specific_energy", "max_rate", "min_rate")
        if (value := _as_float(values, key, label)) is not None
    }
    electrolyzer = ElectrolyzerSpec(**spec_args)

    if kind == "green-rule" and rule is None:
        if "rule" in values:
            rule_path = values["rule"][0]
            if base_dir and not os.path.isabs(rule_path):
                rule_path = os.path.join(base_dir, rule_path)
            rule = load_rule(rule_path)
        else:
            rule = default_green_rule()

    cap = _as_float(values, "credit_ci_cap", label)
    if kind == "credit-threshold" and cap is None:
        cap = settings.CREDIT_CI_CAP

    return ScenarioConfig(
        kind=kind,
        electrolyzer=electrolyzer,
        rule=rule if kind == "green-rule" else None,
        credit_ci_cap=cap if kind == "credit-threshold" else None,
        name=values.get("name", ("", 0))[0],
    )


def load_scenario(path: str, rule: ProductionRule | None = None) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as f:
        return parse_scenario(f.read(), base_dir=os.path.dirname(os.path.abspath(path)), rule=rule)
