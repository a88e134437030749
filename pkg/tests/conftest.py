import numpy as np
import pandas as pd
import pytest
from core.system_model import bundled_model_path, load_system_model
from core.grid_lca import build_grid_model
from core.data_ingest import SOURCES, AlignedRecord, AlignedSeries, CoverageStats
from core.econ import EconParams
from core.scenarios import ElectrolyzerSpec

LCA_ASPECTS = ["coal", "natural_gas", "oil", "biomass", "heat_loss", "co2", "oxygen"]


TOY_MODEL = """\
[metadata]
name = toy

[operands]
fuel | Fuel | kWh_th
power | Power | kWh
co2 | CO2 | g

[processes]
burn | Burn Fuel | transformation
move | Move Power | refined-transportation

[resources]
plant | Plant | transformation
store | Store | independent-buffer
line | Line | transportation

[capabilities]
cap_burn | plant | burn | fuel @ plant : -2 kWh_th ; power @ plant : +1 kWh ; co2 @ plant : +500 g
cap_store | store | move | power @ plant : -1 kWh ; power @ store : +1 kWh
"""


@pytest.fixture(scope="session")
def bundled_model():
    return load_system_model(bundled_model_path())


@pytest.fixture(scope="session")
def grid_model(bundled_model):
    return build_grid_model(bundled_model)


@pytest.fixture
def econ():
    return EconParams(specific_energy=52.5, op_cost=1.96, credit_rate=2.0, credit_ci_cap=0.6)


@pytest.fixture
def electrolyzer():
    return ElectrolyzerSpec(specific_energy=52.5, max_rate=20.0)


def hourly_index(start: str, periods: int) -> pd.DatetimeIndex:
    return pd.date_range(start, periods=periods, freq="h", tz="UTC")


def make_series(generation, prices=None, zone="QLD1", start="2023-01-01", reported_ci=None) -> AlignedSeries:
    """
    Aligned series from per-hour generation dicts (MWh by source).

    generation: one dict per hour, or a single dict repeated for `len(prices)` hours
    """
    if isinstance(generation, dict):
        n = len(prices) if prices is not None else 24
        generation = [generation] * n
    n = len(generation)
    prices = [50.0] * n if prices is None else list(prices)
    reported = [None] * n if reported_ci is None else list(reported_ci)
    records = tuple(
        AlignedRecord(
            timestamp=ts,
            zone=zone,
            generation={s: float(gen.get(s, 0.0)) for s in SOURCES},
            reported_ci=ci,
            price=float(price),
        )
        for ts, gen, price, ci in zip(hourly_index(start, n), generation, prices, reported)
    )
    return AlignedSeries(zone, records, CoverageStats(n, n, n))


def make_year(generation, year=2023, zone="QLD1", price=50.0) -> AlignedSeries:
    n = len(pd.date_range(f"{year}-01-01", f"{year + 1}-01-01", freq="h", inclusive="left"))
    return make_series(generation, prices=[price] * n, zone=zone, start=f"{year}-01-01")


def random_mixes(rng, n_hours: int) -> list[dict]:
    """Random generation dicts over every source, strictly positive totals."""
    raw = rng.uniform(0.0, 1000.0, size=(n_hours, len(SOURCES)))
    raw[:, 0] += 1.0
    return [dict(zip(SOURCES, row)) for row in raw]


def write_generation_csv(path, series: AlignedSeries, with_ci: bool = True):
    frame = series.to_frame()
    frame["timestamp"] = frame["timestamp"].map(lambda t: t.strftime("%Y-%m-%dT%H:%M:%SZ"))
    if not with_ci:
        frame = frame.drop(columns=["reported_ci"])
    frame.drop(columns=["price_aud_per_mwh"]).to_csv(path, index=False)
    return path


def write_price_csv(path, series: AlignedSeries):
    frame = pd.DataFrame({
        "timestamp": [t.strftime("%Y-%m-%dT%H:%M:%SZ") for t in series.timestamps],
        "zone": series.zone,
        "price_aud_per_mwh": series.prices,
    })
    frame.to_csv(path, index=False)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(20230101)
