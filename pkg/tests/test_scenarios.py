import os
import numpy as np
import pytest
from core.errors import InputError
from core.data_ingest import AlignedSeries, CoverageStats, EmissionFactorTable
from core.scenarios import (
    ElectrolyzerSpec, ProductionRule, ScenarioConfig, ci_per_kg, decide_rate, default_green_rule,
    grid_models_for, hour_ci, hourly_emissions, load_rule, load_scenario, parse_rule, parse_scenario,
    run_scenario,
)
from core.econ import EconParams
from conftest import make_series, random_mixes


@pytest.fixture
def configs(electrolyzer):
    return {
        "baseline": ScenarioConfig.baseline(electrolyzer),
        "green-rule": ScenarioConfig.green_rule(electrolyzer=electrolyzer),
        "credit-threshold": ScenarioConfig.credit_threshold(0.6, electrolyzer),
    }


@pytest.mark.parametrize("ci_kg, rate", [
    (0.0, 20), (14.50, 20), (14.51, 18), (15.00, 18), (16.00, 14), (16.99, 10),
    (16.995, 8), (17.00, 8), (17.01, 6), (18.00, 4), (19.00, 2), (19.0001, 0), (45.0, 0),
])
def test_green_rule_anchors(configs, ci_kg, rate):
    assert decide_rate(configs["green-rule"], ci_kg) == rate


def test_credit_threshold_boundary(configs):
    config = configs["credit-threshold"]
    assert decide_rate(config, 0.60) == 20
    assert decide_rate(config, 0.60 + 1e-9) == 0
    assert decide_rate(config, 0.0) == 20


def test_baseline_ignores_ci(configs):
    assert decide_rate(configs["baseline"], 100.0) == 20


def test_green_rule_is_non_increasing(configs):
    grid = np.linspace(0.0, 25.0, 2501)
    rates = [decide_rate(configs["green-rule"], c) for c in grid]
    assert all(b <= a for a, b in zip(rates, rates[1:]))
    assert all(r % 2 == 0 for r in rates)


def test_min_rate_turns_small_rates_off(electrolyzer):
    spec = ElectrolyzerSpec(specific_energy=52.5, max_rate=20.0, min_rate=5.0)
    config = ScenarioConfig.green_rule(electrolyzer=spec)
    assert decide_rate(config, 17.4) == 6
    assert decide_rate(config, 17.9) == 0


def test_ci_per_kg(electrolyzer):
    assert ci_per_kg(820.0, electrolyzer) == pytest.approx(43.05)
    assert ci_per_kg(0.0, electrolyzer) == 0.0


@pytest.mark.parametrize("breakpoints", [
    ((15.0, 20), (14.0, 18)),
    ((14.0, 18), (15.0, 20)),
    ((14.0, 19),),
    (),
])
def test_invalid_rules(breakpoints):
    with pytest.raises(InputError):
        ProductionRule(breakpoints)


def test_config_validation(electrolyzer):
    with pytest.raises(InputError):
        ScenarioConfig("baseline", electrolyzer, rule=default_green_rule())
    with pytest.raises(InputError):
        ScenarioConfig("credit-threshold", electrolyzer)
    with pytest.raises(InputError):
        ScenarioConfig("peak-shaving", electrolyzer)
    with pytest.raises(InputError, match="exceeds"):
        ScenarioConfig.green_rule(electrolyzer=ElectrolyzerSpec(specific_energy=52.5, max_rate=10.0))
    with pytest.raises(InputError):
        ElectrolyzerSpec(specific_energy=0.0)


def test_hourly_emissions(grid_model):
    assert hourly_emissions(20.0, {"coal": 1.0}, grid_model) == pytest.approx(861.0, abs=1e-9)
    assert hourly_emissions(20.0, {"coal": 0.25, "wind": 0.75}, grid_model) == pytest.approx(215.25, abs=1e-9)
    assert hourly_emissions(0.0, {"wind": 1.0}, grid_model) == 0.0
    with pytest.raises(InputError):
        hourly_emissions(-1.0, {"wind": 1.0}, grid_model)


def test_run_scenario_hour_fields(grid_model, econ, configs):
    series = make_series({"coal": 1.0}, prices=[60.0, -10.0])
    dispatch = run_scenario(series, configs["baseline"], econ, grid_model)
    first = dispatch[0]
    assert first.rate == 20.0
    assert first.energy == 1050.0
    assert first.emissions == pytest.approx(861.0, abs=1e-9)
    assert first.electricity_cost == pytest.approx(63.0)
    assert first.operating_cost == pytest.approx(39.2)
    assert not first.credit_eligible and first.credit == 0.0
    assert first.ci_kg == pytest.approx(43.05)
    assert dispatch[1].electricity_cost == pytest.approx(-10.5)


def test_credit_threshold_on_clean_hours(grid_model, econ, configs):
    series = make_series([{"wind": 1.0}, {"coal": 1.0}], prices=[50.0, 50.0])
    dispatch = run_scenario(series, configs["credit-threshold"], econ, grid_model)
    assert [d.rate for d in dispatch] == [20.0, 0.0]
    assert dispatch[0].credit_eligible and dispatch[0].credit == 40.0
    assert dispatch[0].emissions == pytest.approx(0.0, abs=1e-9)


def test_dirty_zone_produces_nothing_under_credit_threshold(grid_model, econ, configs, rng):
    mixes = [dict(m, coal=m["coal"] + 5000.0) for m in random_mixes(rng, 48)]
    dispatch = run_scenario(make_series(mixes, prices=[50.0] * 48), configs["credit-threshold"], econ, grid_model)
    assert sum(d.rate for d in dispatch) == 0.0
    assert sum(d.emissions for d in dispatch) == 0.0
    assert sum(d.operating_cost for d in dispatch) == 0.0


def test_scenario_dominance(grid_model, econ, configs, rng):
    mixes = random_mixes(rng, 96)
    for m in mixes[::3]:
        m.update(coal=0.0, gas=0.0, oil=0.0, biomass=0.0)
    for m in mixes[1::3]:
        m.update(coal=0.0, oil=0.0, biomass=0.0, gas=m["gas"] * 0.1)
    series = make_series(mixes, prices=rng.uniform(-50, 300, size=96))
    totals = {
        name: sum(d.emissions for d in run_scenario(series, config, econ, grid_model))
        for name, config in configs.items()
    }
    assert totals["baseline"] >= totals["green-rule"] >= totals["credit-threshold"]
    assert totals["credit-threshold"] >= 0.0


def test_emissions_track_decision_ci(grid_model, econ, configs, rng):
    series = make_series(random_mixes(rng, 24), prices=[50.0] * 24)
    for d in run_scenario(series, configs["baseline"], econ, grid_model):
        assert d.emissions == pytest.approx(d.rate * d.ci_kg, rel=1e-9)


def test_ci_source_selection(grid_model, econ, configs):
    series = make_series({"coal": 1.0}, prices=[50.0, 50.0], reported_ci=[10.0, None])
    ef = EmissionFactorTable.default()
    assert hour_ci(series, ef, "auto").tolist() == [10.0, 820.0]
    assert hour_ci(series, ef, "reconstructed").tolist() == [820.0, 820.0]
    with pytest.raises(InputError, match="no reported CI"):
        hour_ci(series, ef, "reported")

    # Reported CI drives the decision; emissions still come from the mix
    dispatch = run_scenario(series, configs["credit-threshold"], econ, grid_model, ci_source="auto")
    assert [d.rate for d in dispatch] == [20.0, 0.0]
    assert dispatch[0].emissions == pytest.approx(861.0, abs=1e-9)


def test_eligibility_uses_econ_cap_for_every_scenario(grid_model, econ, configs):
    series = make_series({"wind": 1.0}, prices=[50.0])
    for config in configs.values():
        dispatch = run_scenario(series, config, econ, grid_model)
        assert dispatch[0].credit_eligible


def test_threshold_cap_gates_production_not_credits(grid_model, econ):
    series = make_series({"wind": 1.0}, prices=[50.0, 50.0], reported_ci=[16.0, 10.0])
    loose = run_scenario(series, ScenarioConfig.credit_threshold(1.0), econ, grid_model, ci_source="reported")
    assert [d.rate for d in loose] == [20.0, 20.0]
    assert [d.credit_eligible for d in loose] == [False, True]
    assert loose[0].ci_kg == pytest.approx(0.84)

    strict = run_scenario(series, ScenarioConfig.credit_threshold(0.3), econ, grid_model, ci_source="reported")
    assert [d.rate for d in strict] == [0.0, 0.0]
    assert not any(d.credit_eligible for d in strict)


def test_grid_models_follow_electrolyzer_specific_energy(bundled_model):
    configs = [
        ScenarioConfig.baseline(ElectrolyzerSpec(specific_energy=55.0, max_rate=20.0)),
        ScenarioConfig.green_rule(electrolyzer=ElectrolyzerSpec(specific_energy=52.5, max_rate=20.0)),
        ScenarioConfig.credit_threshold(0.6, ElectrolyzerSpec(specific_energy=55.0, max_rate=20.0)),
    ]
    models = grid_models_for(bundled_model, configs)
    assert sorted(models) == [52.5, 55.0]
    for se, model in models.items():
        assert model.specific_energy == pytest.approx(se)

    series = make_series({"coal": 1.0}, prices=[50.0])
    econ = EconParams(specific_energy=55.0, op_cost=1.96, credit_rate=2.0, credit_ci_cap=0.6)
    dispatch = run_scenario(series, configs[0], econ, models[55.0])
    assert dispatch[0].emissions == pytest.approx(20.0 * 55.0 * 0.82, rel=1e-9)


def test_parse_rule():
    rule = parse_rule("# table\n14.5 | 20\n17 | 8  # band\nabove = 0\n")
    assert rule.breakpoints == ((14.5, 20.0), (17.0, 8.0))
    assert rule.rate_for(16.0) == 8.0
    assert rule.rate_for(20.0) == 0.0
    with pytest.raises(InputError) as exc:
        parse_rule("14.5 | 20\n15 ; 18\n")
    assert exc.value.line == 2


def test_bundled_rule_matches_default():
    path = os.path.join(os.path.dirname(os.path.dirname(__file__)), "data", "scenarios", "green_rule.rule")
    assert load_rule(path) == default_green_rule()


def test_parse_scenario(tmp_path):
    config = parse_scenario("kind = credit-threshold\nname = strict\ncredit_ci_cap = 0.3\nmax_rate = 10\n")
    assert config.name == "strict"
    assert config.credit_ci_cap == 0.3
    assert config.electrolyzer.max_rate == 10.0

    (tmp_path / "r.rule").write_text("16 | 10\n")
    (tmp_path / "g.scenario").write_text("kind = green-rule\nrule = r.rule\n")
    green = load_scenario(str(tmp_path / "g.scenario"))
    assert green.rule.breakpoints == ((16.0, 10.0),)


def test_parse_scenario_errors():
    with pytest.raises(InputError, match="unknown key"):
        parse_scenario("kind = baseline\ncolour = red\n")
    with pytest.raises(InputError, match="missing 'kind'"):
        parse_scenario("name = x\n")
    with pytest.raises(InputError) as exc:
        parse_scenario("kind = baseline\nmax_rate = fast\n")
    assert exc.value.line == 2


def test_empty_series_rejected(grid_model, econ, configs):
    with pytest.raises(InputError):
        run_scenario(AlignedSeries("QLD1", (), CoverageStats(0, 0, 0)), configs["baseline"], econ, grid_model)
