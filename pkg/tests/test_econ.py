import io
import json
import os
import numpy as np
import pandas as pd
import pytest
from docx import Document
from core.errors import InputError
from core.econ import (
    COMPARISON_COLUMNS, DISPATCH_COLUMNS, EconParams, MonthlyAggregate, aggregate_monthly, build_comparison,
    comparison_frame, cost_per_kg, credit_earnings, dispatch_frame, export_histograms, export_outputs,
    histogram_frame, load_econ, monthly_for_runs, monthly_frame, operating_cost_total, parse_econ,
    run_order, write_frame,
)
from core.file_handler import build_docx_report, frame_to_bytes, read_uploaded_file, rewound, save_report
from core.scenarios import ElectrolyzerSpec, ScenarioConfig, run_scenario
from conftest import make_series, make_year

ECON = EconParams(specific_energy=52.5, op_cost=1.96, credit_rate=2.0, credit_ci_cap=0.6)
SPEC = ElectrolyzerSpec(specific_energy=52.5, max_rate=20.0)


@pytest.fixture(scope="module")
def year_runs(grid_model):
    coal = make_year({"coal": 1.0}, zone="QLD1")
    wind = make_year({"wind": 1.0}, zone="TAS1")
    return {
        ("QLD1", "baseline"): run_scenario(coal, ScenarioConfig.baseline(SPEC), ECON, grid_model),
        ("QLD1", "credit-threshold"): run_scenario(coal, ScenarioConfig.credit_threshold(0.6, SPEC), ECON, grid_model),
        ("TAS1", "credit-threshold"): run_scenario(wind, ScenarioConfig.credit_threshold(0.6, SPEC), ECON, grid_model),
    }


def test_cost_per_kg(econ):
    assert cost_per_kg(60.0, econ) == pytest.approx(5.11)
    assert cost_per_kg(0.0, econ) == pytest.approx(1.96)
    assert cost_per_kg(-40.0, econ) == pytest.approx(-0.14)


def test_negative_params_rejected():
    with pytest.raises(InputError, match="op_cost"):
        EconParams(op_cost=-1.0)


def test_parse_econ(tmp_path):
    params = parse_econ("# costs\nop_cost = 2.5\ncredit_rate = 3\n")
    assert params.op_cost == 2.5 and params.credit_rate == 3.0
    with pytest.raises(InputError) as exc:
        parse_econ("op_cost = 1\nfuel_cost = 2\n")
    assert exc.value.line == 2
    with pytest.raises(InputError, match="must be a number"):
        parse_econ("op_cost = cheap\n")


def test_bundled_econ_file():
    path = os.path.join(os.path.dirname(os.path.dirname(__file__)), "data", "scenarios", "econ.txt")
    assert load_econ(path) == ECON


def test_baseline_year_production(year_runs):
    months = aggregate_monthly(year_runs[("QLD1", "baseline")], "QLD1", "baseline")
    assert [m.month for m in months] == [f"2023-{i:02d}" for i in range(1, 13)]
    by_month = {m.month: m for m in months}
    assert by_month["2023-01"].h2_kg == 14880.0
    assert by_month["2023-02"].h2_kg == 13440.0
    assert sum(m.h2_kg for m in months) == 175200.0


def test_leap_year_february(grid_model):
    series = make_series({"coal": 1.0}, prices=[50.0] * (29 * 24), start="2024-02-01")
    months = aggregate_monthly(run_scenario(series, ScenarioConfig.baseline(SPEC), ECON, grid_model), "QLD1")
    assert [(m.month, m.h2_kg) for m in months] == [("2024-02", 13920.0)]


def test_months_are_utc_calendar_months(grid_model):
    series = make_series({"coal": 1.0}, prices=[50.0] * 3, start="2023-01-31 23:00")
    months = aggregate_monthly(run_scenario(series, ScenarioConfig.baseline(SPEC), ECON, grid_model), "QLD1")
    assert [(m.month, m.h2_kg) for m in months] == [("2023-01", 20.0), ("2023-02", 40.0)]


def test_yearly_totals(year_runs):
    rows = {(r.zone, r.scenario): r for r in build_comparison(year_runs, ECON)}

    baseline = rows[("QLD1", "baseline")]
    assert baseline.h2_t == pytest.approx(175.2)
    assert baseline.elec_cost == pytest.approx(175200 * 52.5 * 50.0 / 1000.0)
    assert baseline.op_cost == 1.96 * 175200.0
    assert baseline.total_cost == pytest.approx(baseline.elec_cost + baseline.op_cost)
    assert baseline.cost_per_kg == pytest.approx(cost_per_kg(50.0, ECON))
    assert baseline.ci_ratio == pytest.approx(43.05)
    assert baseline.credits == 0.0
    assert baseline.net_cost == baseline.total_cost

    wind = rows[("TAS1", "credit-threshold")]
    assert wind.h2_kg == 175200.0
    assert wind.credits == 350400.0
    assert wind.net_cost == pytest.approx(wind.total_cost - 350400.0)
    assert wind.emissions_kg == pytest.approx(0.0, abs=1e-6)

    idle = rows[("QLD1", "credit-threshold")]
    assert idle.h2_kg == 0.0 and idle.op_cost == 0.0 and idle.emissions_kg == 0.0
    assert idle.cost_per_kg is None and idle.ci_ratio is None


def test_credit_and_operating_helpers(year_runs):
    wind = year_runs[("TAS1", "credit-threshold")]
    assert credit_earnings(wind, ECON) == 350400.0
    assert operating_cost_total(wind, ECON) == 1.96 * 175200.0
    assert operating_cost_total(year_runs[("QLD1", "credit-threshold")], ECON) == 0.0


def test_operating_cost_is_op_cost_times_kg(year_runs):
    baseline = year_runs[("QLD1", "baseline")]
    assert operating_cost_total(baseline, ECON) == 1.96 * 175200.0
    row = {(r.zone, r.scenario): r for r in build_comparison(year_runs, ECON)}[("QLD1", "baseline")]
    assert row.op_cost == 1.96 * 175200.0
    months = aggregate_monthly(baseline, "QLD1", "baseline", ECON)
    assert {m.month: m.op_cost for m in months}["2023-02"] == 1.96 * 13440.0


def test_yearly_equals_sum_of_months(year_runs):
    months = monthly_for_runs(year_runs, ECON)
    for row in build_comparison(year_runs, ECON):
        own = [m for m in months if (m.zone, m.scenario) == (row.zone, row.scenario)]
        assert row.elec_cost == pytest.approx(sum(m.elec_cost for m in own), rel=1e-12)
        assert row.h2_kg == sum(m.h2_kg for m in own)


def test_run_order_is_zone_major():
    results = {("SA1", "credit-threshold"): [], ("QLD1", "green-rule"): [], ("SA1", "baseline"): [],
               ("QLD1", "baseline"): [], ("QLD1", "baseline-min4"): []}
    assert run_order(results) == [
        ("QLD1", "baseline"), ("QLD1", "green-rule"), ("QLD1", "baseline-min4"),
        ("SA1", "baseline"), ("SA1", "credit-threshold"),
    ]


def test_comparison_rejects_mismatched_coverage(grid_model):
    config = ScenarioConfig.baseline(SPEC)
    short = run_scenario(make_series({"coal": 1.0}, prices=[50.0] * 2), config, ECON, grid_model)
    long = run_scenario(make_series({"coal": 1.0}, prices=[50.0] * 3), config, ECON, grid_model)
    with pytest.raises(InputError, match="mismatched coverage"):
        build_comparison({("QLD1", "baseline"): short, ("SA1", "baseline"): long})


def test_dispatch_frame(grid_model):
    dispatch = run_scenario(make_series({"wind": 1.0}, prices=[50.0]), ScenarioConfig.baseline(SPEC), ECON, grid_model)
    frame = dispatch_frame(dispatch)
    assert list(frame.columns) == DISPATCH_COLUMNS
    assert frame["timestamp"].tolist() == ["2023-01-01T00:00:00+00:00"]
    assert frame["eligible"].tolist() == [1]


def test_histogram_density():
    frame = histogram_frame([0.0, 1.0, 2.0, 2.5, np.nan], bin_width=1.0)
    assert frame["bin_start"].tolist() == [0.0, 1.0, 2.0]
    assert frame["count"].tolist() == [1, 1, 2]
    assert (frame["density"] * 1.0).sum() == pytest.approx(1.0)
    assert histogram_frame([], 1.0).empty
    with pytest.raises(InputError):
        histogram_frame([1.0], 0.0)


def test_histogram_bins_align_to_width():
    frame = histogram_frame([-17.0, 33.0], bin_width=10.0)
    assert frame["bin_start"].iloc[0] == -20.0
    assert frame["bin_end"].iloc[-1] == 40.0


def test_undefined_ratios_written_as_empty_and_null(tmp_path):
    months = [MonthlyAggregate("SA1", "2023-01", 0.0, 0.0, 0.0, 0.0, 0.0, "credit-threshold")]
    frame = monthly_frame(months)

    write_frame(frame, str(tmp_path / "m.csv"), "csv")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == ",".join(frame.columns)
    assert lines[1].endswith(",,")

    write_frame(frame, str(tmp_path / "m.json"), "json")
    record = json.loads((tmp_path / "m.json").read_text())[0]
    assert record["avg_cost_per_kg"] is None and record["ci_ratio"] is None

    with pytest.raises(InputError, match="unknown output format"):
        write_frame(frame, str(tmp_path / "m.xml"), "xml")


def test_export_outputs_is_deterministic(year_runs, tmp_path):
    comparison = build_comparison(year_runs, ECON)
    months = monthly_for_runs(year_runs, ECON)
    first = export_outputs(months, comparison, "csv", str(tmp_path / "a"), dispatch=year_runs)
    second = export_outputs(months, comparison, "csv", str(tmp_path / "b"), dispatch=year_runs)
    assert [p.rsplit("/", 1)[-1] for p in first] == [
        "monthly.csv", "comparison.csv", "dispatch_QLD1_baseline.csv",
        "dispatch_QLD1_credit-threshold.csv", "dispatch_TAS1_credit-threshold.csv",
    ]
    for a, b in zip(first, second):
        assert open(a, "rb").read() == open(b, "rb").read()

    table = pd.read_csv(first[1])
    assert list(table.columns) == COMPARISON_COLUMNS
    assert len(table) == 3


def test_export_histograms(tmp_path):
    paths = export_histograms([600.0, 650.0], [40.0, -10.0], "json", str(tmp_path), zone="QLD1",
                              ci_bin_width=50.0, price_bin_width=25.0)
    assert [p.rsplit("/", 1)[-1] for p in paths] == ["hist_ci_QLD1.json", "hist_price_QLD1.json"]
    prices = json.loads(open(paths[1]).read())
    assert prices[0]["bin_start"] == -25.0


def test_frame_to_bytes_matches_file_export(year_runs, tmp_path):
    frame = comparison_frame(build_comparison(year_runs, ECON))
    path = write_frame(frame, str(tmp_path / "c.csv"), "csv")
    assert frame_to_bytes(frame, "csv") == open(path, "rb").read()
    path = write_frame(frame, str(tmp_path / "c.json"), "json")
    assert frame_to_bytes(frame, "json") == open(path, "rb").read()


def test_docx_report(year_runs, tmp_path):
    comparison = build_comparison(year_runs, ECON)
    data = build_docx_report(comparison, monthly_for_runs(year_runs, ECON), title="Test Report", notes=["zones: QLD1, TAS1"])
    doc = Document(io.BytesIO(data))
    texts = [p.text for p in doc.paragraphs]
    assert "Test Report" in texts and "zones: QLD1, TAS1" in texts
    assert len(doc.tables) == 2
    assert doc.tables[0].rows[0].cells[0].text == "zone"
    assert len(doc.tables[0].rows) == len(comparison) + 1

    path = save_report(data, str(tmp_path / "out" / "report.docx"))
    assert open(path, "rb").read() == data


def test_uploaded_files():
    upload = io.BytesIO("name = café\n".encode("latin-1"))
    assert read_uploaded_file(upload) == "name = café\n"
    assert rewound(upload).read() == "name = café\n".encode("latin-1")
