"""
Scenario page

Workflow:
1. Upload hourly generation and price series (canonical CSV)
2. Pick zone, CI source, scenarios and cost parameters
3. Run -> yearly comparison, monthly breakdown, downloads (CSV/JSON/DOCX)
"""

import streamlit as st
from core import settings
from core.errors import H2LCAError
from core.system_model import bundled_model_path, load_system_model
from core.data_ingest import (
    EmissionFactorTable, align_series, load_emission_factors, load_generation_series, load_price_series,
)
from core.scenarios import CI_SOURCES, SCENARIO_KINDS, ScenarioConfig, grid_models_for, hour_ci, run_scenario
from core.econ import (
    EconParams, build_comparison, comparison_frame, dispatch_frame, histogram_frame,
    monthly_for_runs, monthly_frame,
)
from core.file_handler import build_docx_report, frame_to_bytes, rewound

_CONFIGS = {
    "baseline": ScenarioConfig.baseline,
    "green-rule": ScenarioConfig.green_rule,
    "credit-threshold": ScenarioConfig.credit_threshold,
}


@st.cache_resource(show_spinner=False)
def _system_model(model_path: str):
    return load_system_model(model_path)


def render():
    """Render the scenario page."""

    st.header("Hydrogen Dispatch Scenarios")

    if "scenario_results" not in st.session_state:
        st.session_state.scenario_results = None

    # ---- Step 1: Upload series ----
    st.subheader("Step 1: Upload Hourly Series")
    col1, col2, col3 = st.columns(3)
    with col1:
        gen_file = st.file_uploader("Generation (.csv)", type=["csv"], key="gen_file_uploader")
    with col2:
        price_file = st.file_uploader("Prices (.csv)", type=["csv"], key="price_file_uploader")
    with col3:
        ef_file = st.file_uploader("Emission factors (.csv, optional)", type=["csv"], key="ef_file_uploader")

    if gen_file is None or price_file is None:
        st.caption("Please upload both the generation and the price series")
        return

    try:
        grid = load_generation_series(rewound(gen_file))
        prices = load_price_series(rewound(price_file))
        ef = load_emission_factors(rewound(ef_file)) if ef_file is not None else EmissionFactorTable.default()
    except H2LCAError as e:
        st.error(f"Input rejected: {e}")
        return

    zones = sorted({r.zone for r in grid})

    # ---- Step 2: Parameters ----
    st.subheader("Step 2: Parameters")
    col1, col2 = st.columns(2)
    with col1:
        zone = st.selectbox("Zone", zones)
        ci_source = st.selectbox("CI source", CI_SOURCES)
        kinds = st.multiselect("Scenarios", SCENARIO_KINDS, default=list(SCENARIO_KINDS))
    with col2:
        op_cost = st.number_input("Operating cost (AUD/kg)", min_value=0.0, value=float(settings.OP_COST))
        credit_rate = st.number_input("Credit rate (AUD/kg)", min_value=0.0, value=float(settings.CREDIT_RATE))
        credit_cap = st.number_input(
            "Credit CI cap (kg CO2eq/kg H2)", min_value=0.0, value=float(settings.CREDIT_CI_CAP),
        )

    if not kinds:
        st.caption("Select at least one scenario")
        return

    # ---- Step 3: Run ----
    if st.button("Run scenarios", type="primary"):
        with st.spinner("Solving hourly life-cycle inventories..."):
            try:
                econ = EconParams(op_cost=op_cost, credit_rate=credit_rate, credit_ci_cap=credit_cap)
                series = align_series(grid, prices, zone=zone)
                configs = [
                    ScenarioConfig.credit_threshold(credit_cap) if kind == "credit-threshold" else _CONFIGS[kind]()
                    for kind in kinds
                ]
                grid_models = grid_models_for(_system_model(bundled_model_path()), configs)
                results = {}
                for config in configs:
                    results[(zone, config.name)] = run_scenario(
                        series, config, econ, grid_models[config.electrolyzer.specific_energy],
                        ef=ef, ci_source=ci_source,
                    )
                st.session_state.scenario_results = {
                    "results": results,
                    "ci": hour_ci(series, ef, ci_source),
                    "prices": series.prices,
                    "coverage": series.coverage,
                    "econ": econ,
                }
            except H2LCAError as e:
                st.error(f"Scenario run failed: {e}")
                st.session_state.scenario_results = None
                return

    state = st.session_state.scenario_results
    if state is None:
        return

    results = state["results"]
    coverage = state["coverage"]
    st.success(
        f"{coverage.aligned_hours} aligned hours "
        f"({coverage.dropped_grid} grid / {coverage.dropped_price} price hours dropped)"
    )

    comparison = build_comparison(results, state["econ"])
    monthly = monthly_for_runs(results, state["econ"])
    comp = comparison_frame(comparison)
    month = monthly_frame(monthly)

    st.subheader("Yearly Comparison")
    st.dataframe(comp, hide_index=True)
    st.subheader("Monthly Breakdown")
    st.dataframe(month, hide_index=True)

    with st.expander("Hourly production rate", expanded=False):
        rates = {name: [d.rate for d in records] for (_, name), records in results.items()}
        st.line_chart(rates)

    with st.expander("CI and price distributions", expanded=False):
        col1, col2 = st.columns(2)
        col1.bar_chart(histogram_frame(state["ci"], settings.CI_BIN_WIDTH), x="bin_start", y="density")
        col2.bar_chart(histogram_frame(state["prices"], settings.PRICE_BIN_WIDTH), x="bin_start", y="density")

    # ---- Downloads ----
    col1, col2, col3 = st.columns(3)
    with col1:
        st.download_button("Download comparison (CSV)", frame_to_bytes(comp), "comparison.csv", "text/csv")
        st.download_button("Download comparison (JSON)", frame_to_bytes(comp, "json"), "comparison.json",
                           "application/json")
    with col2:
        st.download_button("Download monthly (CSV)", frame_to_bytes(month), "monthly.csv", "text/csv")
        for (z, name), records in results.items():
            st.download_button(
                f"Dispatch {name} (CSV)", frame_to_bytes(dispatch_frame(records)),
                f"dispatch_{z}_{name}.csv", "text/csv", key=f"dl_dispatch_{name}",
            )
    with col3:
        st.download_button(
            "Download report (.docx)",
            build_docx_report(comparison, monthly, notes=[f"Zone: {zone}", f"CI source: {ci_source}"]),
            "comparison.docx",
            "application/vnd.openxmlformats-officedocument.wordprocessingml.document",
        )
