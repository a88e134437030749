"""
Settings page: edit the .env defaults (cost parameters, credit cap, tolerances, paths).
"""

import streamlit as st
from core import settings

_LABELS = {
    "H2LCA_DATA_DIR": "Data directory",
    "H2LCA_OUTPUT_DIR": "Output directory",
    "H2LCA_LOG_LEVEL": "Log level",
    "H2LCA_SPECIFIC_ENERGY": "Specific energy (kWh/kg)",
    "H2LCA_MAX_RATE": "Electrolyzer max rate (kg/h)",
    "H2LCA_OP_COST": "Operating cost (AUD/kg)",
    "H2LCA_CREDIT_RATE": "Credit rate (AUD/kg)",
    "H2LCA_CREDIT_CI_CAP": "Credit CI cap (kg CO2eq/kg)",
    "H2LCA_CI_TOLERANCE": "CI validation tolerance (g/kWh)",
    "H2LCA_MAX_PRICE_GAP_HOURS": "Max price gap (hours, blank = unlimited)",
    "H2LCA_CI_BIN_WIDTH": "CI histogram bin width (g/kWh)",
    "H2LCA_PRICE_BIN_WIDTH": "Price histogram bin width (AUD/MWh)",
}


def render():
    """Render the settings page."""

    st.header("Settings")
    st.caption("Values are stored in .env; blank fields fall back to the built-in defaults.")

    current = settings.current_values()
    values = {key: st.text_input(label, value=current.get(key, ""), key=f"env_{key}") for key, label in _LABELS.items()}

    st.divider()

    if st.button("Save", type="primary"):
        try:
            path = settings.write_env(values)
        except OSError as e:
            st.error(f"Could not write settings: {e}")
            return
        st.session_state.scenario_results = None
        st.success(f"Settings saved to {path}")

    st.divider()
    st.subheader("Effective Configuration")
    st.code(
        f"Specific energy: {settings.SPECIFIC_ENERGY:g} kWh/kg\n"
        f"Max rate:        {settings.MAX_RATE:g} kg/h\n"
        f"Operating cost:  {settings.OP_COST:g} AUD/kg\n"
        f"Credit:          {settings.CREDIT_RATE:g} AUD/kg at <= {settings.CREDIT_CI_CAP:g} kg CO2eq/kg\n"
        f"Output dir:      {settings.OUTPUT_DIR}",
        language=None,
    )
