"""
Grid-to-Hydrogen LCA

Main entry point:
- Sidebar navigation (Scenarios / Model / Settings)
- Bundled model status
- Page routing

Run: streamlit run app.py
"""

import streamlit as st
from core import settings
from core.errors import H2LCAError
from core.system_model import bundled_model_path, load_system_model, validate_model
from ui.scenario_page import render as render_scenarios
from ui.model_page import render as render_model
from ui.settings_page import render as render_settings

st.set_page_config(
    page_title="Grid-to-Hydrogen LCA",
    page_icon="⚡",
    layout="wide",
)

settings.configure_logging()

with st.sidebar:
    st.title("Grid-to-Hydrogen LCA")
    st.caption("v0.1")

    st.divider()

    st.subheader("Navigation")
    page = st.radio(
        "Select function",
        ["Scenarios", "Model", "Settings"],
        label_visibility="collapsed",
    )

    st.divider()

    st.subheader("Model Status")

    if "model_ok" not in st.session_state:
        try:
            st.session_state.model_ok = validate_model(load_system_model(bundled_model_path())).ok
        except (H2LCAError, OSError):
            st.session_state.model_ok = False

    if st.session_state.model_ok:
        st.success("australia-h2: valid")
    else:
        st.error("australia-h2: invalid")
        st.caption("Open the Model page for details")

    st.caption(
        f"{settings.SPECIFIC_ENERGY:g} kWh/kg, max {settings.MAX_RATE:g} kg/h, "
        f"credit cap {settings.CREDIT_CI_CAP:g} kg CO2eq/kg"
    )

if page == "Scenarios":
    render_scenarios()
elif page == "Model":
    render_model()
elif page == "Settings":
    render_settings()
