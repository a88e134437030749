"""
Model page: load a system model, validate it, inspect and download the
reduced incidence matrix and its partition.
"""

import streamlit as st
import pandas as pd
from core.errors import H2LCAError
from core.system_model import bundled_model_path, load_system_model, parse_system_model, validate_model
from core.hfgt import build_incidence_matrix, matrix_frame, partition
from core.grid_lca import build_grid_model
from core.data_ingest import EmissionFactorTable
from core.file_handler import read_uploaded_file, frame_to_bytes


def _load_model(uploaded):
    if uploaded is None:
        return load_system_model(bundled_model_path())
    return parse_system_model(read_uploaded_file(uploaded))


def render():
    """Render the model page."""

    st.header("System Model")

    uploaded = st.file_uploader(
        "Upload a model document (.model / .txt); leave empty for the bundled australia-h2 model",
        type=["model", "txt"],
        key="model_file_uploader",
    )

    try:
        model = _load_model(uploaded)
    except (H2LCAError, OSError) as e:
        st.error(f"Model could not be parsed: {e}")
        return

    st.session_state.model = model

    col1, col2, col3, col4 = st.columns(4)
    col1.metric("Operands", len(model.operands))
    col2.metric("Processes", len(model.processes))
    col3.metric("Resources", len(model.resources))
    col4.metric("Capabilities", len(model.capabilities))

    # ---- Validation ----
    st.subheader("Validation")
    report = validate_model(model)
    if report.ok:
        st.success("No violations")
    else:
        st.error(f"{len(report)} violation(s)")
        st.dataframe(
            pd.DataFrame([(v.code, v.subject, v.message) for v in report], columns=["code", "subject", "message"]),
            hide_index=True,
        )
        return

    # ---- Incidence matrix ----
    st.subheader("Incidence Matrix")
    reduce = st.checkbox("Eliminate zero rows", value=True)
    try:
        m = build_incidence_matrix(model, reduce=reduce)
    except H2LCAError as e:
        st.error(f"Matrix construction failed: {e}")
        return

    frame = matrix_frame(m)
    st.caption(f"{m.shape[0]} rows x {m.shape[1]} capabilities")
    st.dataframe(frame, hide_index=True)
    st.download_button(
        "Download matrix (CSV)",
        data=frame_to_bytes(frame, "csv"),
        file_name="matrix.csv",
        mime="text/csv",
    )

    # ---- Partition ----
    st.subheader("Partition")
    default_aspects = model.metadata.get("lca_aspects", "")
    aspects_raw = st.text_input("Aspect operands (comma-separated)", value=default_aspects)
    aspects = [a.strip() for a in aspects_raw.split(",") if a.strip()]
    if not aspects or not reduce:
        st.caption("Partitioning needs the reduced matrix and at least one aspect operand.")
        return

    try:
        part = partition(m, aspects)
    except H2LCAError as e:
        st.error(str(e))
        return

    st.success(f"A: {part.A.shape[0]} x {part.A.shape[1]}, B: {part.B.shape[0]} x {part.B.shape[1]}")
    with st.expander("Aspect matrix B", expanded=False):
        b = pd.DataFrame(part.B, columns=list(part.col_map))
        b.insert(0, "place", [f"{op}@{buf}" for op, buf in part.aspect_map])
        st.dataframe(b, hide_index=True)

    # ---- Emission row check ----
    try:
        grid = build_grid_model(model)
    except H2LCAError as e:
        st.info(f"Model carries no grid binding: {e}")
        return

    table = EmissionFactorTable.default()
    ef = grid.emission_factors()
    st.dataframe(
        pd.DataFrame(
            [(s, ef[s], table.factor(s)) for s in grid.sources],
            columns=["source", "model_g_per_kwh", "default_table_g_per_kwh"],
        ),
        hide_index=True,
    )
    if grid.emission_row_matches(table):
        st.success("Model emission row matches the default emission-factor table")
    else:
        st.warning("Model emission row differs from the default emission-factor table")
