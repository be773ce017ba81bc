"""
Data management page module
"""
import io
from datetime import datetime

import pandas as pd
import streamlit as st

from errors import RatebenchError
from ratings import baseline_stats, load_csv, save_csv
from synthetic import SyntheticSpec, generate_synthetic


def dataset_summary(dataset) -> pd.DataFrame:
    """One-column table describing a loaded dataset"""
    stats = baseline_stats(dataset)
    cells = dataset.num_users * dataset.num_items
    rows = {
        "Ratings": len(dataset),
        "Users": dataset.num_users,
        "Items": dataset.num_items,
        "Density": f"{len(dataset) / cells:.4f}",
        "Scale": f"{dataset.scale[0]:g} - {dataset.scale[1]:g}",
        "Global mean": f"{stats.global_mean:.4f}",
        "Ratings per user (median)": f"{pd.Series(stats.user_counts).median():g}",
        "Ratings per item (median)": f"{pd.Series(stats.item_counts).median():g}",
    }
    return pd.DataFrame({"Value": [str(v) for v in rows.values()]}, index=list(rows))


def set_dataset(dataset, label):
    st.session_state.dataset = dataset
    st.session_state.dataset_label = label
    st.session_state.results = None
    st.session_state.comparison = None


def show_data_management():
    """Display data management page"""
    st.title("💾 Data Management")
    defaults = st.session_state.settings["dashboard"]

    col1, col2 = st.columns(2)

    with col1:
        st.subheader("Load Ratings CSV")
        uploaded = st.file_uploader("Ratings file (user_id,item_id,rating)", type=["csv"])
        if uploaded is not None and st.button("📂 Load File"):
            try:
                set_dataset(load_csv(uploaded), uploaded.name)
                st.success(f"✅ Loaded {len(st.session_state.dataset)} ratings from {uploaded.name}")
            except RatebenchError as e:
                st.error(f"Error loading ratings: {e}")

        if defaults["data"] and st.button("📂 Load Configured Path"):
            try:
                set_dataset(load_csv(defaults["data"]), defaults["data"])
                st.success(f"✅ Loaded {defaults['data']}")
            except RatebenchError as e:
                st.error(f"Error loading ratings: {e}")

    with col2:
        st.subheader("Generate Synthetic Data")
        spec_text = st.text_input("Synthetic spec", value=defaults["synthetic"])
        if st.button("🎲 Generate"):
            try:
                spec = SyntheticSpec.parse(spec_text)
                set_dataset(generate_synthetic(spec).dataset, f"synthetic {spec.render()}")
                st.success(f"✅ Generated {len(st.session_state.dataset)} ratings")
            except RatebenchError as e:
                st.error(f"Error generating data: {e}")

    dataset = st.session_state.dataset
    if dataset is None:
        st.info("No dataset loaded. Upload a ratings CSV or generate a synthetic one.")
        return

    st.subheader("Dataset Summary")
    st.caption(st.session_state.dataset_label)
    st.dataframe(dataset_summary(dataset), use_container_width=True)

    # Export in the ratings CSV format
    buffer = io.StringIO()
    save_csv(dataset, buffer)
    st.download_button(
        label="📥 Download Ratings CSV",
        data=buffer.getvalue(),
        file_name=f"ratings_{datetime.now().strftime('%Y%m%d_%H%M%S')}.csv",
        mime="text/csv"
    )
