"""
Method comparison page module
"""
import streamlit as st

from components.results import show_results_table
from errors import RatebenchError
from harness import METHOD_LABELS, REFERENCE_RMSE, compare_methods, method_settings


def show_compare_methods():
    """Display the three methods side by side on one split"""
    st.title("📋 Compare Methods")

    dataset = st.session_state.dataset
    if dataset is None:
        st.info("Load or generate a dataset first.")
        return

    experiment = st.session_state.settings["experiment"]
    col1, col2 = st.columns(2)
    with col1:
        seed = st.number_input("Seed", min_value=0, value=int(experiment["seed"]))
    with col2:
        fraction = st.number_input("Training fraction", min_value=0.05, max_value=0.95,
                                   value=float(experiment["split"]), step=0.05)

    if st.button("▶️ Compare"):
        try:
            settings = method_settings(dataset, st.session_state.settings)
            with st.spinner("Training all three methods..."):
                st.session_state.comparison = compare_methods(
                    dataset, seed=int(seed), fraction=float(fraction),
                    clamp=bool(experiment["clamp"]), settings=settings
                )
        except RatebenchError as e:
            st.error(f"Error comparing methods: {e}")

    comparison = st.session_state.comparison
    if comparison is None:
        return

    # Metrics row
    cols = st.columns(len(comparison))
    for col, (_, row) in zip(cols, comparison.iterrows()):
        with col:
            st.metric(METHOD_LABELS[row["method"]], f"{row['rmse']:.5f}")

    show_results_table(comparison, "comparison", key="download_comparison")
    st.caption("Originally reported RMSE on a private 10000x1000 dataset: " +
               ", ".join(f"{METHOD_LABELS[m]} {v:.5f}" for m, v in REFERENCE_RMSE.items()))
