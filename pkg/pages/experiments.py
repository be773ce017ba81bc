"""
Experiments page module
"""
import streamlit as st

from components.results import show_results_table
from config import ExperimentConfig, parse_sweep
from errors import RatebenchError
from harness import METHOD_LABELS, method_settings, results_frame, run


def method_params(method, defaults, dataset):
    """Inputs for one method's parameters, bounded by what the dataset supports"""
    max_rank = min(dataset.num_users, dataset.num_items)
    if method == "ubcf":
        metric = st.selectbox("Similarity", ["cosine", "pearson"],
                              index=["cosine", "pearson"].index(defaults["metric"]))
        k = st.number_input("Neighbors (k)", min_value=1, value=int(defaults["k"]))
        return {"metric": metric, "k": int(k)}
    if method == "imf":
        rank = st.number_input("Rank", min_value=1, max_value=max_rank, value=int(defaults["rank"]))
        iterations = st.number_input("Iterations", min_value=1, value=int(defaults["iterations"]))
        return {"rank": int(rank), "iterations": int(iterations)}

    params = dict(defaults)
    col1, col2 = st.columns(2)
    with col1:
        params["k"] = int(st.number_input("Item neighbors (k)", min_value=0, max_value=dataset.num_items - 1,
                                          value=int(defaults["k"])))
        params["K"] = int(st.number_input("Factors (K)", min_value=0, max_value=max_rank, value=int(defaults["K"])))
    with col2:
        params["lambda1"] = float(st.number_input("Shrinkage (lambda1)", min_value=0.0, value=float(defaults["lambda1"])))
        params["epochs"] = int(st.number_input("Epochs", min_value=0, value=int(defaults["epochs"])))
    return params


def show_experiments():
    """Display experiments page"""
    st.title("🧪 Experiments")

    dataset = st.session_state.dataset
    if dataset is None:
        st.info("Load or generate a dataset first.")
        if st.button("💾 Go to Data Management"):
            st.session_state.page = "Data Management"
            st.rerun()
        return

    settings = st.session_state.settings
    experiment = settings["experiment"]
    method = st.selectbox("Method", list(METHOD_LABELS), format_func=METHOD_LABELS.get)

    with st.form("experiment_form"):
        params = method_params(method, method_settings(dataset, settings)[method], dataset)
        sweep_text = st.text_input("Sweep (one axis per line, e.g. k=10,50,100)", value="")

        col1, col2, col3, col4 = st.columns(4)
        with col1:
            fraction = st.number_input("Training fraction", min_value=0.05, max_value=0.95,
                                       value=float(experiment["split"]), step=0.05)
        with col2:
            seed = st.number_input("Seed", min_value=0, value=int(experiment["seed"]))
        with col3:
            folds = st.number_input("Folds", min_value=1, value=int(experiment["folds"]))
        with col4:
            kfold = st.checkbox("Strict k-fold", value=experiment["cv_mode"] == "kfold")
            clamp = st.checkbox("Clamp predictions", value=bool(experiment["clamp"]))

        submitted = st.form_submit_button("▶️ Run")

    if submitted:
        try:
            config = ExperimentConfig(
                method=method,
                split=float(fraction),
                seed=int(seed),
                params=params,
                sweep=parse_sweep(sweep_text.splitlines()),
                cv_folds=int(folds),
                cv_mode="kfold" if kfold else "subsample",
                clamp=clamp,
            )
            with st.spinner("Training and evaluating..."):
                st.session_state.results = results_frame(run(config, dataset))
        except RatebenchError as e:
            st.error(f"Error running experiment: {e}")

    if st.session_state.results is not None:
        st.subheader("Results")
        results = st.session_state.results
        show_results_table(results, "results", key="download_results")
        mean = results.groupby("params", sort=False)["rmse"].mean().reset_index()
        if len(mean) > 1:
            st.subheader("Mean RMSE per Cell")
            st.dataframe(mean, use_container_width=True)
