"""
Sidebar navigation module
"""
import streamlit as st


def show_sidebar(nav_options):
    """Display sidebar with navigation and the loaded dataset"""
    with st.sidebar:
        st.markdown("## 🎬 Rating Benchmark")
        st.markdown("---")

        page = st.selectbox("Navigate to:", nav_options,
                            index=nav_options.index(st.session_state.page) if st.session_state.page in nav_options else 0)

        # Update session state when page changes
        if page != st.session_state.page:
            st.session_state.page = page

        st.markdown("---")
        dataset = st.session_state.dataset
        if dataset is None:
            st.markdown("🗂️ **Dataset**: none loaded")
        else:
            st.markdown(f"🗂️ **Dataset**: {st.session_state.dataset_label}")
            st.caption(f"{len(dataset)} ratings · {dataset.num_users} users · {dataset.num_items} items")
        st.markdown("🧮 **Methods**: UBCF, Iterative MF, Integrated")
