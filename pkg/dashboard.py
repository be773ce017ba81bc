"""
Main application file for the Rating Benchmark dashboard
"""
import streamlit as st

# Import modules
from config import initialize_session_state
from sidebar import show_sidebar
from pages.data_management import show_data_management
from pages.experiments import show_experiments
from pages.compare import show_compare_methods

# Configure page
st.set_page_config(
    page_title="Rating Benchmark",
    page_icon="🎬",
    layout="wide",
    initial_sidebar_state="expanded"
)

# Hide the default Streamlit sidebar pages
st.markdown("""
    <style>
        [data-testid="stSidebarNav"] {
            display: none;
        }

        [data-testid="stSidebarContent"] {
            padding-top: 2rem;
        }
    </style>
""", unsafe_allow_html=True)

PAGES = {
    "Data Management": show_data_management,
    "Experiments": show_experiments,
    "Compare Methods": show_compare_methods,
}


def main():
    """Main application logic"""
    initialize_session_state()
    show_sidebar(list(PAGES))

    # Route to appropriate page
    if st.session_state.page in PAGES:
        PAGES[st.session_state.page]()
    else:
        # Default fallback
        st.session_state.page = "Data Management"
        st.rerun()


if __name__ == "__main__":
    main()
