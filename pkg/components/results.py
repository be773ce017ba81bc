"""
Result table component
"""
from datetime import datetime

import streamlit as st


def show_results_table(frame, prefix, key):
    """Display a result table with a CSV download button"""
    st.dataframe(frame, use_container_width=True)
    st.download_button(
        label="📥 Download CSV",
        data=frame.to_csv(index=False, float_format="%.8f", lineterminator="\n"),
        file_name=f"{prefix}_{datetime.now().strftime('%Y%m%d_%H%M%S')}.csv",
        mime="text/csv",
        key=key
    )
