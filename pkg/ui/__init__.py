# ui: Streamlit pages
