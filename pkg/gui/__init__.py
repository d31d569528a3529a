"""
magpend Streamlit 대시보드 패키지
"""
