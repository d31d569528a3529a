"""
자기 구동 역진자 실험 대시보드

Streamlit 기반 웹 대시보드 (내보낸 CSV/JSON 조회, CLI 실행)
"""

import json
import math
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import plotly.graph_objects as go
import streamlit as st
from plotly.subplots import make_subplots

# 프로젝트 루트 경로 추가
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from gui.utils.process_monitor import SUBCOMMANDS, ExperimentProcessMonitor
from simulation_engine import TRACE_COLUMNS
from trajectory import TRAJECTORY_KINDS

ANGLE_COLUMNS = ("alpha", "phi", "beta", "theta", "alpha_meas", "phi_meas", "beta_meas", "theta_meas",
                 "alpha_sp", "beta_sp", "u_alpha", "u_beta", "phi_ss_hat", "u_d_hat_a", "u_d_hat_b")

st.set_page_config(
    page_title="🧲 자기 구동 역진자",
    page_icon="🧲",
    layout="wide",
    initial_sidebar_state="expanded"
)


def initialize_session_state():
    """세션 상태 초기화"""
    if 'process_monitor' not in st.session_state:
        st.session_state.process_monitor = ExperimentProcessMonitor(output_root=project_root / "runs",
                                                                    log_file=project_root / "magpend.log")


def render_sidebar():
    """사이드바: 실험 실행 제어"""
    monitor = st.session_state.process_monitor
    with st.sidebar:
        st.header("⚙️ 실험 실행")

        subcommand = st.selectbox("서브커맨드", SUBCOMMANDS)
        config = st.text_input("설정 파일", value="")
        seed = st.number_input("시드", min_value=0, value=0, step=1)

        extra = []
        if subcommand == "sysid":
            extra += ["--plant", st.radio("플랜트", ("nonlinear", "linear"), horizontal=True)]
        elif subcommand == "ilc":
            extra += ["--trajectory", st.selectbox("궤적", TRAJECTORY_KINDS, index=1)]
            extra += ["--iterations", str(int(st.number_input("반복 수", min_value=0, value=4, step=1)))]
        elif subcommand == "balance" and st.checkbox("설정 궤적 추종"):
            extra.append("--track")

        col1, col2 = st.columns(2)
        with col1:
            if st.button("▶️ 실행", type="primary", use_container_width=True):
                if monitor.start_run(subcommand, config=config or None, seed=int(seed), extra_args=extra):
                    st.success(f"{subcommand} 시작!")
                    st.rerun()
                else:
                    st.error("시작 실패 (이미 실행 중인지 확인하세요)")
        with col2:
            if st.button("⏹️ 중지", use_container_width=True):
                if monitor.stop_run():
                    st.info("실행 중지")
                    st.rerun()

        st.divider()
        st.subheader("📊 상태")
        status = monitor.get_status()
        status_map = {
            "RUNNING": "🟢 실행중",
            "FINISHED": "✅ 완료",
            "FAILED": "🔴 실패",
            "STOPPED": "⚪ 중지",
            "ERROR": "🔴 오류",
            "IDLE": "⚪ 대기",
        }
        st.metric("프로세스", status_map.get(status["status"], status["status"]))
        if status["process_pid"]:
            st.caption(f"PID: {status['process_pid']} · {status['command']} → {status['out_dir']}")
        if status["error"]:
            st.error(status["error"])


# ========================================
# 그래프
# ========================================

def trace_figure(frame: pd.DataFrame, columns) -> go.Figure:
    """트레이스 열 시계열 (각도 열은 도 단위)"""
    fig = go.Figure()
    for column in columns:
        values = frame[column]
        if column in ANGLE_COLUMNS:
            values = np.degrees(values)
        fig.add_trace(go.Scatter(x=frame["t"], y=values, mode="lines", name=column))
    fig.update_layout(xaxis_title="t (s)", yaxis_title="값 (각도: °)", height=450)
    return fig


def bode_figure(frf: pd.DataFrame, fit: dict = None) -> go.Figure:
    """BLA 크기/위상, σ_nl, 가중치, 피팅 모델"""
    G = frf["re_g"].to_numpy() + 1j * frf["im_g"].to_numpy()
    f = frf["f_hz"].to_numpy()
    fig = make_subplots(rows=2, cols=1, shared_xaxes=True, vertical_spacing=0.08,
                        subplot_titles=("크기 (dB)", "위상 (°)"))
    fig.add_trace(go.Scatter(x=f, y=20 * np.log10(np.abs(G)), mode="markers", name="BLA"), row=1, col=1)
    fig.add_trace(go.Scatter(x=f, y=20 * np.log10(np.maximum(frf["sigma_nl"], 1e-300)), mode="lines",
                             name="σ_nl"), row=1, col=1)
    fig.add_trace(go.Scatter(x=f, y=np.degrees(np.unwrap(np.angle(G))), mode="markers", name="BLA 위상"),
                  row=2, col=1)

    if fit:
        s = 2j * np.pi * f
        model = np.exp(-s * fit["T"]) * fit["b0"] / (s * s + fit["a1"] * s + fit["a0"])
        fig.add_trace(go.Scatter(x=f, y=20 * np.log10(np.abs(model)), mode="lines", name="피팅"), row=1, col=1)
        fig.add_trace(go.Scatter(x=f, y=np.degrees(np.unwrap(np.angle(model))), mode="lines",
                                 name="피팅 위상"), row=2, col=1)

    fig.update_xaxes(type="log", title_text="f (Hz)", row=2, col=1)
    fig.update_xaxes(type="log", row=1, col=1)
    fig.update_layout(height=600)
    return fig


def ilc_figure(history: pd.DataFrame) -> go.Figure:
    fig = go.Figure(go.Scatter(x=history["iteration"], y=history["rms_error_deg"], mode="lines+markers"))
    fig.update_layout(xaxis_title="반복", yaxis_title="RMS 추종 오차 (°)", height=400)
    return fig


# ========================================
# 실행 결과 뷰
# ========================================

def render_run(run: dict):
    run_dir = Path(run["path"])
    summary = {}
    if (run_dir / "summary.json").exists():
        with open(run_dir / "summary.json", 'r', encoding='utf-8') as f:
            summary = json.load(f)

    traces = sorted(run_dir.glob("trace*.csv"))
    tabs = st.tabs(["📈 트레이스", "📡 FRF", "🔁 ILC", "📋 요약"])

    with tabs[0]:
        if traces:
            selected = st.selectbox("트레이스 파일", traces, format_func=lambda p: p.name)
            frame = pd.read_csv(selected, float_precision="round_trip")
            columns = st.multiselect("열", [c for c in TRACE_COLUMNS if c != "t"],
                                     default=["alpha", "alpha_sp", "beta", "beta_sp"])
            if columns:
                st.plotly_chart(trace_figure(frame, columns), use_container_width=True)
        else:
            st.info("트레이스가 없습니다")

    with tabs[1]:
        frf_path = run_dir / "frf.csv"
        if frf_path.exists():
            frf = pd.read_csv(frf_path, float_precision="round_trip")
            st.plotly_chart(bode_figure(frf, summary.get("fit")), use_container_width=True)
            if "physical" in summary:
                col1, col2, col3 = st.columns(3)
                col1.metric("d", f"{summary['physical']['d']:.4e}")
                col2.metric("|m̃|", f"{summary['physical']['m_dip']:.4f}")
                col3.metric("σ_nl 최대 주파수", f"{summary.get('sigma_nl_peak_hz', math.nan):.2f} Hz")
        else:
            st.info("FRF 결과가 없습니다")

    with tabs[2]:
        history_path = run_dir / "ilc_history.csv"
        if history_path.exists():
            history = pd.read_csv(history_path, float_precision="round_trip")
            st.plotly_chart(ilc_figure(history), use_container_width=True)
            st.dataframe(history, use_container_width=True)
        else:
            st.info("ILC 이력이 없습니다")

    with tabs[3]:
        st.json(summary)


def render_main_dashboard():
    """메인 대시보드"""
    st.title("🧲 자기 구동 3D 역진자 실험")
    monitor = st.session_state.process_monitor

    runs = monitor.list_runs()
    if not runs:
        st.info("실행 결과가 없습니다. 사이드바에서 실험을 실행하세요.")
    else:
        run = st.selectbox("실행 결과", runs, format_func=lambda r: f"{r['name']} ({r['subcommand']})")
        render_run(run)

    st.divider()
    with st.expander("📜 최근 로그"):
        lines = st.number_input("표시할 라인 수", min_value=10, max_value=500, value=50, step=10)
        logs = monitor.get_recent_logs(lines=int(lines))
        if logs:
            st.code("".join(logs), language="log")
        else:
            st.info("로그가 없습니다")


def main():
    """메인 함수"""
    initialize_session_state()
    render_sidebar()
    render_main_dashboard()

    st.divider()
    st.caption("🧲 magpend 대시보드 | Powered by Streamlit")


if __name__ == "__main__":
    main()
