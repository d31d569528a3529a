#!/usr/bin/env python3
"""
자기 구동 3D 역진자 시뮬레이션 CLI

사용법:
    magpend balance      --config magpend.env --seed 0 --out runs/balance
    magpend sysid        --plant nonlinear --out runs/sysid
    magpend ilc          --iterations 4 --trajectory circle --out runs/ilc
    magpend steady-state --out runs/steady

종료 코드: 0 성공, 1 툴킷 오류, 2 인자 오류, 130 사용자 중단
"""

import argparse
import logging
import math
import os
import sys
from dataclasses import replace
from logging.handlers import RotatingFileHandler
from pathlib import Path

import numpy as np
from rich import box
from rich.console import Console
from rich.table import Table

from config import MagpendConfig, save_plant_env
from exceptions import MagpendDivergenceError, MagpendException, format_exception_message
from experiment_runner import (
    ilc_trajectory,
    run_balance_experiment,
    run_ilc_session,
    run_sysid_experiment,
    steady_state_report,
)
from trace_export import (
    export_frf,
    export_ilc_corrections,
    export_ilc_history,
    export_trace,
    save_run_summary,
)
from trajectory import TRAJECTORY_KINDS, generate_trajectory

logger = logging.getLogger("magpend")
console = Console()

LOG_FILE = "magpend.log"


def setup_logging(verbose: bool = False, log_file: str = LOG_FILE) -> None:
    """콘솔 + 회전 파일 로그 (파일 생성 실패 시 콘솔 전용)"""
    root = logging.getLogger()
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    for handler in list(root.handlers):
        root.removeHandler(handler)

    formatter = logging.Formatter('%(asctime)s - %(levelname)s - %(message)s')

    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    root.addHandler(console_handler)

    try:
        log_dir = os.path.dirname(log_file)
        if log_dir and not os.path.exists(log_dir):
            os.makedirs(log_dir, exist_ok=True)

        file_handler = RotatingFileHandler(
            log_file,
            maxBytes=50 * 1024 * 1024,  # 50MB
            backupCount=3,
            encoding='utf-8'
        )
        file_handler.setFormatter(formatter)
        root.addHandler(file_handler)

    except Exception as e:
        print(f"⚠️ 로그 파일 생성 실패: {e}")
        print(f"📝 콘솔 전용 모드로 실행됩니다.")


def config_echo(config: MagpendConfig) -> dict:
    """요약 JSON 에 기록할 설정 (라디안 값은 도 단위로 함께 기록)"""
    return {
        "plant": config.plant.to_dict(),
        "control_ts": config.control_ts,
        "q_diag": list(config.q_diag),
        "r_weight": config.r_weight,
        "sim_dt": config.sim_dt,
        "delay_steps": config.delay_steps,
        "noise_std_deg": math.degrees(config.noise_std),
        "xi_deg": math.degrees(config.xi),
        "u_d_deg": math.degrees(config.u_d),
        "grad_c1": config.grad_c1,
        "grad_c2": config.grad_c2,
        "compensation": config.compensation,
        "actuation_matrix": config.actuation_matrix_path or "synthetic",
        "seed": config.seed,
    }


def _degrees(values) -> str:
    return ", ".join(f"{math.degrees(v):+.4f}°" for v in np.asarray(values, dtype=float))


# ========================================
# 서브커맨드
# ========================================

def cmd_balance(config: MagpendConfig, args, out: Path) -> int:
    sim_cfg = config.sim_config()
    traj = None
    if args.track:
        traj = generate_trajectory(duration=sim_cfg.duration, Ts=sim_cfg.Ts, **config.trajectory_spec())

    try:
        result = run_balance_experiment(
            sim_cfg,
            weights=config.lqr_weights(),
            initial_alpha=config.initial_alpha,
            initial_beta=config.initial_beta,
            traj=traj,
            compensation=config.compensation,
            actuation=config.actuation_matrix(),
        )
    except MagpendDivergenceError as e:
        if e.trace is not None:
            export_trace(e.trace, out / "trace_diverged.csv")
            logger.error(f"💾 발산 직전 트레이스 저장: {out / 'trace_diverged.csv'}")
        raise

    export_trace(result.trace, out / "trace.csv")
    trace = result.trace
    ctrl_a, _ = result.controllers
    final = [trace["alpha"][-1], trace["phi"][-1], trace["beta"][-1], trace["theta"][-1]]

    table = Table(title="⚖️ 안정화 결과", box=box.ROUNDED, show_header=False)
    table.add_column("항목", style="cyan", width=22)
    table.add_column("값", style="white")
    table.add_row("K (평면당)", np.array2string(ctrl_a.K.ravel(), precision=4))
    table.add_row("프리필터 F", f"{ctrl_a.F:.6f}")
    table.add_row("스펙트럼 반경 ρ", f"{ctrl_a.spectral_radius:.6f}")
    table.add_row("최종 (α, φ, β, θ)", _degrees(final))
    table.add_row("수렴 시각", "미수렴" if result.settling_time is None else f"{result.settling_time:.2f} s")
    table.add_row("최종 û_d (α, β)", _degrees([trace["u_d_hat_a"][-1], trace["u_d_hat_b"][-1]]))
    console.print(table)

    save_run_summary({
        "subcommand": "balance",
        "config": config_echo(config),
        "K": ctrl_a.K.ravel(),
        "F": ctrl_a.F,
        "spectral_radius": ctrl_a.spectral_radius,
        "settling_time_s": result.settling_time,
        "final_state_deg": [math.degrees(v) for v in final],
        "steps": len(trace),
    }, out / "summary.json")
    return 0


def cmd_sysid(config: MagpendConfig, args, out: Path) -> int:
    result = run_sysid_experiment(config.sim_config(), config.multisine_config(),
                                  linear=(args.plant == "linear"))
    export_frf(result.frf, out / "frf.csv")

    fit, params = result.fit, result.params
    identified = replace(config.plant, d=params.d, m_dip=params.m_dip)
    save_plant_env(identified, out / "plant_identified.env",
                   header=f"magpend sysid ({args.plant}): 식별된 d, |m̃| 를 반영한 플랜트")
    errors = result.relative_errors
    table = Table(title="📡 시스템 식별 결과", box=box.ROUNDED)
    table.add_column("파라미터", style="cyan", width=18)
    table.add_column("식별값", style="white", justify="right")
    table.add_column("주입값", style="white", justify="right")
    table.add_column("상대 오차", style="yellow", justify="right")
    table.add_row("b0", f"{fit.b0:.4f}", "", "")
    table.add_row("a1", f"{fit.a1:.4f}", "", "")
    table.add_row("a0", f"{fit.a0:.4f}", "", "")
    table.add_row("지연 T", f"{fit.T * 1e3:.1f} ms", "", "")
    table.add_row("d", f"{params.d:.4e}", f"{result.injected['d']:.4e}", f"{errors['d'] * 100:.2f}%")
    table.add_row("|m̃|", f"{params.m_dip:.4f}", f"{result.injected['m_dip']:.4f}",
                  f"{errors['m_dip'] * 100:.2f}%")
    table.add_row("max σ_nl", f"{np.max(result.frf.sigma_nl):.3e}", "", "")
    console.print(table)

    peak = int(np.argmax(result.frf.sigma_nl))
    save_run_summary({
        "subcommand": "sysid",
        "plant": args.plant,
        "config": config_echo(config),
        "fit": {"b0": fit.b0, "a1": fit.a1, "a0": fit.a0, "T": fit.T, "residual": fit.residual,
                "residual_history": list(fit.residual_history),
                "natural_frequency_hz": fit.natural_frequency_hz, "damping_ratio": fit.damping_ratio},
        "physical": {"d": params.d, "m_dip": params.m_dip,
                     "consistency_residual": params.consistency_residual},
        "relative_errors": errors,
        "sigma_nl_peak_hz": float(result.frf.freqs[peak]),
    }, out / "summary.json")
    return 0


def cmd_ilc(config: MagpendConfig, args, out: Path) -> int:
    sim_cfg = config.sim_config()
    spec = config.trajectory_spec()
    if args.trajectory:
        spec["kind"] = args.trajectory
    iterations = config.ilc_iterations if args.iterations is None else args.iterations
    traj = ilc_trajectory(spec["kind"], spec["amplitude"], spec["period"], sim_cfg.Ts, spec["max_amplitude"])

    result = run_ilc_session(sim_cfg, traj, iterations, w_e=config.ilc_w_e, w_du=config.ilc_w_du,
                             weights=config.lqr_weights(), compensation=config.compensation,
                             actuation=config.actuation_matrix())

    for trace in result.traces:
        export_trace(trace, out / f"trace_iter{trace.iteration}.csv")
    export_ilc_history(result.rms_errors, out / "ilc_history.csv")
    export_ilc_corrections(result.corrections_a, result.corrections_b, sim_cfg.Ts, out / "ilc_corrections.csv")

    table = Table(title=f"🔁 ILC 반복별 RMS 추종 오차 ({traj.kind})", box=box.ROUNDED)
    table.add_column("반복", style="cyan", justify="right")
    table.add_column("RMS 오차", style="white", justify="right")
    table.add_column("반복 0 대비", style="yellow", justify="right")
    base = result.rms_errors[0]
    for n, rms in enumerate(result.rms_errors):
        table.add_row(str(n), f"{math.degrees(rms):.4f}°", f"{rms / base * 100:.1f}%" if base > 0 else "-")
    console.print(table)

    save_run_summary({
        "subcommand": "ilc",
        "config": config_echo(config),
        "trajectory": {"kind": traj.kind, "amplitude_deg": math.degrees(traj.amplitude),
                       "period": traj.period, "N": result.N},
        "w_e": config.ilc_w_e,
        "w_du": config.ilc_w_du,
        "iterations": iterations,
        "rms_error_deg": [math.degrees(v) for v in result.rms_errors],
    }, out / "summary.json")
    return 0


def cmd_steady_state(config: MagpendConfig, args, out: Path) -> int:
    xi = config.xi or math.radians(1.0)
    u_d = config.u_d or math.radians(1.0)
    report = steady_state_report(config.sim_config(), config.lqr_weights(), xi=xi, u_d=u_d)

    table = Table(title="📏 정상상태 외란 사상", box=box.ROUNDED)
    table.add_column("외란", style="cyan", width=16)
    table.add_column("x_ss (α, φ, α̇, φ̇)", style="white")
    table.add_column("‖x_ss‖", style="white", justify="right")
    table.add_column("시뮬 잔차", style="yellow", justify="right")
    table.add_row(f"ξ = {math.degrees(xi):.2f}°", _degrees(report.x_ss_xi),
                  f"{math.degrees(np.linalg.norm(report.x_ss_xi)):.4f}°", f"{report.sim_residual_xi:.2e}")
    table.add_row(f"u_d = {math.degrees(u_d):.2f}°", _degrees(report.x_ss_ud),
                  f"{math.degrees(np.linalg.norm(report.x_ss_ud)):.4f}°", f"{report.sim_residual_ud:.2e}")
    console.print(table)
    console.print(f"증폭비 ‖x_ss(ξ)‖ / ‖x_ss(u_d)‖ = [bold]{report.amplification_ratio:.3f}[/bold]")

    save_run_summary({
        "subcommand": "steady-state",
        "config": config_echo(config),
        "K": report.controller.K.ravel(),
        "F": report.controller.F,
        "xi_deg": math.degrees(xi),
        "u_d_deg": math.degrees(u_d),
        "x_ss_xi": report.x_ss_xi,
        "x_ss_ud": report.x_ss_ud,
        "sim_residual_xi": report.sim_residual_xi,
        "sim_residual_ud": report.sim_residual_ud,
        "amplification_ratio": report.amplification_ratio,
    }, out / "summary.json")
    return 0


COMMANDS = {
    "balance": cmd_balance,
    "sysid": cmd_sysid,
    "ilc": cmd_ilc,
    "steady-state": cmd_steady_state,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="magpend", description="자기 구동 3D 역진자 시뮬레이션 툴킷")
    subparsers = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="설정 파일 (dotenv 형식, 생략 시 ./.env 또는 기본값)")
    common.add_argument("--seed", type=int, default=None, help="난수 시드 (설정 SIM_SEED 대체)")
    common.add_argument("--out", default=None, help="출력 디렉터리 (기본 runs/<subcommand>)")
    common.add_argument("--verbose", action="store_true", help="DEBUG 로그")

    balance = subparsers.add_parser("balance", parents=[common], help="안정화 폐루프 실행")
    balance.add_argument("--track", action="store_true", help="설정 궤적 추종")

    sysid = subparsers.add_parser("sysid", parents=[common], help="진자 분리 액추에이터 주파수 영역 식별")
    sysid.add_argument("--plant", choices=("nonlinear", "linear"), default="nonlinear")

    ilc = subparsers.add_parser("ilc", parents=[common], help="반복 학습 제어 세션")
    ilc.add_argument("--iterations", type=int, default=None, help="학습 반복 수 (설정 ILC_ITERATIONS 대체)")
    ilc.add_argument("--trajectory", choices=TRAJECTORY_KINDS, default=None)

    subparsers.add_parser("steady-state", parents=[common], help="정상상태 외란 사상 출력")
    return parser


def main(argv=None) -> int:
    """메인 실행 함수"""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)

    try:
        config = MagpendConfig.from_env(args.config, load_dotenv_first=True)
        if args.seed is not None:
            if args.seed < 0:
                parser.error(f"--seed는 0 이상이어야 합니다: {args.seed}")
            config.seed = args.seed
        config.validate()
        logger.info(config)

        out = Path(args.out) if args.out else Path("runs") / args.command
        out.mkdir(parents=True, exist_ok=True)
        code = COMMANDS[args.command](config, args, out)
        logger.info(f"✅ {args.command} 완료: 결과 저장 위치 {out}")
        return code

    except KeyboardInterrupt:
        logger.info("\n사용자에 의해 중단되었습니다.")
        return 130
    except MagpendException as e:
        logger.error(format_exception_message(e))
        return 1
    except Exception as e:
        logger.error(f"프로그램 오류: {e}")
        logger.debug("상세 오류", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
