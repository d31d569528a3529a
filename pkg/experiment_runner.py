"""
실험 실행기

시뮬레이션 엔진 위에서 네 가지 실험을 구동한다.
- 안정화 (balance): 초기 기울기에서 원점 또는 궤적 추종
- 시스템 식별 (sysid): 진자 분리 액추에이터 멀티사인 실험 → FRF → 피팅 → 물리 파라미터
- 반복 학습 제어 (ilc): 주기 궤적 반복 실행, 평면별 보정 갱신
- 정상상태 외란 사상 (steady-state): 정렬 오차 / 입력 오프셋 증폭 비교
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from compensation import steady_state_input_dist, steady_state_output_dist
from control import Controller, LqrWeights, design_controller, simulate_linear_closed_loop
from dynamics import PlanarState, linearized_model, plane_models
from field import ActuationMatrix
from ilc import IlcSession, error_from_trace
from simulation_engine import SimConfig, Trace, simulate_actuator_response, simulate_closed_loop
from sysid import (
    FrfEstimate,
    MultisineConfig,
    PhysicalParams,
    SosDelayFit,
    bin_frequencies,
    design_multisine,
    estimate_bla,
    fit_sos_delay,
    physical_params_from_fit,
    simulate_lti_periodic,
    spectra_from_records,
    weights_from_sigma,
)
from trajectory import DEFAULT_MAX_AMPLITUDE, Trajectory, generate_trajectory

logger = logging.getLogger(__name__)

SETTLING_TOLERANCE = math.radians(0.01)
STEADY_STATE_STEPS = 3000


# ========================================
# 결과 타입
# ========================================

@dataclass
class BalanceResult:
    trace: Trace
    controllers: tuple
    settling_time: Optional[float]


@dataclass
class SysidResult:
    frf: FrfEstimate
    fit: SosDelayFit
    params: PhysicalParams
    injected: dict

    @property
    def relative_errors(self) -> dict:
        """주입값 대비 상대 오차 (d, m_dip)"""
        return {
            "d": abs(self.params.d - self.injected["d"]) / self.injected["d"],
            "m_dip": abs(self.params.m_dip - self.injected["m_dip"]) / self.injected["m_dip"],
        }


@dataclass
class IlcResult:
    traces: list
    rms_errors: list
    corrections_a: list
    corrections_b: list
    error_norms_a: list = field(default_factory=list)
    error_norms_b: list = field(default_factory=list)
    N: int = 0


@dataclass
class SteadyStateReport:
    controller: Controller
    xi: float
    u_d: float
    x_ss_xi: np.ndarray
    x_ss_ud: np.ndarray
    sim_residual_xi: float
    sim_residual_ud: float

    @property
    def amplification_ratio(self) -> float:
        """‖x_ss(ξ)‖ / ‖x_ss(u_d)‖"""
        denominator = float(np.linalg.norm(self.x_ss_ud))
        return float(np.linalg.norm(self.x_ss_xi)) / denominator if denominator > 0 else math.inf


# ========================================
# 공용
# ========================================

def build_controllers(cfg: SimConfig, weights: Optional[LqrWeights] = None) -> tuple[Controller, Controller]:
    """평면별 LQR 제어기 (α 평면, β 평면)"""
    model_a, model_b = plane_models(cfg.plant, cfg.Ts)
    return design_controller(model_a, weights), design_controller(model_b, weights)


def settling_time(trace: Trace, tolerance: float = SETTLING_TOLERANCE) -> Optional[float]:
    """모든 각도가 이후 계속 tolerance 이내로 들어오는 첫 시각 (없으면 None)"""
    if len(trace) == 0:
        return None
    angles = np.column_stack([trace["alpha"], trace["phi"], trace["beta"], trace["theta"]])
    outside = np.nonzero(np.any(np.abs(angles) >= tolerance, axis=1))[0]
    if outside.size == 0:
        return float(trace["t"][0])
    last = int(outside[-1])
    if last + 1 >= len(trace):
        return None
    return float(trace["t"][last + 1])


# ========================================
# 안정화
# ========================================

def run_balance_experiment(cfg: SimConfig,
                           weights: Optional[LqrWeights] = None,
                           initial_alpha: float = 0.0,
                           initial_beta: float = 0.0,
                           traj: Optional[Trajectory] = None,
                           compensation: bool = False,
                           actuation: Optional[ActuationMatrix] = None) -> BalanceResult:
    """
    초기 기울기에서 안정화 (또는 궤적 추종) 폐루프 실행

    Args:
        cfg: 시뮬레이션 설정
        weights: LQR 가중치 (생략 시 기본값)
        initial_alpha, initial_beta: 초기 액추에이터 각도 (rad)
        traj: 설정점 궤적 (생략 시 0 상수)
        compensation: 오프셋 보상 활성화
        actuation: 구동 행렬 (생략 시 합성 행렬)

    Returns:
        BalanceResult
    """
    logger.info("=" * 80)
    logger.info(f"⚖️ 안정화 실험 시작: α₀ = {math.degrees(initial_alpha):.2f}°, "
                f"β₀ = {math.degrees(initial_beta):.2f}°, {cfg.duration:.1f} s")
    logger.info("=" * 80)

    controllers = build_controllers(cfg, weights)
    if traj is None:
        traj = generate_trajectory("constant", 0.0, cfg.duration, cfg.duration, cfg.Ts)
    initial = (PlanarState(initial_alpha, 0.0, 0.0, 0.0), PlanarState(initial_beta, 0.0, 0.0, 0.0))
    trace = simulate_closed_loop(cfg, controllers, traj, compensation=compensation,
                                 actuation=actuation, initial=initial)

    t_settle = settling_time(trace)
    if t_settle is None:
        logger.warning(f"⚠️ {cfg.duration:.1f} s 내에 ±{math.degrees(SETTLING_TOLERANCE):.2f}° 이내로 수렴하지 않았습니다")
    else:
        logger.info(f"✅ 수렴 시각: {t_settle:.2f} s")
    return BalanceResult(trace=trace, controllers=controllers, settling_time=t_settle)


# ========================================
# 시스템 식별
# ========================================

def run_sysid_experiment(cfg: SimConfig, ms_cfg: MultisineConfig, linear: bool = False,
                         seed: Optional[int] = None) -> SysidResult:
    """
    진자 분리 액추에이터 주파수 영역 식별

    실현 i 마다 위상 시드 seed + i 로 멀티사인을 설계하고 p_total 주기를 인가,
    과도 주기를 버리고 주기 평균한 스펙트럼으로 BLA 와 σ_nl 을 추정한 뒤
    σ_nl 가중 2차 + 지연 모델을 피팅한다.

    Args:
        cfg: 시뮬레이션 설정 (플랜트, dt, 지연, 노이즈)
        ms_cfg: 멀티사인 설정 (fs 가 제어 주파수)
        linear: True 면 이산 선형 모델의 주기 정상상태 응답 사용 (σ_nl 기준 해)
        seed: 기본 시드 (생략 시 cfg.seed)

    Returns:
        SysidResult
    """
    seed = cfg.seed if seed is None else seed
    plant = cfg.plant.detached()
    Ts = ms_cfg.Ts
    n_samples = ms_cfg.N * ms_cfg.p_total

    logger.info("=" * 80)
    logger.info(f"📡 시스템 식별 시작: {'선형' if linear else '비선형'} 플랜트, r = {ms_cfg.r}, "
                f"{ms_cfg.f_min}–{ms_cfg.f_max} Hz, 진폭 {math.degrees(ms_cfg.amp):.2f}° RMS")
    logger.info("=" * 80)

    if linear:
        model = linearized_model(plant, Ts)
        reduced = [0, 2]
        A = model.A[np.ix_(reduced, reduced)]
        B = model.B[reduced, 0]
        C = np.array([1.0, 0.0])

    u_records, y_records = [], []
    for i in range(ms_cfg.r):
        u_period = design_multisine(ms_cfg, seed + i)
        u = np.tile(u_period, ms_cfg.p_total)
        noise = None
        if cfg.noise_std > 0:
            noise = np.random.default_rng([seed, i]).normal(0.0, cfg.noise_std, size=n_samples)

        if linear:
            y = simulate_lti_periodic(A, B, C, u_period, ms_cfg.p_total, cfg.delay_steps)
            if noise is not None:
                y = y + noise
        else:
            y = simulate_actuator_response(plant, u, Ts, cfg.dt, cfg.delay_steps, noise)

        u_records.append(u)
        y_records.append(y)
        logger.debug(f"  실현 {i + 1}/{ms_cfg.r} 완료 (최대 |α| = {math.degrees(np.max(np.abs(y))):.3f}°)")

    U, Y = spectra_from_records(u_records, y_records, ms_cfg)
    frf = estimate_bla(U, Y, bin_frequencies(ms_cfg))
    frf = frf.with_weights(weights_from_sigma(frf.sigma_nl, frf.G_bla))
    fit = fit_sos_delay(frf, Ts=Ts)
    params = physical_params_from_fit(fit, plant)

    injected = {"d": plant.d, "m_dip": plant.m_dip}
    result = SysidResult(frf=frf, fit=fit, params=params, injected=injected)
    errors = result.relative_errors
    logger.info(f"🔎 식별 결과: d = {params.d:.4e} (오차 {errors['d'] * 100:.2f}%), "
                f"m_dip = {params.m_dip:.4f} (오차 {errors['m_dip'] * 100:.2f}%), "
                f"일관성 잔차 = {params.consistency_residual:.3e}")
    return result


# ========================================
# 반복 학습 제어
# ========================================

def ilc_trajectory(kind: str, amplitude: float, period: float, Ts: float,
                   max_amplitude: float = DEFAULT_MAX_AMPLITUDE) -> Trajectory:
    """ILC 1회 실행용 궤적 (N + 1 샘플, N = 주기/Ts)"""
    N = int(round(period / Ts))
    return generate_trajectory(kind, amplitude, period, (N + 1) * Ts, Ts, max_amplitude)


def rms_tracking_error(trace: Trace, N: int) -> float:
    """샘플 1..N 에서 두 평면 실제 액추에이터 각도의 RMS 추종 오차"""
    window = slice(1, N + 1)
    e_a = trace["alpha_sp"][window] - trace["alpha"][window]
    e_b = trace["beta_sp"][window] - trace["beta"][window]
    return float(np.sqrt(np.mean(np.concatenate([e_a, e_b]) ** 2)))


def run_ilc_session(cfg: SimConfig,
                    traj: Trajectory,
                    n_iters: int,
                    w_e: float = 100.0,
                    w_du: float = 10.0,
                    weights: Optional[LqrWeights] = None,
                    compensation: bool = False,
                    actuation: Optional[ActuationMatrix] = None) -> IlcResult:
    """
    주기 궤적 ILC 세션

    반복 0 은 보정 없이 실행하고, 매 반복 후 측정 오차로 평면별 보정을 갱신해 다시 실행한다.
    반복 n 의 측정 노이즈 시드는 cfg.seed + n.

    Args:
        cfg: 시뮬레이션 설정 (duration 은 궤적 길이로 대체)
        traj: 주기 궤적 (ilc_trajectory 로 생성, N + 1 샘플 이상)
        n_iters: 학습 반복 수 (총 n_iters + 1 회 실행)
        w_e, w_du: ILC 가중치
        weights: LQR 가중치

    Returns:
        IlcResult (반복별 트레이스, RMS 오차, 보정 신호)

    Raises:
        MagpendDivergenceError: 어느 반복에서든 발산
    """
    N = traj.steps_per_period
    run_cfg = replace(cfg, duration=(N + 1) * cfg.Ts)
    controllers = build_controllers(run_cfg, weights)
    ctrl_a, ctrl_b = controllers
    session_a = IlcSession.create(ctrl_a.model, ctrl_a.K, N, w_e, w_du, cfg.delay_steps)
    session_b = IlcSession.create(ctrl_b.model, ctrl_b.K, N, w_e, w_du, cfg.delay_steps)
    initial = (PlanarState(traj.alpha_sp[0], 0.0, traj.alpha_sp_dot[0], 0.0),
               PlanarState(traj.beta_sp[0], 0.0, traj.beta_sp_dot[0], 0.0))

    logger.info("=" * 80)
    logger.info(f"🔁 ILC 세션 시작: {traj.kind}, 진폭 {math.degrees(traj.amplitude):.1f}°, "
                f"주기 {traj.period:.1f} s (N = {N}), 반복 {n_iters}회, w_e = {w_e}, w_du = {w_du}")
    logger.info("=" * 80)

    result = IlcResult(traces=[], rms_errors=[], corrections_a=[], corrections_b=[], N=N)
    for n in range(n_iters + 1):
        noise = run_cfg.measurement_noise(seed=cfg.seed + n)
        trace = simulate_closed_loop(run_cfg, controllers, traj, compensation=compensation,
                                     ilc_corr=(session_a.u, session_b.u), actuation=actuation,
                                     initial=initial, noise=noise)
        trace.iteration = n
        rms = rms_tracking_error(trace, N)

        result.traces.append(trace)
        result.rms_errors.append(rms)
        result.corrections_a.append(session_a.u.copy())
        result.corrections_b.append(session_b.u.copy())
        logger.info(f"  반복 {n}: RMS 추종 오차 = {math.degrees(rms):.4f}°")

        if n < n_iters:
            session_a.update(error_from_trace(trace, "alpha", N))
            session_b.update(error_from_trace(trace, "beta", N))

    result.error_norms_a = list(session_a.error_norms)
    result.error_norms_b = list(session_b.error_norms)
    if len(result.rms_errors) > 1 and result.rms_errors[0] > 0:
        ratio = result.rms_errors[-1] / result.rms_errors[0]
        logger.info(f"📉 RMS 오차 {math.degrees(result.rms_errors[0]):.4f}° → "
                    f"{math.degrees(result.rms_errors[-1]):.4f}° ({ratio * 100:.1f}%)")
    return result


# ========================================
# 정상상태 외란 사상
# ========================================

def steady_state_report(cfg: SimConfig,
                        weights: Optional[LqrWeights] = None,
                        xi: float = math.radians(1.0),
                        u_d: float = math.radians(1.0),
                        n_steps: int = STEADY_STATE_STEPS) -> SteadyStateReport:
    """
    ξ, u_d 에 대한 정상상태 오차 예측과 선형 폐루프 시뮬레이션 교차 검증

    Returns:
        SteadyStateReport (sim_residual_*: 시뮬레이션 최종 상태와 예측의 최대 절대 차)
    """
    model = linearized_model(cfg.plant, cfg.Ts)
    controller = design_controller(model, weights)
    K = controller.K

    x_xi = steady_state_output_dist(model, K, xi)
    x_ud = steady_state_input_dist(model, K, u_d)

    states_xi, _ = simulate_linear_closed_loop(model, K, n_steps, meas_offset=np.array([xi, xi, 0.0, 0.0]))
    states_ud, _ = simulate_linear_closed_loop(model, K, n_steps, input_offset=u_d)

    report = SteadyStateReport(
        controller=controller,
        xi=xi,
        u_d=u_d,
        x_ss_xi=x_xi,
        x_ss_ud=x_ud,
        sim_residual_xi=float(np.max(np.abs(states_xi[-1] - x_xi))),
        sim_residual_ud=float(np.max(np.abs(states_ud[-1] - x_ud))),
    )
    logger.info(f"📏 정상상태: ξ = {math.degrees(xi):.2f}° → α_ss = {math.degrees(x_xi[0]):.3f}°, "
                f"u_d = {math.degrees(u_d):.2f}° → α_ss = {math.degrees(x_ud[0]):.3f}° "
                f"(증폭비 {report.amplification_ratio:.2f})")
    return report
