"""
폐루프 시뮬레이션 엔진

제어 주기 Ts 마다:
  측정 (+ 정렬 오차 ξ + 노이즈) → 각도 보정 → 유한차분 속도 → 프리필터 설정점
  → 평면별 피드백 + ILC 보정 → 입력 오프셋 보정 → 보정 오프셋 u_d 및 입력 지연
  → 자기장/코일 전류 할당 → 평면별 비선형 플랜트 RK4 적분 (구배 외란 포함)
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from compensation import CompensationConfig, OffsetEstimator, correct_angles, correct_input
from control import Controller, LowPassFilter, feedback, finite_diff_velocity
from dynamics import PlanarState, PlantParams, rk4_step
from exceptions import MagpendDimensionError, MagpendDivergenceError, MagpendInvalidConfigError
from field import (
    ActuationMatrix,
    allocate_field,
    currents_from_field,
    field_angles,
    field_from_currents,
    synthetic_actuation_matrix,
)
from trajectory import Trajectory

logger = logging.getLogger(__name__)

TRACE_COLUMNS = (
    "t",
    "alpha", "phi", "beta", "theta",
    "alpha_meas", "phi_meas", "beta_meas", "theta_meas",
    "alpha_sp", "beta_sp",
    "u_alpha", "u_beta",
    "bx", "by", "bz",
    "i1", "i2", "i3", "i4", "i5", "i6", "i7", "i8",
    "phi_ss_hat", "u_d_hat_a", "u_d_hat_b",
)
DIVERGENCE_LIMIT = math.pi / 2.0


@dataclass(frozen=True)
class SimConfig:
    """시뮬레이션 설정 (지연/노이즈/외란 모델 포함)"""
    plant: PlantParams = field(default_factory=PlantParams)
    Ts: float = 0.01
    dt: float = 1e-4
    delay_steps: int = 2
    noise_std: float = math.radians(0.05)
    xi: float = 0.0                  # 측정 정렬 오차 (rad), 두 평면 공통
    u_d: float = 0.0                 # 자기장 보정 오프셋 (rad), 두 평면 공통
    grad_c1: float = 3.0e-3          # N·m/rad
    grad_c2: float = 4.6e-2          # N·m/rad²
    duration: float = 10.0
    seed: int = 0
    compensation: CompensationConfig = field(default_factory=CompensationConfig)
    velocity_cutoff_hz: Optional[float] = None

    def __post_init__(self):
        if not self.Ts > 0:
            raise MagpendInvalidConfigError(f"제어 주기는 0보다 커야 합니다: {self.Ts}", key="CONTROL_TS")
        if not self.dt > 0:
            raise MagpendInvalidConfigError(f"적분 스텝은 0보다 커야 합니다: {self.dt}", key="SIM_DT")
        ratio = self.Ts / self.dt
        if round(ratio) < 1 or abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise MagpendInvalidConfigError(f"dt({self.dt})가 Ts({self.Ts})를 나누어떨어지게 해야 합니다",
                                            key="SIM_DT")
        if self.delay_steps < 0:
            raise MagpendInvalidConfigError(f"입력 지연은 0 이상이어야 합니다: {self.delay_steps}",
                                            key="SIM_DELAY_STEPS")
        if not self.duration > 0:
            raise MagpendInvalidConfigError(f"시뮬레이션 길이는 0보다 커야 합니다: {self.duration}",
                                            key="SIM_DURATION")
        if self.noise_std < 0:
            raise MagpendInvalidConfigError(f"노이즈 표준편차는 0 이상이어야 합니다: {self.noise_std}",
                                            key="SIM_NOISE_STD_DEG")

    @property
    def substeps(self) -> int:
        return int(round(self.Ts / self.dt))

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.Ts))

    def measurement_noise(self, n_steps: Optional[int] = None, seed: Optional[int] = None) -> np.ndarray:
        """시드 고정 측정 노이즈 (n_steps × 4: α, φ, β, θ)"""
        n_steps = self.n_steps if n_steps is None else n_steps
        if self.noise_std == 0:
            return np.zeros((n_steps, 4))
        rng = np.random.default_rng(self.seed if seed is None else seed)
        return rng.normal(0.0, self.noise_std, size=(n_steps, 4))


@dataclass
class Trace:
    """제어 주기 균일 샘플 시계열 (열 순서 TRACE_COLUMNS 고정)"""
    data: np.ndarray
    columns: tuple = TRACE_COLUMNS
    iteration: Optional[int] = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float).reshape(-1, len(self.columns))

    def __len__(self) -> int:
        return self.data.shape[0]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    @classmethod
    def empty(cls) -> "Trace":
        return cls(np.empty((0, len(TRACE_COLUMNS))))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.data, columns=list(self.columns))

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "Trace":
        missing = [c for c in TRACE_COLUMNS if c not in frame.columns]
        if missing:
            raise MagpendDimensionError(f"트레이스 열 누락: {missing}")
        return cls(frame[list(TRACE_COLUMNS)].to_numpy(dtype=float))


def simulate_closed_loop(cfg: SimConfig,
                         controllers: Sequence[Controller],
                         traj: Trajectory,
                         compensation: bool = False,
                         ilc_corr: Optional[Sequence[np.ndarray]] = None,
                         actuation: Optional[ActuationMatrix] = None,
                         initial: Optional[Sequence[PlanarState]] = None,
                         noise: Optional[np.ndarray] = None) -> Trace:
    """
    3D 폐루프 시뮬레이션 (두 평면 독립 비선형 플랜트)

    Args:
        cfg: 시뮬레이션 설정
        controllers: (α 평면, β 평면) 제어기
        traj: 설정점 궤적 (길이 ≥ cfg.n_steps)
        compensation: 정렬 오차/입력 오프셋 보상 활성화
        ilc_corr: 평면별 ILC 보정 신호 (짧으면 이후 0)
        actuation: 구동 행렬 (생략 시 합성 행렬)
        initial: 평면별 초기 상태 (생략 시 원점)
        noise: 측정 노이즈 (n_steps × 4), 생략 시 cfg 시드로 생성

    Returns:
        Trace

    Raises:
        MagpendDivergenceError: |각도| > π/2 (부분 트레이스 포함)
    """
    n_steps = cfg.n_steps
    if len(traj) < n_steps:
        raise MagpendDimensionError(f"궤적 길이 {len(traj)} < 시뮬레이션 스텝 {n_steps}")
    ctrl_a, ctrl_b = controllers
    plant = cfg.plant
    actuation = actuation or synthetic_actuation_matrix()
    actuation.require_full_rank()
    noise = cfg.measurement_noise(n_steps) if noise is None else np.asarray(noise, dtype=float)
    if noise.shape != (n_steps, 4):
        raise MagpendDimensionError(f"노이즈 배열 차원 {noise.shape} ≠ ({n_steps}, 4)")

    corr_a, corr_b = (None, None) if ilc_corr is None else ilc_corr
    est_a = OffsetEstimator.for_controller(ctrl_a, cfg.compensation, enabled=compensation)
    est_b = OffsetEstimator.for_controller(ctrl_b, cfg.compensation, enabled=compensation)
    velocity_filters = None
    if cfg.velocity_cutoff_hz:
        velocity_filters = [LowPassFilter(cfg.velocity_cutoff_hz, cfg.Ts) for _ in range(4)]

    sa, sb = (PlanarState(0.0, 0.0, 0.0, 0.0),) * 2 if initial is None else initial
    sa, sb = PlanarState(*map(float, sa)), PlanarState(*map(float, sb))
    Ts, dt, c1, c2 = cfg.Ts, cfg.dt, cfg.grad_c1, cfg.grad_c2
    substeps = cfg.substeps

    data = np.zeros((n_steps, len(TRACE_COLUMNS)))
    prev = None
    pending = deque()

    for k in range(n_steps):
        # 측정
        raw = (sa.a + cfg.xi + noise[k, 0], sa.p + cfg.xi + noise[k, 1],
               sb.a + cfg.xi + noise[k, 2], sb.p + cfg.xi + noise[k, 3])
        if compensation:
            a_c, p_c = correct_angles(raw[0], raw[1], est_a.phi_ss)
            b_c, q_c = correct_angles(raw[2], raw[3], est_b.phi_ss)
            angles = (a_c, p_c, b_c, q_c)
        else:
            angles = raw

        if prev is None:
            rates = [0.0, 0.0, 0.0, 0.0]
        else:
            rates = [finite_diff_velocity(prev[i], angles[i], Ts) for i in range(4)]
        if velocity_filters is not None:
            rates = [f.update(r) for f, r in zip(velocity_filters, rates)]
        prev = angles

        x_a = (angles[0], angles[1], rates[0], rates[1])
        x_b = (angles[2], angles[3], rates[2], rates[3])
        a_sp, a_sp_dot = traj.alpha_sp[k], traj.alpha_sp_dot[k]
        b_sp, b_sp_dot = traj.beta_sp[k], traj.beta_sp_dot[k]

        if compensation:
            est_a.step(raw[1], (x_a[0] - a_sp, x_a[1], x_a[2] - a_sp_dot, x_a[3]))
            est_b.step(raw[3], (x_b[0] - b_sp, x_b[1], x_b[2] - b_sp_dot, x_b[3]))

        # 피드백 + ILC 보정 + 입력 오프셋 보정
        u_a = feedback(ctrl_a.setpoint(a_sp, a_sp_dot), x_a, ctrl_a.K)
        u_b = feedback(ctrl_b.setpoint(b_sp, b_sp_dot), x_b, ctrl_b.K)
        if corr_a is not None and k < len(corr_a):
            u_a += corr_a[k]
        if corr_b is not None and k < len(corr_b):
            u_b += corr_b[k]
        if compensation:
            u_a = correct_input(u_a, est_a.u_d_hat)
            u_b = correct_input(u_b, est_b.u_d_hat)

        # 보정 오프셋 + 입력 지연 (t < 0 구간은 중립 명령 0 − u_d)
        applied = (u_a - cfg.u_d, u_b - cfg.u_d)
        if k == 0:
            pending.extend([(-cfg.u_d, -cfg.u_d)] * cfg.delay_steps)
        pending.append(applied)
        eff_a, eff_b = pending.popleft()

        # 자기장 → 코일 전류 → 실현 자기장
        currents = currents_from_field(allocate_field(eff_a, eff_b, plant.b_mag), actuation)
        realized, _ = field_from_currents(currents, actuation)
        ua_real, ub_real, _ = field_angles(realized)

        data[k, 0] = k * Ts
        data[k, 1:5] = (sa.a, sa.p, sb.a, sb.p)
        data[k, 5:9] = raw
        data[k, 9:13] = (a_sp, b_sp, u_a, u_b)
        data[k, 13:16] = realized.b
        data[k, 16:24] = currents
        data[k, 24:27] = (est_a.phi_ss, est_a.u_d_hat, est_b.u_d_hat)

        for _ in range(substeps):
            sa = rk4_step(sa, ua_real, plant, dt, c1, c2)
            sb = rk4_step(sb, ub_real, plant, dt, c1, c2)

        if max(abs(sa.a), abs(sa.p), abs(sb.a), abs(sb.p)) > DIVERGENCE_LIMIT or not all(
                math.isfinite(v) for v in (*sa, *sb)):
            partial = Trace(data[:k + 1].copy())
            logger.error(f"💥 폐루프 발산: t = {(k + 1) * Ts:.2f} s, α = {sa.a:.3f}, φ = {sa.p:.3f}, "
                         f"β = {sb.a:.3f}, θ = {sb.p:.3f}")
            raise MagpendDivergenceError(
                f"각도가 ±π/2 를 초과했습니다 (t = {(k + 1) * Ts:.2f} s)",
                trace=partial,
                step=k,
            )

    return Trace(data)


def simulate_actuator_response(plant: PlantParams, u, Ts: float, dt: float, delay_steps: int = 0,
                               noise: Optional[np.ndarray] = None) -> np.ndarray:
    """
    진자 분리 액추에이터 개루프 응답 (시스템 식별용)

    정지 상태에서 시작, 스텝 k 에서 α(k·Ts) 를 측정한 뒤 u[k − delay] 를 영차 유지로 인가.

    Returns:
        측정 α 시퀀스 (len(u))
    """
    plant = plant if plant.is_detached else plant.detached()
    u = np.asarray(u, dtype=float)
    substeps = int(round(Ts / dt))
    y = np.empty(u.size)
    s = PlanarState(0.0, 0.0, 0.0, 0.0)
    for k in range(u.size):
        y[k] = s.a
        u_eff = u[k - delay_steps] if k >= delay_steps else 0.0
        for _ in range(substeps):
            s = rk4_step(s, u_eff, plant, dt)
    if noise is not None:
        y = y + noise
    return y
