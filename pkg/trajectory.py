"""
설정점 궤적 생성 (상수 / 원 / 8자)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from exceptions import MagpendInvalidConfigError

TRAJECTORY_KINDS = ("constant", "circle", "figure_eight")
DEFAULT_MAX_AMPLITUDE = math.radians(8.0)


@dataclass(frozen=True)
class Trajectory:
    """제어 주기 Ts 로 샘플된 (α_sp, β_sp) 와 해석적 미분"""
    kind: str
    amplitude: float
    period: float
    Ts: float
    t: np.ndarray
    alpha_sp: np.ndarray
    beta_sp: np.ndarray
    alpha_sp_dot: np.ndarray
    beta_sp_dot: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    @property
    def steps_per_period(self) -> int:
        return int(round(self.period / self.Ts))


def generate_trajectory(kind: str, amplitude: float, period: float, duration: float, Ts: float,
                        max_amplitude: float = DEFAULT_MAX_AMPLITUDE) -> Trajectory:
    """
    설정점 궤적 생성

    circle: α_sp = A·cos(2πt/T_p), β_sp = A·sin(2πt/T_p)
    figure_eight: α_sp = A·sin(2πt/T_p), β_sp = A·sin(4πt/T_p)
    constant: α_sp = A, β_sp = 0

    Args:
        kind: 궤적 종류
        amplitude: 진폭 (rad)
        period: 주기 T_p (s)
        duration: 길이 (s)
        Ts: 제어 주기 (s)
        max_amplitude: 진폭 상한 (rad), 기본 8°

    Raises:
        MagpendInvalidConfigError: 알 수 없는 종류, 주기 ≤ 0, 진폭 상한 초과
    """
    if kind not in TRAJECTORY_KINDS:
        raise MagpendInvalidConfigError(f"알 수 없는 궤적 종류: {kind} (가능: {TRAJECTORY_KINDS})", key="TRAJ_KIND")
    if not period > 0:
        raise MagpendInvalidConfigError(f"궤적 주기는 0보다 커야 합니다: {period}", key="TRAJ_PERIOD")
    if abs(amplitude) > max_amplitude + 1e-12:
        raise MagpendInvalidConfigError(
            f"궤적 진폭 {math.degrees(amplitude):.2f}° 가 상한 {math.degrees(max_amplitude):.2f}° 를 초과합니다",
            key="TRAJ_AMPLITUDE_DEG",
        )

    n_steps = int(round(duration / Ts))
    t = np.arange(n_steps) * Ts
    w = 2.0 * math.pi / period

    if kind == "circle":
        alpha, beta = amplitude * np.cos(w * t), amplitude * np.sin(w * t)
        alpha_dot, beta_dot = -amplitude * w * np.sin(w * t), amplitude * w * np.cos(w * t)
    elif kind == "figure_eight":
        alpha, beta = amplitude * np.sin(w * t), amplitude * np.sin(2.0 * w * t)
        alpha_dot, beta_dot = amplitude * w * np.cos(w * t), 2.0 * amplitude * w * np.cos(2.0 * w * t)
    else:
        alpha, beta = np.full(n_steps, float(amplitude)), np.zeros(n_steps)
        alpha_dot, beta_dot = np.zeros(n_steps), np.zeros(n_steps)

    return Trajectory(kind=kind, amplitude=float(amplitude), period=float(period), Ts=float(Ts), t=t,
                      alpha_sp=alpha, beta_sp=beta, alpha_sp_dot=alpha_dot, beta_sp_dot=beta_dot)
