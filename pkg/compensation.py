"""
정렬 오차 / 자기장 보정 오프셋 온라인 보상

역할:
- 정상상태 외란 사상 (측정 정렬 오차 ξ, 입력 오프셋 u_d)
- 진자 각도 저역통과로 정렬 오차 추정 후 각도 보정
- 모델 기반 입력 오프셋 추정 û_d 및 입력 보정

오프셋 규약: 실제 인가되는 자기장 각도 = 명령 − u_d.
따라서 보상은 명령을 û_d 만큼 앞서 회전시킨다 (correct_input = u + û_d).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

import numpy as np

from control import closed_loop_inverse_map, lowpass_coefficient
from exceptions import MagpendInvalidConfigError

if TYPE_CHECKING:
    from control import Controller
    from dynamics import LinearModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CompensationConfig:
    """보상기 설정 (저역통과 차단 주파수, 정상상태 판정 게이트)"""
    cutoff_hz: float = 0.05          # φ_ss, û_d 저역통과
    rate_cutoff_hz: float = 0.5      # 게이트용 각속도 평활
    rate_threshold: float = 0.05     # rad/s

    def __post_init__(self):
        if not self.cutoff_hz > 0:
            raise MagpendInvalidConfigError(f"보상 차단 주파수는 0보다 커야 합니다: {self.cutoff_hz}",
                                            key="COMP_CUTOFF_HZ")
        if not self.rate_cutoff_hz > 0:
            raise MagpendInvalidConfigError(f"게이트 평활 차단 주파수는 0보다 커야 합니다: {self.rate_cutoff_hz}",
                                            key="COMP_RATE_CUTOFF_HZ")
        if not self.rate_threshold > 0:
            raise MagpendInvalidConfigError(f"게이트 임계값은 0보다 커야 합니다: {self.rate_threshold}",
                                            key="COMP_RATE_THRESHOLD")


@dataclass
class OffsetEstimator:
    """
    평면별 오프셋 추정기 (제어 루프 1개가 단독 소유)

    phi_ss: 저역통과된 진자 측정각 (정렬 오차 추정)
    u_d_hat: 입력 오프셋 추정
    lp_alpha: 1차 IIR 계수
    """
    phi_ss: float = 0.0
    u_d_hat: float = 0.0
    lp_alpha: float = 0.0031
    enabled: bool = True
    rate_alpha: float = 0.031
    rate_threshold: float = 0.05
    input_pinv: np.ndarray = field(default_factory=lambda: np.zeros(4))
    x_ss: np.ndarray = field(default_factory=lambda: np.zeros(4))
    rates: np.ndarray = field(default_factory=lambda: np.zeros(2))
    steady: bool = False

    def __post_init__(self):
        if not 0.0 < self.lp_alpha <= 1.0:
            raise MagpendInvalidConfigError(f"lp_alpha는 (0, 1] 범위여야 합니다: {self.lp_alpha}")

    @classmethod
    def for_controller(cls, ctrl: "Controller", cfg: CompensationConfig | None = None,
                       enabled: bool = True) -> "OffsetEstimator":
        cfg = cfg or CompensationConfig()
        Ts = ctrl.model.Ts
        return cls(
            lp_alpha=lowpass_coefficient(cfg.cutoff_hz, Ts),
            enabled=enabled,
            rate_alpha=lowpass_coefficient(cfg.rate_cutoff_hz, Ts),
            rate_threshold=cfg.rate_threshold,
            input_pinv=input_offset_pinv(ctrl.model, ctrl.K),
        )

    def step(self, phi_meas: float, x_dev) -> bool:
        """
        제어 스텝 1회 추정 갱신

        Args:
            phi_meas: 보정 전 진자 측정각
            x_dev: 보정된 측정 상태 − 기준 상태 (α − α_sp, φ, α̇ − α̇_sp, φ̇)

        Returns:
            정상상태 게이트 통과 여부
        """
        x_dev = np.asarray(x_dev, dtype=float)
        self.rates += self.rate_alpha * (x_dev[2:] - self.rates)
        self.steady = bool(math.hypot(self.rates[0], self.rates[1]) < self.rate_threshold)
        if not (self.enabled and self.steady):
            return False

        self.phi_ss += self.lp_alpha * (phi_meas - self.phi_ss)
        self.x_ss += self.lp_alpha * (x_dev - self.x_ss)
        # 잔여 정상상태로부터 증분 추정 후 저역통과: û ← û + a·(û_raw − û)
        u_raw = self.u_d_hat + float(self.input_pinv @ self.x_ss)
        self.u_d_hat += self.lp_alpha * (u_raw - self.u_d_hat)
        return True


# ========================================
# 정상상태 외란 사상
# ========================================

def steady_state_output_dist(model: "LinearModel", K, xi: float) -> np.ndarray:
    """x_ss = −Ā⁻¹·B·K·(ξ, ξ, 0, 0)ᵀ"""
    K = np.atleast_2d(K)
    A_bar = closed_loop_inverse_map(model, K)
    d = np.array([xi, xi, 0.0, 0.0])
    return -np.linalg.solve(A_bar, model.B @ (K @ d))


def steady_state_input_dist(model: "LinearModel", K, u_d: float) -> np.ndarray:
    """x_ss = −Ā⁻¹·B·u_d"""
    A_bar = closed_loop_inverse_map(model, np.atleast_2d(K))
    return -np.linalg.solve(A_bar, model.B[:, 0]) * u_d


def input_offset_pinv(model: "LinearModel", K) -> np.ndarray:
    """−(Ā⁻¹B)⁺ (1×4 행 벡터)"""
    A_bar = closed_loop_inverse_map(model, np.atleast_2d(K))
    column = np.linalg.solve(A_bar, model.B[:, 0])
    return -column / float(column @ column)


def estimate_input_offset(model: "LinearModel", K, x_ss) -> float:
    """û_d = −(Ā⁻¹B)⁺·x_ss (최소제곱)"""
    return float(input_offset_pinv(model, K) @ np.asarray(x_ss, dtype=float))


# ========================================
# 정렬 오차 보상
# ========================================

def update_misalignment(est: OffsetEstimator, phi_meas: float) -> OffsetEstimator:
    """phi_ss ← (1 − a)·phi_ss + a·phi_meas"""
    phi_ss = (1.0 - est.lp_alpha) * est.phi_ss + est.lp_alpha * phi_meas
    return replace(est, phi_ss=phi_ss, x_ss=est.x_ss.copy(), rates=est.rates.copy())


def correct_angles(a: float, p: float, phi_ss: float) -> tuple[float, float]:
    return a - phi_ss, p - phi_ss


def correct_input(u: float, u_d_hat: float) -> float:
    """
    명령을 추정 오프셋만큼 선회전: u + û_d

    플랜트 인가각은 u − u_d 이므로 û_d 를 더해야 오프셋이 상쇄된다 (u − û_d 는 오차를 두 배로 만든다).
    """
    return u + u_d_hat
