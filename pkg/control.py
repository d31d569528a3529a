"""
이산시간 제어기 설계

역할:
- 정확 이산화 (증강 행렬 지수)
- LQR: 이산 대수 리카티 방정식 (구조적 doubling 알고리즘)
- 프리필터, 상태 피드백, 유한차분 속도 추정
- 선형 폐루프 시뮬레이션 (정상상태 검증용)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np
from scipy.linalg import expm, lu_factor, lu_solve

from exceptions import (
    MagpendConvergenceError,
    MagpendDimensionError,
    MagpendInvalidConfigError,
    MagpendSingularMatrixError,
)

if TYPE_CHECKING:
    from dynamics import LinearModel

logger = logging.getLogger(__name__)

DARE_TOLERANCE = 1e-12
DARE_MAX_ITERATIONS = 200
DARE_RESIDUAL_TOLERANCE = 1e-10


@dataclass(frozen=True)
class LqrWeights:
    """LQR 가중치 (평면별). 기본값 Qw = diag(10, 100, 1, 1), Rw = 1"""
    Qw: np.ndarray = field(default_factory=lambda: np.diag([10.0, 100.0, 1.0, 1.0]))
    Rw: float = 1.0

    def __post_init__(self):
        Qw = np.atleast_2d(np.asarray(self.Qw, dtype=float))
        object.__setattr__(self, "Qw", Qw)
        if Qw.shape[0] != Qw.shape[1]:
            raise MagpendInvalidConfigError(f"Qw는 정방행렬이어야 합니다: {Qw.shape}", key="CONTROL_Q_DIAG")
        if not np.allclose(Qw, Qw.T):
            raise MagpendInvalidConfigError("Qw는 대칭이어야 합니다", key="CONTROL_Q_DIAG")
        if np.linalg.eigvalsh(Qw).min() < -1e-12 * max(1.0, np.abs(Qw).max()):
            raise MagpendInvalidConfigError("Qw는 양반정치여야 합니다", key="CONTROL_Q_DIAG")
        if not self.Rw > 0:
            raise MagpendInvalidConfigError(f"Rw는 0보다 커야 합니다: {self.Rw}", key="CONTROL_R")

    @classmethod
    def from_diagonal(cls, q_diag: Sequence[float], r: float = 1.0) -> "LqrWeights":
        return cls(Qw=np.diag(np.asarray(q_diag, dtype=float)), Rw=float(r))


@dataclass(frozen=True)
class Controller:
    """평면별 상태 피드백 제어기 u = K·(x_sp − x), 프리필터 F"""
    K: np.ndarray
    F: float
    P_dare: np.ndarray
    model: "LinearModel"

    @property
    def closed_loop(self) -> np.ndarray:
        return closed_loop_matrix(self.model, self.K)

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.closed_loop))))

    def setpoint(self, alpha_sp: float, alpha_sp_dot: float = 0.0) -> np.ndarray:
        return prefiltered_setpoint(alpha_sp, alpha_sp_dot, self.F)

    def command(self, x_sp, x) -> float:
        return feedback(x_sp, x, self.K)


# ========================================
# 이산화
# ========================================

def discretize_exact(A_c: np.ndarray, B_c: np.ndarray, Ts: float) -> tuple[np.ndarray, np.ndarray]:
    """
    영차 유지 정확 이산화

    Args:
        A_c: 연속 시스템 행렬 (n×n)
        B_c: 연속 입력 행렬 (n×m)
        Ts: 샘플 시간 (s)

    Returns:
        (A, B) 이산 행렬
    """
    if not Ts > 0:
        raise MagpendInvalidConfigError(f"샘플 시간은 0보다 커야 합니다: {Ts}", key="CONTROL_TS")
    A_c = np.atleast_2d(np.asarray(A_c, dtype=float))
    B_c = np.asarray(B_c, dtype=float).reshape(A_c.shape[0], -1)
    states = A_c.shape[0]
    inputs = B_c.shape[1]

    # M = [A_c  B_c]
    #     [ 0    0 ]
    augmented = np.block([[A_c, B_c], [np.zeros((inputs, states)), np.zeros((inputs, inputs))]])
    # e^{M·Ts} = [A  B]
    #            [0  I]
    phi = expm(augmented * Ts)
    return phi[:states, :states], phi[:states, states:]


# ========================================
# LQR
# ========================================

def dare_residual(A: np.ndarray, B: np.ndarray, W: LqrWeights, P: np.ndarray) -> float:
    """‖AᵀPA − P − AᵀPB(R + BᵀPB)⁻¹BᵀPA + Q‖ (Frobenius)"""
    BtPA = B.T @ P @ A
    S = W.Rw + B.T @ P @ B
    R = A.T @ P @ A - P - BtPA.T @ np.linalg.solve(S, BtPA) + W.Qw
    return float(np.linalg.norm(R))


def solve_dare(A: np.ndarray, B: np.ndarray, W: LqrWeights) -> tuple[np.ndarray, np.ndarray]:
    """
    이산 대수 리카티 방정식 (구조적 doubling 알고리즘)

    A_0 = A, G_0 = B·R⁻¹·Bᵀ, H_0 = Q 에서 시작해 H_k → P 로 2차 수렴한다.

    Returns:
        (P_dare, K)

    Raises:
        MagpendConvergenceError: 반복 한도 내 미수렴 또는 안정화 해가 아닌 경우
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    n = A.shape[0]
    if W.Qw.shape != (n, n):
        raise MagpendDimensionError(f"Qw 차원 {W.Qw.shape} ≠ 상태 차원 {n}")

    eye = np.eye(n)
    Ak = A.copy()
    Gk = (B @ B.T) / W.Rw
    Hk = W.Qw.copy()

    converged = False
    iterations = 0
    for iterations in range(1, DARE_MAX_ITERATIONS + 1):
        lu = lu_factor(eye + Gk @ Hk)
        # (I + G H)⁻¹ A,  (I + G H)⁻¹ G
        inv_A = lu_solve(lu, Ak)
        inv_G = lu_solve(lu, Gk)
        H_next = Hk + Ak.T @ Hk @ inv_A
        G_next = Gk + Ak @ inv_G @ Ak.T
        A_next = Ak @ inv_A

        H_next = 0.5 * (H_next + H_next.T)
        G_next = 0.5 * (G_next + G_next.T)
        change = np.linalg.norm(H_next - Hk)
        Ak, Gk, Hk = A_next, G_next, H_next
        if not (np.all(np.isfinite(Hk)) and np.all(np.isfinite(Ak)) and np.all(np.isfinite(Gk))):
            break
        if change <= DARE_TOLERANCE * max(1.0, np.linalg.norm(Hk)):
            converged = True
            break

    if not converged:
        raise MagpendConvergenceError(
            f"리카티 방정식이 {iterations}회 반복 내에 수렴하지 않았습니다 (안정화 불가능한 (A, B)?)",
            iterations=iterations,
        )

    P = Hk
    K = np.linalg.solve(W.Rw + B.T @ P @ B, B.T @ P @ A)

    residual = dare_residual(A, B, W, P)
    if residual > DARE_RESIDUAL_TOLERANCE * max(np.linalg.norm(P), np.finfo(float).tiny):
        raise MagpendConvergenceError(
            f"리카티 잔차가 허용치를 초과했습니다: {residual:.3e}",
            iterations=iterations,
            residual=residual,
        )

    rho = float(np.max(np.abs(np.linalg.eigvals(A - B @ K))))
    if rho >= 1.0:
        raise MagpendConvergenceError(
            f"안정화 해가 아닙니다: ρ(A − BK) = {rho:.6f}",
            iterations=iterations,
            residual=residual,
        )

    logger.debug(f"DARE 수렴: {iterations}회, 잔차 {residual:.2e}, ρ(A−BK) = {rho:.4f}")
    return P, K


def closed_loop_matrix(model: "LinearModel", K: np.ndarray) -> np.ndarray:
    return model.A - model.B @ np.atleast_2d(K)


def closed_loop_inverse_map(model: "LinearModel", K: np.ndarray) -> np.ndarray:
    """Ā = I − A + BK 의 LU 분해 (정상상태 사상 공용)"""
    A_bar = np.eye(model.n_states) - model.A + model.B @ np.atleast_2d(K)
    cond = np.linalg.cond(A_bar)
    if not np.isfinite(cond) or cond > 1.0 / np.finfo(float).eps:
        raise MagpendSingularMatrixError(f"Ā = I − A + BK 가 특이합니다 (cond = {cond:.3e})")
    return A_bar


def prefilter_gain(model: "LinearModel", K: np.ndarray) -> float:
    """
    프리필터 F = (C̃·Ā⁻¹·B·K·C̃ᵀ)⁻¹, Ā = I − A + BK

    Raises:
        MagpendSingularMatrixError: Ā 특이 또는 DC 이득 0
    """
    K = np.atleast_2d(K)
    A_bar = closed_loop_inverse_map(model, K)
    dc_gain = float((model.C_tilde @ np.linalg.solve(A_bar, model.B @ K @ model.C_tilde.T)).item())
    if not math.isfinite(dc_gain) or abs(dc_gain) < 1e-14:
        raise MagpendSingularMatrixError(f"프리필터 DC 이득이 0입니다: {dc_gain}")
    return 1.0 / dc_gain


def design_controller(model: "LinearModel", weights: Optional[LqrWeights] = None) -> Controller:
    """DARE + 프리필터 → Controller"""
    weights = weights or LqrWeights()
    P, K = solve_dare(model.A, model.B, weights)
    F = prefilter_gain(model, K)
    controller = Controller(K=K, F=F, P_dare=P, model=model)
    logger.info(
        f"🎯 LQR 설계 완료: K = {np.array2string(K.ravel(), precision=4)}, "
        f"F = {F:.4f}, ρ = {controller.spectral_radius:.4f}"
    )
    return controller


# ========================================
# 피드백 법칙
# ========================================

def prefiltered_setpoint(alpha_sp: float, alpha_sp_dot: float, F: float) -> np.ndarray:
    """Ψ_x 후 프리필터: α_sp ↦ (F·α_sp, 0, F·α̇_sp, 0)"""
    return np.array([F * alpha_sp, 0.0, F * alpha_sp_dot, 0.0])


def feedback(x_sp, x, K) -> float:
    """u = K·(x_sp − x)"""
    K = np.asarray(K, dtype=float).ravel()
    return float(K @ (np.asarray(x_sp, dtype=float) - np.asarray(x, dtype=float)))


def finite_diff_velocity(prev: float, curr: float, Ts: float) -> float:
    """후진 차분 (curr − prev)/Ts"""
    return (curr - prev) / Ts


def lowpass_coefficient(cutoff_hz: float, Ts: float) -> float:
    """1차 IIR 계수 1 − exp(−2π·f_c·Ts) ∈ (0, 1)"""
    if not cutoff_hz > 0 or not Ts > 0:
        raise MagpendInvalidConfigError(f"차단 주파수/샘플 시간은 0보다 커야 합니다: {cutoff_hz}, {Ts}")
    return 1.0 - math.exp(-2.0 * math.pi * cutoff_hz * Ts)


class LowPassFilter:
    """1차 IIR 저역통과 y ← (1−a)·y + a·x (속도 평활용, 기본 비활성)"""

    def __init__(self, cutoff_hz: float, Ts: float, initial: float = 0.0):
        self.alpha = lowpass_coefficient(cutoff_hz, Ts)
        self.value = initial

    def update(self, x: float) -> float:
        self.value += self.alpha * (x - self.value)
        return self.value


# ========================================
# 선형 폐루프 시뮬레이션
# ========================================

def simulate_linear_closed_loop(model: "LinearModel", K: np.ndarray, n_steps: int,
                                x0=None, x_sp=None, meas_offset=None,
                                input_offset: float = 0.0,
                                u_ff: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
    """
    이산 선형 폐루프 시뮬레이션

    측정 y = x + meas_offset, 입력 u = K·(x_sp − y) + u_ff[k],
    플랜트에는 u − input_offset 이 인가된다.

    Returns:
        (states (n_steps+1)×n, inputs n_steps)
    """
    n = model.n_states
    K = np.asarray(K, dtype=float).ravel()
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    x_sp = np.zeros(n) if x_sp is None else np.asarray(x_sp, dtype=float)
    offset = np.zeros(n) if meas_offset is None else np.asarray(meas_offset, dtype=float)
    b = model.B[:, 0]

    states = np.empty((n_steps + 1, n))
    inputs = np.empty(n_steps)
    states[0] = x
    for k in range(n_steps):
        u = float(K @ (x_sp - (x + offset)))
        if u_ff is not None:
            u += u_ff[k]
        inputs[k] = u
        x = model.A @ x + b * (u - input_offset)
        states[k + 1] = x
    return states, inputs
