"""
노름 최적 반복 학습 제어 (lifted 형태)

역할:
- 폐루프 lifted 행렬 P (2N×N, 블록 하삼각)
- 미분 패널티 연산자 D
- 사전 계산 갱신 행렬 Q, L (대칭 양정치 Cholesky)
- 반복별 보정 갱신 u^{n+1} = Q·u^n + L·e^n

출력 적층: y = (α[1], φ[1], α[2], φ[2], …, α[N], φ[N]), 보정 u[k] 는 y[k+1] 부터 영향.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from scipy.linalg import cho_factor, cho_solve, toeplitz

from exceptions import MagpendDimensionError, MagpendInvalidConfigError

if TYPE_CHECKING:
    from dynamics import LinearModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LiftedSystem:
    """P: 블록 (i, j) = C·(A − BK)^{i−j}·B (i ≥ j)"""
    P: np.ndarray
    N: int

    @property
    def n_outputs(self) -> int:
        return self.P.shape[0] // self.N


@dataclass(frozen=True)
class IlcGains:
    Q_mat: np.ndarray
    L_mat: np.ndarray
    w_e: float
    w_du: float


@dataclass(frozen=True)
class IlcIterate:
    """반복 n 의 보정 신호 u_n (N) 과 오차 e_n (2N)"""
    u_n: np.ndarray
    e_n: np.ndarray
    n: int = 0


def _delayed_closed_loop(model: "LinearModel", K, delay_steps: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # 상태 (x, u[k−1], …, u[k−d]); x[k+1] = A·x[k] + B·u[k−d]
    n, d = model.n_states, delay_steps
    K = np.atleast_2d(K)
    b = model.B[:, 0]
    if d == 0:
        return model.A - model.B @ K, b.copy(), model.C

    A_cl = np.zeros((n + d, n + d))
    A_cl[:n, :n] = model.A
    A_cl[:n, n + d - 1] = b
    A_cl[n, :n] = -K[0]
    for i in range(1, d):
        A_cl[n + i, n + i - 1] = 1.0
    B_cl = np.zeros(n + d)
    B_cl[n] = 1.0
    C_cl = np.hstack([model.C, np.zeros((model.C.shape[0], d))])
    return A_cl, B_cl, C_cl


def build_lifted(model: "LinearModel", K, N: int, delay_steps: int = 0) -> LiftedSystem:
    """
    v₀ = B, v_{m+1} = A_cl·v_m 점화식으로 마르코프 파라미터 C·v_m 을 채운다

    Args:
        model: 평면 선형 모델
        K: 피드백 이득 (1×4)
        N: 수평선 (스텝)
        delay_steps: 입력 지연 (스텝), 0 이면 A_cl = A − BK

    Raises:
        MagpendInvalidConfigError: N < 1 또는 delay_steps < 0
    """
    if N < 1:
        raise MagpendInvalidConfigError(f"ILC 수평선은 1 이상이어야 합니다: {N}")
    if delay_steps < 0:
        raise MagpendInvalidConfigError(f"입력 지연은 0 이상이어야 합니다: {delay_steps}", key="SIM_DELAY_STEPS")
    A_cl, v, C = _delayed_closed_loop(model, K, delay_steps)
    ny = C.shape[0]

    markov = np.empty((N, ny))
    for m in range(N):
        markov[m] = C @ v
        v = A_cl @ v

    P = np.empty((ny * N, N))
    zeros = np.zeros(N)
    for channel in range(ny):
        P[channel::ny] = toeplitz(markov[:, channel], zeros)
    return LiftedSystem(P=P, N=N)


def derivative_operator(N: int) -> np.ndarray:
    """D: 대각 −1, 첫 번째 상부 대각 +1"""
    if N < 1:
        raise MagpendInvalidConfigError(f"N은 1 이상이어야 합니다: {N}")
    return -np.eye(N) + np.eye(N, k=1)


def ilc_gains(P: np.ndarray, D: np.ndarray, w_e: float, w_du: float) -> IlcGains:
    """
    Q = (w_e·PᵀP + I + w_du·DᵀD)⁻¹·(w_e·PᵀP + I),  L = (…)⁻¹·Pᵀ·w_e

    Q 는 I − w_du·(…)⁻¹·DᵀD 로 계산하므로 w_du = 0 이면 정확히 I 이다.
    """
    if w_e < 0 or w_du < 0:
        raise MagpendInvalidConfigError(f"ILC 가중치는 0 이상이어야 합니다: w_e={w_e}, w_du={w_du}")
    N = P.shape[1]
    PtP = P.T @ P
    DtD = D.T @ D
    H = w_e * PtP + np.eye(N) + w_du * DtD
    factor = cho_factor(H)
    Q_mat = np.eye(N) - w_du * cho_solve(factor, DtD)
    L_mat = cho_solve(factor, w_e * P.T)
    return IlcGains(Q_mat=Q_mat, L_mat=L_mat, w_e=float(w_e), w_du=float(w_du))


def ilc_update(it: IlcIterate, gains: IlcGains) -> np.ndarray:
    """u^{n+1} = Q·u^n + L·e^n"""
    N = gains.Q_mat.shape[0]
    u = np.asarray(it.u_n, dtype=float)
    e = np.asarray(it.e_n, dtype=float)
    if u.shape != (N,) or e.shape != (gains.L_mat.shape[1],):
        raise MagpendDimensionError(
            f"ILC 차원 불일치: u {u.shape}, e {e.shape}, 기대 ({N},), ({gains.L_mat.shape[1]},)"
        )
    return gains.Q_mat @ u + gains.L_mat @ e


# ========================================
# 목적함수 (검증/진단용)
# ========================================

def objective(u_next, u_n, e_n, P, D, w_e: float, w_du: float) -> float:
    """w_e·‖e_n − P(u_next − u_n)‖² + ‖u_next − u_n‖² + w_du·‖D·u_next‖²"""
    du = u_next - u_n
    e_next = e_n - P @ du
    Du = D @ u_next
    return float(w_e * e_next @ e_next + du @ du + w_du * Du @ Du)


def objective_gradient(u_next, u_n, e_n, P, D, w_e: float, w_du: float) -> np.ndarray:
    du = u_next - u_n
    return 2.0 * (-w_e * P.T @ (e_n - P @ du) + du + w_du * D.T @ (D @ u_next))


def stack_outputs(alpha, phi) -> np.ndarray:
    """(α[k], φ[k]) 시퀀스를 lifted 출력 벡터로 교차 적층"""
    out = np.empty(2 * len(alpha))
    out[0::2] = alpha
    out[1::2] = phi
    return out


def error_from_trace(trace, plane: str, N: int) -> np.ndarray:
    """
    트레이스 측정값에서 lifted 오차 e = y_sp − y (샘플 1..N)

    Args:
        trace: simulate_closed_loop 트레이스 (N+1 행 이상)
        plane: "alpha" (α, φ) 또는 "beta" (β, θ)
        N: 수평선

    Returns:
        2N 오차 벡터 (진자 설정점은 0)
    """
    columns = {"alpha": ("alpha_sp", "alpha_meas", "phi_meas"),
               "beta": ("beta_sp", "beta_meas", "theta_meas")}
    if plane not in columns:
        raise MagpendInvalidConfigError(f"알 수 없는 평면: {plane}")
    if len(trace) < N + 1:
        raise MagpendDimensionError(f"트레이스 길이 {len(trace)} < N + 1 = {N + 1}")
    sp, actuator, pendulum = columns[plane]
    window = slice(1, N + 1)
    return stack_outputs(trace[sp][window] - trace[actuator][window], -trace[pendulum][window])


# ========================================
# 세션
# ========================================

@dataclass
class IlcSession:
    """
    평면 1개의 ILC 세션 (두 평면은 서로 상태를 공유하지 않는다)

    Q, L 은 (모델, N, 가중치) 당 1회 계산해 재사용한다.
    """
    lifted: LiftedSystem
    gains: IlcGains
    u: np.ndarray = None
    iteration: int = 0
    error_norms: list = field(default_factory=list)
    corrections: list = field(default_factory=list)

    def __post_init__(self):
        if self.u is None:
            self.u = np.zeros(self.lifted.N)
        self.corrections.append(self.u.copy())

    @classmethod
    def create(cls, model: "LinearModel", K, N: int, w_e: float, w_du: float,
               delay_steps: int = 0) -> "IlcSession":
        lifted = build_lifted(model, K, N, delay_steps)
        gains = ilc_gains(lifted.P, derivative_operator(N), w_e, w_du)
        logger.debug(f"🧠 ILC 세션 생성: N = {N}, 지연 = {delay_steps}, w_e = {w_e}, w_du = {w_du}")
        return cls(lifted=lifted, gains=gains)

    def update(self, e: np.ndarray) -> np.ndarray:
        """측정 오차 e (2N) 로 보정 신호 갱신"""
        self.error_norms.append(float(np.linalg.norm(e)))
        self.u = ilc_update(IlcIterate(self.u, e, self.iteration), self.gains)
        self.iteration += 1
        self.corrections.append(self.u.copy())
        return self.u
