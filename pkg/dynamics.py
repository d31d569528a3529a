"""
액추에이터-진자 동역학 모델

역할:
- 플랜트 물리 상수 (PlantParams) 및 집중 파라미터 (J, η)
- 라그랑지안에서 유도한 평면별 비선형 운동방정식
- 상향 평형점 선형화 모델 (연속 + 정확 이산화)
- RK4 적분기

상태 x = (α, φ, α̇, φ̇): α = 액추에이터 각도, φ = 진자 각도 (모두 관성 수직 기준, 래핑 없음)
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from functools import cached_property
from typing import NamedTuple, Optional

import numpy as np
from scipy.linalg import block_diag

from control import discretize_exact
from exceptions import MagpendParameterError

logger = logging.getLogger(__name__)


class LumpedParams(NamedTuple):
    """집중 관성 J (kg·m²) 와 1차 모멘트 η (kg·m)"""
    J: float
    eta: float


class PlanarState(NamedTuple):
    """한 평면의 상태 (α, φ, α̇, φ̇)"""
    a: float
    p: float
    a_dot: float
    p_dot: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)

    @classmethod
    def from_array(cls, x) -> "PlanarState":
        return cls(float(x[0]), float(x[1]), float(x[2]), float(x[3]))


class _EomCoefficients(NamedTuple):
    # 운동방정식에 반복 등장하는 상수 묶음 (적분 루프 속도용)
    m11: float        # J + M·l²
    m12: float        # ½·M·l·L
    m22: float        # ¼·M·L²
    grav_a: float     # (η + M·l)·g
    grav_p: float     # M·g·L/2
    mb: float         # |m̃|·|b|
    d: float
    detached: bool    # M = 0 (진자 분리, 액추에이터 단독)


@dataclass(frozen=True)
class PlantParams:
    """
    액추에이터-진자-자석 조립체의 물리 상수

    기본값은 실험 플랫폼 치수 (L = 405 mm 등) 기준.
    d, m_dip 은 공개된 식별값이 없어 합성 기본값을 사용한다.
    M = 0 은 진자를 분리한 액추에이터 단독 플랜트를 의미한다.
    """

    M: float = 0.0044        # 진자 질량 (kg)
    m: float = 0.0024        # 액추에이터 질량 (kg)
    m_j: float = 0.002       # 조인트 질량 (kg)
    m_m: float = 0.0127      # 자석 질량 (kg)
    L: float = 0.405         # 진자 길이 (m)
    l: float = 0.218         # 액추에이터 길이 (m)
    l_m: float = 0.038       # 피벗-자석 거리 (m)
    d: float = 1.0e-4        # 점성 감쇠 (N·m·s/rad)
    m_dip: float = 1.5       # 쌍극자 모멘트 |m̃| (A·m²)
    b_mag: float = 0.035     # 자기장 크기 |b| (T)
    g: float = 9.81          # 중력 가속도 (m/s²)

    def __post_init__(self):
        for name in ("M", "m", "m_j", "m_m"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise MagpendParameterError(f"질량 {name}은(는) 0 이상이어야 합니다: {value}")
        for name in ("L", "l", "l_m", "m_dip", "b_mag", "g"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise MagpendParameterError(f"{name}은(는) 0보다 커야 합니다: {value}")
        if not math.isfinite(self.d) or self.d < 0:
            raise MagpendParameterError(f"감쇠 d는 0 이상이어야 합니다: {self.d}")

        lumped = self.lumped
        if lumped.J <= 0 or lumped.eta <= 0:
            raise MagpendParameterError(
                f"집중 파라미터가 양수가 아닙니다: J={lumped.J}, eta={lumped.eta}"
            )
        if not self.is_stabilizable:
            logger.warning(
                f"⚠️ 안정화 조건 위반: |m̃||b| = {self.m_dip * self.b_mag:.4g} "
                f"<= (η + M·l)·g = {(lumped.eta + self.M * self.l) * self.g:.4g}"
            )

    @cached_property
    def lumped(self) -> LumpedParams:
        return lumped_params(self)

    @cached_property
    def eom(self) -> _EomCoefficients:
        J, eta = self.lumped
        return _EomCoefficients(
            m11=J + self.M * self.l ** 2,
            m12=0.5 * self.M * self.l * self.L,
            m22=0.25 * self.M * self.L ** 2,
            grav_a=(eta + self.M * self.l) * self.g,
            grav_p=0.5 * self.M * self.g * self.L,
            mb=self.m_dip * self.b_mag,
            d=self.d,
            detached=self.M == 0.0,
        )

    @property
    def stiffness_margin(self) -> float:
        """선형화 액추에이터 강성 |m̃||b| − (η + M·l)·g (N·m/rad)"""
        return self.m_dip * self.b_mag - (self.lumped.eta + self.M * self.l) * self.g

    @property
    def is_stabilizable(self) -> bool:
        return self.stiffness_margin > 0

    @property
    def is_detached(self) -> bool:
        return self.M == 0.0

    def detached(self) -> "PlantParams":
        """진자를 분리한 액추에이터 단독 플랜트 (시스템 식별용)"""
        return replace(self, M=0.0)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PlantParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise MagpendParameterError(f"알 수 없는 플랜트 파라미터: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


@dataclass(frozen=True)
class LinearModel:
    """평면별 선형 상태공간 모델 (연속 A_c, B_c / 이산 A, B)"""
    A_c: np.ndarray
    B_c: np.ndarray
    A: np.ndarray
    B: np.ndarray
    Ts: float
    C: np.ndarray = field(default_factory=lambda: np.array([[1.0, 0.0, 0.0, 0.0],
                                                            [0.0, 1.0, 0.0, 0.0]]))
    C_tilde: np.ndarray = field(default_factory=lambda: np.array([[1.0, 0.0, 0.0, 0.0]]))

    @property
    def n_states(self) -> int:
        return self.A.shape[0]


# ========================================
# 에너지 및 운동방정식
# ========================================

def lumped_params(p: PlantParams) -> LumpedParams:
    """J = m_m·l_m² + m·l²/4 + m_j·l², η = m_m·l_m + m·l/2 + m_j·l"""
    J = p.m_m * p.l_m ** 2 + p.m * p.l ** 2 / 4.0 + p.m_j * p.l ** 2
    eta = p.m_m * p.l_m + p.m * p.l / 2.0 + p.m_j * p.l
    return LumpedParams(J, eta)


def magnetic_potential(u_a: float, a: float, p: PlantParams) -> float:
    """쌍극자 위치 에너지 −|m̃||b|·cos(u_a − α)"""
    return -p.m_dip * p.b_mag * math.cos(u_a - a)


def _accel(c: _EomCoefficients, a, p, a_dot, p_dot, u_a, tau_d):
    # 2x2 오일러-라그랑주 계 (질량행렬은 매 호출 구성)
    rhs_a = c.grav_a * math.sin(a) + c.mb * math.sin(u_a - a) - c.d * a_dot + tau_d
    if c.detached:
        return rhs_a / c.m11, 0.0

    cos_ap = math.cos(a - p)
    sin_ap = math.sin(a - p)
    rhs_a -= c.m12 * sin_ap * p_dot * p_dot
    rhs_p = c.m12 * sin_ap * a_dot * a_dot + c.grav_p * math.sin(p)

    coupling = c.m12 * cos_ap
    det = c.m11 * c.m22 - coupling * coupling
    assert det > 0.0, "mass matrix must be positive definite"
    return ((c.m22 * rhs_a - coupling * rhs_p) / det,
            (c.m11 * rhs_p - coupling * rhs_a) / det)


def nonlinear_accel(s: PlanarState, u_a: float, p: PlantParams,
                    tau_d: float = 0.0) -> tuple[float, float]:
    """
    비선형 운동방정식의 가속도 (α̈, φ̈)

    Args:
        s: 평면 상태
        u_a: 자기장 각도 (rad)
        p: 플랜트 파라미터
        tau_d: 액추에이터 외란 토크 (N·m), 자기장 구배 외란 등

    Returns:
        (α̈, φ̈) (rad/s²)
    """
    return _accel(p.eom, s[0], s[1], s[2], s[3], u_a, tau_d)


def total_energy(s: PlanarState, u_a: float, p: PlantParams) -> float:
    """운동 에너지 T + 위치 에너지 U (자기 에너지 포함)"""
    c = p.eom
    a, ph, a_dot, p_dot = s
    kinetic = (0.5 * c.m11 * a_dot ** 2
               + c.m12 * math.cos(a - ph) * a_dot * p_dot
               + 0.5 * c.m22 * p_dot ** 2)
    potential = (c.grav_a * math.cos(a) + c.grav_p * math.cos(ph)
                 + magnetic_potential(u_a, a, p))
    return kinetic + potential


def rk4_step(s: PlanarState, u_a: float, p: PlantParams, dt: float,
             c1: float = 0.0, c2: float = 0.0) -> PlanarState:
    """
    고전 RK4 한 스텝 (입력 영차 유지)

    c1, c2 는 구배 외란 토크 τ_d = c1·α + c2·α² 계수.
    """
    c = p.eom
    a, ph, ad, pd = s

    def f(a_, p_, ad_, pd_):
        return _accel(c, a_, p_, ad_, pd_, u_a, c1 * a_ + c2 * a_ * a_)

    k1a, k1p = f(a, ph, ad, pd)
    h = 0.5 * dt
    k2a, k2p = f(a + h * ad, ph + h * pd, ad + h * k1a, pd + h * k1p)
    k2ad, k2pd = ad + h * k1a, pd + h * k1p
    k3a, k3p = f(a + h * k2ad, ph + h * k2pd, ad + h * k2a, pd + h * k2p)
    k3ad, k3pd = ad + h * k2a, pd + h * k2p
    k4a, k4p = f(a + dt * k3ad, ph + dt * k3pd, ad + dt * k3a, pd + dt * k3p)
    k4ad, k4pd = ad + dt * k3a, pd + dt * k3p

    w = dt / 6.0
    return PlanarState(
        a + w * (ad + 2.0 * k2ad + 2.0 * k3ad + k4ad),
        ph + w * (pd + 2.0 * k2pd + 2.0 * k3pd + k4pd),
        ad + w * (k1a + 2.0 * k2a + 2.0 * k3a + k4a),
        pd + w * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
    )


def rollout(s0: PlanarState, u_a: float, p: PlantParams, dt: float,
            n_steps: int, c1: float = 0.0, c2: float = 0.0) -> np.ndarray:
    """상수 입력 RK4 적분, (n_steps+1)×4 상태 배열 반환"""
    out = np.empty((n_steps + 1, 4))
    s = PlanarState(*map(float, s0))
    out[0] = s
    for k in range(n_steps):
        s = rk4_step(s, u_a, p, dt, c1, c2)
        out[k + 1] = s
    return out


# ========================================
# 선형화 모델
# ========================================

def second_order_matrices(p: PlantParams) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """상향 평형점 2차계 행렬 (질량 M, 감쇠 D, 강성 K, 입력 w)"""
    c = p.eom
    mass = np.array([[c.m11, c.m12], [c.m12, c.m22]])
    damping = np.diag([p.d, 0.0])
    stiffness = np.diag([-c.grav_a + c.mb, -c.grav_p])
    w = np.array([c.mb, 0.0])
    return mass, damping, stiffness, w


def continuous_model(p: PlantParams) -> tuple[np.ndarray, np.ndarray]:
    """연속시간 (A_c, B_c). M = 0 이면 스칼라 액추에이터 축약 (φ 정지)"""
    mass, damping, stiffness, w = second_order_matrices(p)
    A_c = np.zeros((4, 4))
    B_c = np.zeros((4, 1))
    A_c[0, 2] = 1.0
    A_c[1, 3] = 1.0

    if p.is_detached:
        J = mass[0, 0]
        A_c[2, 0] = -stiffness[0, 0] / J
        A_c[2, 2] = -damping[0, 0] / J
        B_c[2, 0] = w[0] / J
        return A_c, B_c

    A_c[2:, :2] = -np.linalg.solve(mass, stiffness)
    A_c[2:, 2:] = -np.linalg.solve(mass, damping)
    B_c[2:, 0] = np.linalg.solve(mass, w)
    return A_c, B_c


def linearized_model(p: PlantParams, Ts: float) -> LinearModel:
    """
    상향 평형점 선형화 + 정확 이산화

    안정화 조건이 위반되어도 행렬은 생성한다 (PlantParams 생성 시 경고).
    """
    A_c, B_c = continuous_model(p)
    A, B = discretize_exact(A_c, B_c, Ts)
    return LinearModel(A_c=A_c, B_c=B_c, A=A, B=B, Ts=Ts)


def block_diagonal_model(model_a: LinearModel,
                         model_b: Optional[LinearModel] = None) -> tuple[np.ndarray, np.ndarray]:
    """두 평면 (α, β) 블록 대각 3D 연속 모델 (8×8, 8×2)"""
    model_b = model_b or model_a
    return block_diag(model_a.A_c, model_b.A_c), block_diag(model_a.B_c, model_b.B_c)


def plane_models(p: PlantParams, Ts: float) -> tuple[LinearModel, LinearModel]:
    """(α, φ) 평면과 (β, θ) 평면 모델 (같은 플랜트이므로 동일 행렬)"""
    model = linearized_model(p, Ts)
    return model, model
