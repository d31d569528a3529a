"""
자기장 할당 (eMNS)

역할:
- 제어 각도 (u_a, u_b) → 자기장 벡터 b (Ψ_B) 및 역변환
- 구동 행렬 𝒜 (8×8): 코일 전류 ↔ (b, g5)
- 점-쌍극자 코일 모델로 합성 구동 행렬 생성, CSV 로드/저장

구배 5성분 순서: (∂bx/∂x, ∂bx/∂y, ∂bx/∂z, ∂by/∂y, ∂by/∂z)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from exceptions import (
    MagpendDimensionError,
    MagpendFileError,
    MagpendFileNotFoundError,
    MagpendGimbalLockError,
    MagpendRankDeficientError,
)

logger = logging.getLogger(__name__)

MU0_OVER_4PI = 1e-7          # T·m/A
N_COILS = 8
PINV_RCOND = 1e-12
GIMBAL_TOLERANCE = 1e-12

DEFAULT_COIL_DISTANCE = 0.12     # m
DEFAULT_COIL_MOMENT = 17.0       # A·m² / A


@dataclass(frozen=True)
class FieldVector:
    """작업공간 중심의 자기장 b (T)"""
    b: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float).reshape(3)
        object.__setattr__(self, "b", b)

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.b))


@dataclass(frozen=True)
class GradientVector:
    """독립 구배 5성분 g5 (T/m)"""
    g5: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "g5", np.asarray(self.g5, dtype=float).reshape(5))

    @property
    def tensor(self) -> np.ndarray:
        return gradient_tensor(self.g5)


def gradient_tensor(g5) -> np.ndarray:
    """∇×b = 0, ∇·b = 0 조건으로 5성분을 3×3 대칭 무대각합 텐서로 확장"""
    gxx, gxy, gxz, gyy, gyz = np.asarray(g5, dtype=float).reshape(5)
    return np.array([[gxx, gxy, gxz],
                     [gxy, gyy, gyz],
                     [gxz, gyz, -gxx - gyy]])


@dataclass(frozen=True)
class ActuationMatrix:
    """
    구동 행렬 𝒜: 전류 i (8) → (b (3), g5 (5))

    생성 시 형태/유한성만 검사하고, 랭크는 전류 할당 시점에 검사한다
    (load_actuation_matrix 는 로드 시점에 바로 검사).
    """
    A_mat: np.ndarray
    label: str = field(default="custom", compare=False)

    def __post_init__(self):
        A = np.asarray(self.A_mat, dtype=float)
        if A.shape != (N_COILS, N_COILS):
            raise MagpendDimensionError(f"구동 행렬은 8×8이어야 합니다: {A.shape}")
        if not np.all(np.isfinite(A)):
            raise MagpendDimensionError("구동 행렬에 유한하지 않은 값이 있습니다")
        object.__setattr__(self, "A_mat", A)

    @cached_property
    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.A_mat, compute_uv=False)

    @cached_property
    def rank(self) -> int:
        s = self.singular_values
        return int(np.sum(s > PINV_RCOND * s[0])) if s[0] > 0 else 0

    @cached_property
    def cond(self) -> float:
        s = self.singular_values
        return float(s[0] / s[-1]) if s[-1] > 0 else math.inf

    @cached_property
    def pinv(self) -> np.ndarray:
        # 상대 특이값 컷오프 1e-12·σ_max
        return np.linalg.pinv(self.A_mat, rcond=PINV_RCOND)

    def require_full_rank(self) -> None:
        if self.rank < N_COILS:
            raise MagpendRankDeficientError(
                f"구동 행렬 랭크 부족: 수치 랭크 {self.rank}/{N_COILS} "
                f"(σ = {np.array2string(self.singular_values, precision=3)})",
                rank=self.rank,
                expected=N_COILS,
            )


# ========================================
# Ψ_B 및 역변환
# ========================================

def allocate_field(u_a: float, u_b: float, b_mag: float) -> FieldVector:
    """b = |b|·(sin u_a·cos u_b, sin u_b, cos u_a·cos u_b)"""
    cos_b = math.cos(u_b)
    return FieldVector(np.array([
        b_mag * math.sin(u_a) * cos_b,
        b_mag * math.sin(u_b),
        b_mag * math.cos(u_a) * cos_b,
    ]))


def field_angles(b: FieldVector) -> tuple[float, float, float]:
    """
    Ψ_B 역변환

    Returns:
        (u_a, u_b, |b|)

    Raises:
        MagpendGimbalLockError: |b| ≈ 0 또는 cos u_b ≈ 0
    """
    bx, by, bz = b.b
    magnitude = b.magnitude
    if not magnitude > 0:
        raise MagpendGimbalLockError(f"자기장 크기가 0입니다: {b.b}")
    horizontal = math.hypot(bx, bz)
    if horizontal <= GIMBAL_TOLERANCE * magnitude:
        raise MagpendGimbalLockError(f"짐벌 특이점 (cos u_b ≈ 0): b = {b.b}")
    # asin(b_y/|b|) 와 동일, 극 근처 정밀도 유지
    u_b = math.atan2(by, horizontal)
    u_a = math.atan2(bx, bz)
    return u_a, u_b, magnitude


# ========================================
# 전류 할당
# ========================================

def currents_from_field(b: FieldVector, A: ActuationMatrix) -> np.ndarray:
    """i = 𝒜⁺·(b; 0₅) (구배 0 조건)"""
    A.require_full_rank()
    target = np.concatenate([b.b, np.zeros(5)])
    return A.pinv @ target


def field_from_currents(i, A: ActuationMatrix) -> tuple[FieldVector, GradientVector]:
    """(b; g) = 𝒜·i"""
    i = np.asarray(i, dtype=float).reshape(N_COILS)
    out = A.A_mat @ i
    return FieldVector(out[:3]), GradientVector(out[3:])


# ========================================
# 합성 구동 행렬
# ========================================

def hemispherical_coil_directions() -> np.ndarray:
    """
    코일 방향 (중심 → 코일 단위벡터)

    상단 링 4개 (극각 45°, 방위각 0/90/180/270°) + 적도 링 4개 (방위각 45/135/225/315°).
    대척점 쌍이 없어 쌍극자 모델에서 8×8 행렬이 풀랭크가 된다.
    """
    s = math.sqrt(0.5)
    upper = [(s * math.cos(az), s * math.sin(az), s)
             for az in np.deg2rad([0.0, 90.0, 180.0, 270.0])]
    equator = [(math.cos(az), math.sin(az), 0.0)
               for az in np.deg2rad([45.0, 135.0, 225.0, 315.0])]
    return np.array(upper + equator)


def dipole_coil_column(direction, distance: float, moment_per_amp: float) -> np.ndarray:
    """
    중심을 향한 점-쌍극자 코일 1개의 단위 전류당 (b, g5)

    b = −2·k·ĉ/d³,  ∇b = 3·k·(I − 3ĉĉᵀ)/d⁴  (k = μ0/4π·모멘트)
    """
    c = np.asarray(direction, dtype=float)
    c = c / np.linalg.norm(c)
    k = MU0_OVER_4PI * moment_per_amp
    b = -2.0 * k * c / distance ** 3
    G = 3.0 * k * (np.eye(3) - 3.0 * np.outer(c, c)) / distance ** 4
    return np.concatenate([b, [G[0, 0], G[0, 1], G[0, 2], G[1, 1], G[1, 2]]])


def synthetic_actuation_matrix(distance: float = DEFAULT_COIL_DISTANCE,
                               moment_per_amp: float = DEFAULT_COIL_MOMENT,
                               directions: Optional[Sequence[Sequence[float]]] = None) -> ActuationMatrix:
    """점-쌍극자 코일 8개로 합성 구동 행렬 생성"""
    directions = hemispherical_coil_directions() if directions is None else np.asarray(directions, dtype=float)
    if directions.shape != (N_COILS, 3):
        raise MagpendDimensionError(f"코일 방향은 8×3이어야 합니다: {directions.shape}")
    columns = [dipole_coil_column(c, distance, moment_per_amp) for c in directions]
    A = ActuationMatrix(np.column_stack(columns), label="synthetic")
    logger.debug(f"🧲 합성 구동 행렬: 랭크 {A.rank}, cond = {A.cond:.3e}")
    return A


def load_actuation_matrix(path) -> ActuationMatrix:
    """
    CSV (8행 × 8열, 헤더 없음, SI 단위) 에서 구동 행렬 로드

    Raises:
        MagpendFileNotFoundError: 파일 없음
        MagpendRankDeficientError: 랭크 부족
    """
    path = Path(path)
    if not path.exists():
        raise MagpendFileNotFoundError("구동 행렬 파일을 찾을 수 없습니다", path=path)
    try:
        frame = pd.read_csv(path, header=None, float_precision="round_trip")
    except (OSError, ValueError, pd.errors.ParserError) as e:
        raise MagpendFileError(f"구동 행렬 파일 파싱 실패: {e}", path=path) from e

    A = ActuationMatrix(frame.to_numpy(dtype=float), label=path.name)
    A.require_full_rank()
    logger.info(f"📂 구동 행렬 로드: {path} (cond = {A.cond:.3e})")
    return A


def save_actuation_matrix(A: ActuationMatrix, path) -> Path:
    path = Path(path)
    try:
        pd.DataFrame(A.A_mat).to_csv(path, header=False, index=False, float_format="%.17g")
    except OSError as e:
        raise MagpendFileError(f"구동 행렬 저장 실패: {e}", path=path) from e
    return path
