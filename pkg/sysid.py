"""
주파수 영역 시스템 식별

역할:
- 랜덤 위상 멀티사인 설계 (정확한 DFT 빈)
- 주기 평균, BLA (best linear approximator) 및 비선형 표준편차 σ_nl
- σ_nl → 피팅 가중치
- 가중 2차 + 지연 전달함수 피팅 (지연 격자 탐색 + Levy / Sanathanan-Koerner)
- 피팅 계수 → 물리 파라미터 (d, |m̃|)

모델: G(s) = e^{−sT}·b0 / (s² + a1·s + a0)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd

from exceptions import (
    MagpendDimensionError,
    MagpendIllConditionedError,
    MagpendInvalidConfigError,
    MagpendNonPhysicalFitError,
)

logger = logging.getLogger(__name__)

SK_PASSES = 10
DELAY_GRID_PER_SAMPLE = 10
MAX_DELAY_SAMPLES = 5
MAX_DESIGN_CONDITION = 1e8
ZERO_INPUT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class MultisineConfig:
    """멀티사인 실험 설정 (기본: 0.1–10 Hz, fs 100 Hz, N 1000, r 10, 10주기 중 4주기 폐기)"""
    f_min: float = 0.1
    f_max: float = 10.0
    fs: float = 100.0
    N: int = 1000
    r: int = 10
    p_total: int = 10
    p_discard: int = 4
    amp: float = math.radians(0.5)   # RMS (rad)

    def __post_init__(self):
        if not (0.0 <= self.f_min < self.f_max <= self.fs / 2.0):
            raise MagpendInvalidConfigError(
                f"대역이 올바르지 않습니다: 0 ≤ {self.f_min} < {self.f_max} ≤ {self.fs / 2.0}",
                key="SYSID_F_MAX",
            )
        if self.N < 2:
            raise MagpendInvalidConfigError(f"주기당 샘플 수는 2 이상이어야 합니다: {self.N}", key="SYSID_N")
        if self.r < 1:
            raise MagpendInvalidConfigError(f"실현 수는 1 이상이어야 합니다: {self.r}", key="SYSID_REALIZATIONS")
        if not (self.p_total > self.p_discard >= 0):
            raise MagpendInvalidConfigError(
                f"주기 설정 오류: p_total={self.p_total}, p_discard={self.p_discard}",
                key="SYSID_DISCARD_PERIODS",
            )
        if not self.amp > 0:
            raise MagpendInvalidConfigError(f"진폭은 0보다 커야 합니다: {self.amp}", key="SYSID_AMPLITUDE_DEG")

    @property
    def Ts(self) -> float:
        return 1.0 / self.fs

    @property
    def p_effective(self) -> int:
        return self.p_total - self.p_discard


@dataclass(frozen=True)
class FrfEstimate:
    """여기 주파수별 BLA, σ_nl, 가중치"""
    freqs: np.ndarray
    G_bla: np.ndarray
    sigma_nl: np.ndarray
    W: np.ndarray = None

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=float)
        G = np.asarray(self.G_bla, dtype=complex)
        sigma = np.asarray(self.sigma_nl, dtype=float)
        W = np.ones_like(freqs) if self.W is None else np.asarray(self.W, dtype=float)
        if not (len(freqs) == len(G) == len(sigma) == len(W)):
            raise MagpendDimensionError(
                f"FRF 길이 불일치: freqs={len(freqs)}, G={len(G)}, sigma={len(sigma)}, W={len(W)}"
            )
        if np.any(sigma < 0):
            raise MagpendDimensionError("sigma_nl은 음수일 수 없습니다")
        if np.any(W <= 0) or np.any(W > 1):
            raise MagpendDimensionError("가중치는 (0, 1] 범위여야 합니다")
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "G_bla", G)
        object.__setattr__(self, "sigma_nl", sigma)
        object.__setattr__(self, "W", W)

    def with_weights(self, W) -> "FrfEstimate":
        return FrfEstimate(self.freqs, self.G_bla, self.sigma_nl, W)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "f_hz": self.freqs,
            "re_g": self.G_bla.real,
            "im_g": self.G_bla.imag,
            "sigma_nl": self.sigma_nl,
            "weight": self.W,
        })

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "FrfEstimate":
        return cls(
            freqs=frame["f_hz"].to_numpy(),
            G_bla=frame["re_g"].to_numpy() + 1j * frame["im_g"].to_numpy(),
            sigma_nl=frame["sigma_nl"].to_numpy(),
            W=frame["weight"].to_numpy(),
        )


@dataclass(frozen=True)
class SosDelayFit:
    """G(s) = e^{−sT}·b0/(s² + a1·s + a0)"""
    b0: float
    a1: float
    a0: float
    T: float
    residual: float = 0.0
    residual_history: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if not self.b0 > 0:
            raise MagpendNonPhysicalFitError(f"b0는 양수여야 합니다: {self.b0}")
        if self.T < 0:
            raise MagpendNonPhysicalFitError(f"지연 T는 0 이상이어야 합니다: {self.T}")

    def response(self, freqs_hz) -> np.ndarray:
        s = 2j * np.pi * np.asarray(freqs_hz, dtype=float)
        return np.exp(-s * self.T) * self.b0 / (s * s + self.a1 * s + self.a0)

    @property
    def natural_frequency_hz(self) -> float:
        return math.sqrt(max(self.a0, 0.0)) / (2.0 * math.pi)

    @property
    def damping_ratio(self) -> float:
        return self.a1 / (2.0 * math.sqrt(self.a0)) if self.a0 > 0 else math.nan


class PhysicalParams(NamedTuple):
    d: float
    m_dip: float
    consistency_residual: float


# ========================================
# 멀티사인 설계
# ========================================

def excited_bins(cfg: MultisineConfig) -> np.ndarray:
    """여기 DFT 빈 인덱스 (DC, 나이퀴스트 제외)"""
    k_min = max(1, math.ceil(cfg.f_min * cfg.N / cfg.fs - 1e-9))
    k_max = math.floor(cfg.f_max * cfg.N / cfg.fs + 1e-9)
    if cfg.N % 2 == 0:
        k_max = min(k_max, cfg.N // 2 - 1)
    return np.arange(k_min, k_max + 1)


def bin_frequencies(cfg: MultisineConfig) -> np.ndarray:
    return excited_bins(cfg) * cfg.fs / cfg.N


def design_multisine(cfg: MultisineConfig, seed: int) -> np.ndarray:
    """
    랜덤 위상 멀티사인 1주기

    Args:
        cfg: 멀티사인 설정
        seed: 위상 난수 시드

    Returns:
        N 샘플 신호 (RMS = cfg.amp)
    """
    bins = excited_bins(cfg)
    if bins.size == 0:
        raise MagpendInvalidConfigError(
            f"여기 빈이 없습니다: {cfg.f_min}–{cfg.f_max} Hz, N={cfg.N}, fs={cfg.fs}",
            key="SYSID_F_MIN",
        )
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=bins.size)

    spectrum = np.zeros(cfg.N // 2 + 1, dtype=complex)
    spectrum[bins] = np.exp(1j * phases)
    signal = np.fft.irfft(spectrum, n=cfg.N)
    return signal * (cfg.amp / np.sqrt(np.mean(signal ** 2)))


# ========================================
# FRF 추정
# ========================================

def average_periods(records) -> np.ndarray:
    """
    주기별 DFT 의 빈별 평균

    Args:
        records: p×N (같은 길이의 주기들)

    Returns:
        rfft 빈 (N//2+1) 복소 스펙트럼
    """
    lengths = {len(r) for r in records}
    if len(records) == 0:
        raise MagpendDimensionError("평균할 주기가 없습니다")
    if len(lengths) != 1:
        raise MagpendDimensionError(f"주기 길이가 다릅니다: {sorted(lengths)}")
    data = np.asarray(records, dtype=float)
    return np.fft.rfft(data, axis=1).mean(axis=0)


def split_periods(signal, N: int, p_total: int, p_discard: int) -> np.ndarray:
    """연속 기록 → 과도 주기 폐기 후 (p_total − p_discard)×N"""
    signal = np.asarray(signal, dtype=float)
    if signal.size < N * p_total:
        raise MagpendDimensionError(f"기록 길이 부족: {signal.size} < {N * p_total}")
    return signal[:N * p_total].reshape(p_total, N)[p_discard:]


def estimate_bla(U_spectra, Y_spectra, freqs: Optional[Sequence[float]] = None) -> FrfEstimate:
    """
    실현별 ETFE, 평균 (BLA), 평균의 표본 표준편차

    Args:
        U_spectra: r×bins 입력 스펙트럼 (여기 빈만)
        Y_spectra: r×bins 출력 스펙트럼
        freqs: 빈 주파수 (Hz), 생략 시 빈 인덱스

    Returns:
        FrfEstimate (W = 1)
    """
    U = np.atleast_2d(np.asarray(U_spectra, dtype=complex))
    Y = np.atleast_2d(np.asarray(Y_spectra, dtype=complex))
    if U.shape != Y.shape:
        raise MagpendDimensionError(f"입출력 스펙트럼 차원 불일치: {U.shape} vs {Y.shape}")
    r, n_bins = U.shape
    if r < 2:
        raise MagpendDimensionError(f"σ_nl 추정에는 실현이 2개 이상 필요합니다: r={r}")
    freqs = np.arange(n_bins, dtype=float) if freqs is None else np.asarray(freqs, dtype=float)

    scale = np.abs(U).max() if U.size else 0.0
    keep = np.all(np.abs(U) > ZERO_INPUT_TOLERANCE * scale, axis=0)
    if not np.all(keep):
        logger.warning(f"⚠️ 입력이 0인 빈 {int(np.sum(~keep))}개 제외: {freqs[~keep]}")
    U, Y, freqs = U[:, keep], Y[:, keep], freqs[keep]

    G = Y / U
    G_bla = G.mean(axis=0)
    sigma = np.sqrt(np.sum(np.abs(G - G_bla) ** 2, axis=0) / (r * (r - 1)))
    return FrfEstimate(freqs=freqs, G_bla=G_bla, sigma_nl=sigma)


def weights_from_sigma(sigma_nl, G_bla) -> np.ndarray:
    """
    W_k = 1/(1 + (σ_k/|G_k|)/ρ), ρ = 빈별 상대 불확도의 중앙값

    ρ = 0 이면 가장 작은 양의 상대 불확도로 대체, 양수가 없으면 W = 1.
    """
    sigma = np.asarray(sigma_nl, dtype=float)
    magnitude = np.abs(np.asarray(G_bla, dtype=complex))
    with np.errstate(divide="ignore", invalid="ignore"):
        relative = np.where(magnitude > 0, sigma / magnitude, np.inf)
    relative = np.where(sigma == 0, 0.0, relative)

    rho = float(np.median(relative)) if relative.size else 0.0
    if not rho > 0 or not math.isfinite(rho):
        positive = relative[(relative > 0) & np.isfinite(relative)]
        if positive.size == 0:
            return np.ones_like(sigma)
        rho = float(positive.min())

    W = 1.0 / (1.0 + relative / rho)
    return np.clip(W, np.finfo(float).tiny, 1.0)


# ========================================
# 전달함수 피팅
# ========================================

def _levy_solve(H: np.ndarray, s: np.ndarray, weights: np.ndarray) -> np.ndarray:
    # b0 − a1·H·s − a0·H = H·s²  (가중 선형 최소제곱, 실수부/허수부 적층)
    design = np.column_stack([np.ones_like(H), -H * s, -H]) * weights[:, None]
    target = H * s * s * weights
    A = np.vstack([design.real, design.imag])
    y = np.concatenate([target.real, target.imag])

    scale = np.linalg.norm(A, axis=0)
    scale[scale == 0] = 1.0
    A_scaled = A / scale
    cond = np.linalg.cond(A_scaled)
    if not math.isfinite(cond) or cond > MAX_DESIGN_CONDITION:
        raise MagpendIllConditionedError(
            f"정규방정식 조건수 과대: cond = {cond:.3e}",
            condition_number=cond,
        )
    theta, *_ = np.linalg.lstsq(A_scaled, y, rcond=None)
    return theta / scale


def _weighted_residual(theta, H, s, W) -> float:
    b0, a1, a0 = theta
    model = b0 / (s * s + a1 * s + a0)
    return float(np.sum((W * np.abs(model - H)) ** 2))


def fit_rational(H: np.ndarray, s: np.ndarray, W: np.ndarray,
                 passes: int = SK_PASSES) -> tuple[np.ndarray, float, list[float]]:
    """
    b0/(s² + a1·s + a0) 피팅: Levy 선형화 후 Sanathanan-Koerner 재가중

    잔차가 줄지 않는 첫 패스에서 멈추므로 잔차 이력은 순감소한다.
    """
    theta = _levy_solve(H, s, W)
    best = _weighted_residual(theta, H, s, W)
    history = [best]
    for _ in range(passes):
        denominator = np.abs(s * s + theta[1] * s + theta[2])
        denominator[denominator == 0] = np.finfo(float).tiny
        candidate = _levy_solve(H, s, W / denominator)
        residual = _weighted_residual(candidate, H, s, W)
        if not residual < best:
            break
        theta, best = candidate, residual
        history.append(best)
    return theta, best, history


def fit_sos_delay(frf: FrfEstimate, Ts: float = 0.01, W=None,
                  max_delay_samples: int = MAX_DELAY_SAMPLES) -> SosDelayFit:
    """
    가중 2차 + 지연 모델 피팅

    T 를 0 ~ max_delay_samples·Ts 범위에서 Ts/10 간격으로 격자 탐색하고
    각 T 에서 지연을 제거한 FRF 에 유리함수를 피팅, 전역 최소를 반환한다.

    Args:
        frf: FRF 추정 (가중치 frf.W 사용)
        Ts: 샘플 시간 (격자 간격 기준)
        W: 사용자 가중치 (생략 시 frf.W)

    Raises:
        MagpendDimensionError: 여기 빈 4개 미만
        MagpendIllConditionedError: 정규방정식 조건수 과대
        MagpendNonPhysicalFitError: 모든 격자점에서 b0 ≤ 0
    """
    if len(frf.freqs) < 4:
        raise MagpendDimensionError(f"피팅에는 여기 빈이 4개 이상 필요합니다: {len(frf.freqs)}")
    W = frf.W if W is None else np.asarray(W, dtype=float)
    s = 2j * np.pi * frf.freqs

    best_fit = None
    for i in range(max_delay_samples * DELAY_GRID_PER_SAMPLE + 1):
        T = i * Ts / DELAY_GRID_PER_SAMPLE
        H = frf.G_bla * np.exp(s * T)
        theta, residual, history = fit_rational(H, s, W)
        if theta[0] <= 0:
            continue
        if best_fit is None or residual < best_fit[1]:
            best_fit = (theta, residual, history, T)

    if best_fit is None:
        raise MagpendNonPhysicalFitError("모든 지연 격자점에서 b0 ≤ 0 입니다")

    theta, residual, history, T = best_fit
    fit = SosDelayFit(b0=float(theta[0]), a1=float(theta[1]), a0=float(theta[2]), T=T,
                      residual=residual, residual_history=tuple(history))
    logger.info(
        f"📐 전달함수 피팅: b0 = {fit.b0:.4f}, a1 = {fit.a1:.4f}, a0 = {fit.a0:.4f}, "
        f"T = {fit.T * 1e3:.1f} ms, 잔차 = {residual:.3e}"
    )
    return fit


def physical_params_from_fit(fit: SosDelayFit, p) -> PhysicalParams:
    """
    M = 0 축약 J·α̈ + d·α̇ + (|m̃||b| − ηg)·α = |m̃||b|·u 에 계수 대응

    m_dip = b0·J/|b|, d = a1·J, 일관성 잔차 |a0 − (b0 − η·g/J)|

    Raises:
        MagpendNonPhysicalFitError: d < 0 또는 m_dip ≤ 0
    """
    J, eta = p.lumped
    m_dip = fit.b0 * J / p.b_mag
    d = fit.a1 * J
    residual = abs(fit.a0 - (fit.b0 - eta * p.g / J))
    if d < 0 or m_dip <= 0:
        raise MagpendNonPhysicalFitError(
            f"물리적으로 불가능한 식별 결과: d = {d:.4e}, m_dip = {m_dip:.4e}",
            d=d, m_dip=m_dip,
        )
    return PhysicalParams(d=d, m_dip=m_dip, consistency_residual=residual)


# ========================================
# 식별 파이프라인 보조
# ========================================

def spectra_from_records(u_records, y_records, cfg: MultisineConfig) -> tuple[np.ndarray, np.ndarray]:
    """
    실현별 연속 기록 → 과도 폐기 + 주기 평균 → 여기 빈 스펙트럼 (r×bins)
    """
    bins = excited_bins(cfg)
    U, Y = [], []
    for u, y in zip(u_records, y_records):
        U.append(average_periods(split_periods(u, cfg.N, cfg.p_total, cfg.p_discard))[bins])
        Y.append(average_periods(split_periods(y, cfg.N, cfg.p_total, cfg.p_discard))[bins])
    return np.array(U), np.array(Y)


def simulate_lti_periodic(A: np.ndarray, B: np.ndarray, C: np.ndarray, u_period,
                          n_periods: int, delay_steps: int = 0) -> np.ndarray:
    """
    이산 LTI 모델의 주기 정상상태 응답 (선형 플랜트 기준 해)

    x0 = (I − A^N)⁻¹·Σ A^{N−1−k}·B·v[k] 로 시작해 과도 응답이 없다.
    v 는 delay_steps 만큼 순환 지연된 입력.

    Returns:
        y: N·n_periods 출력
    """
    A = np.atleast_2d(A)
    b = np.asarray(B, dtype=float).reshape(A.shape[0])
    c = np.asarray(C, dtype=float).reshape(A.shape[0])
    u_period = np.asarray(u_period, dtype=float)
    N = u_period.size
    v = np.roll(u_period, delay_steps)

    x = np.zeros(A.shape[0])
    for k in range(N):
        x = A @ x + b * v[k]
    x = np.linalg.solve(np.eye(A.shape[0]) - np.linalg.matrix_power(A, N), x)

    y = np.empty(N * n_periods)
    for k in range(N * n_periods):
        y[k] = c @ x
        x = A @ x + b * v[k % N]
    return y
