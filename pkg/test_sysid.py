"""
sysid.py 검증 테스트

- 멀티사인 설계 (여기 빈, RMS, 스펙트럼)
- BLA / σ_nl (선형 플랜트 기준 해, 0 입력 빈 제외)
- 2차 + 지연 피팅 (합성 FRF), 물리 파라미터 변환
- 식별 파이프라인 (선형 / 비선형 / 노이즈)
"""

import logging
import math
import sys

import numpy as np

from config import DEFAULTS
from dynamics import PlantParams, linearized_model
from exceptions import (
    MagpendDimensionError,
    MagpendInvalidConfigError,
    MagpendNonPhysicalFitError,
)
from experiment_runner import run_sysid_experiment
from simulation_engine import SimConfig, simulate_actuator_response
from sysid import (
    SK_PASSES,
    FrfEstimate,
    MultisineConfig,
    SosDelayFit,
    average_periods,
    bin_frequencies,
    design_multisine,
    estimate_bla,
    excited_bins,
    fit_sos_delay,
    physical_params_from_fit,
    spectra_from_records,
    split_periods,
    weights_from_sigma,
)

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

SMALL_AMPLITUDE = math.radians(0.5)


def _true_fit(p: PlantParams, T: float) -> SosDelayFit:
    J, eta = p.lumped
    mb = p.m_dip * p.b_mag
    return SosDelayFit(b0=mb / J, a1=p.d / J, a0=(mb - eta * p.g) / J, T=T)


def test_excited_bins_default():
    cfg = MultisineConfig()
    bins = excited_bins(cfg)
    assert bins[0] == 1 and bins[-1] == 100 and len(bins) == 100
    assert np.allclose(bin_frequencies(cfg), np.arange(1, 101) * 0.1)
    # 기본 RMS 진폭은 SYSID_AMPLITUDE_DEG 기본값과 같다
    assert cfg.amp == math.radians(float(DEFAULTS["SYSID_AMPLITUDE_DEG"])) == math.radians(0.5)


def test_multisine_rms_and_spectrum():
    """RMS = amp, 여기 빈 외 스펙트럼 0, 여기 빈 크기 동일"""
    cfg = MultisineConfig(amp=SMALL_AMPLITUDE)
    u = design_multisine(cfg, seed=3)
    assert len(u) == cfg.N
    assert abs(np.sqrt(np.mean(u ** 2)) - SMALL_AMPLITUDE) <= 1e-12

    spectrum = np.abs(np.fft.rfft(u))
    bins = excited_bins(cfg)
    mask = np.zeros(spectrum.size, dtype=bool)
    mask[bins] = True
    assert spectrum[~mask].max() <= 1e-10 * spectrum[mask].max()
    assert np.ptp(spectrum[mask]) <= 1e-10 * spectrum[mask].max()

    # 같은 시드는 같은 신호
    assert np.array_equal(u, design_multisine(cfg, seed=3))
    assert not np.array_equal(u, design_multisine(cfg, seed=4))


def test_multisine_config_validation():
    bad = [
        {"f_max": 60.0},
        {"f_min": 5.0, "f_max": 1.0},
        {"N": 1},
        {"r": 0},
        {"p_total": 4, "p_discard": 4},
        {"amp": 0.0},
    ]
    for kwargs in bad:
        try:
            MultisineConfig(**kwargs)
        except MagpendInvalidConfigError as e:
            assert e.key.startswith("SYSID_")
        else:
            raise AssertionError(f"잘못된 멀티사인 설정 허용됨: {kwargs}")


def test_period_helpers():
    try:
        average_periods([np.zeros(10), np.zeros(9)])
    except MagpendDimensionError:
        pass
    else:
        raise AssertionError("주기 길이 불일치 미검출")

    try:
        split_periods(np.zeros(99), 10, 10, 4)
    except MagpendDimensionError:
        pass
    else:
        raise AssertionError("기록 길이 부족 미검출")

    periods = split_periods(np.arange(100.0), 10, 10, 4)
    assert periods.shape == (6, 10)
    assert periods[0, 0] == 40.0


def test_estimate_bla_edge_cases():
    """실현 1개 오류, 0 입력 빈 제외, 동일 실현 σ = 0, 가중치 1"""
    U = np.array([[1.0, 0.0, 2.0], [-1.0, 0.0, -2.0]], dtype=complex)
    Y = 3.0 * U
    frf = estimate_bla(U, Y, freqs=[0.1, 0.2, 0.3])
    assert list(frf.freqs) == [0.1, 0.3]
    assert np.allclose(frf.G_bla, 3.0)
    assert np.all(frf.sigma_nl == 0.0)
    assert np.array_equal(weights_from_sigma(frf.sigma_nl, frf.G_bla), np.ones(2))

    try:
        estimate_bla(U[:1], Y[:1])
    except MagpendDimensionError:
        pass
    else:
        raise AssertionError("실현 1개 허용됨")

    W = weights_from_sigma(np.array([0.0, 0.1, 1.0]), np.array([1.0, 1.0, 1.0]))
    assert np.all((W > 0) & (W <= 1.0))
    assert W[0] == 1.0 and W[1] > W[2]


def test_fit_exact_synthetic_frf():
    """G(s) = e^{−0.02s}·370/(s² + 0.7s + 289), 0.1–10 Hz 격자"""
    logger.info("=" * 80)
    logger.info("🧪 합성 FRF 피팅")
    logger.info("=" * 80)

    true = SosDelayFit(b0=370.0, a1=0.7, a0=289.0, T=0.02)
    freqs = bin_frequencies(MultisineConfig())
    frf = FrfEstimate(freqs=freqs, G_bla=true.response(freqs), sigma_nl=np.zeros_like(freqs))
    fit = fit_sos_delay(frf, Ts=0.01)

    logger.info(f"   b0 = {fit.b0:.9f}, a1 = {fit.a1:.9f}, a0 = {fit.a0:.9f}, T = {fit.T}")
    assert abs(fit.T - 0.02) <= 1e-12
    assert abs(fit.b0 - 370.0) <= 1e-6 * 370.0
    assert abs(fit.a1 - 0.7) <= 1e-6 * 0.7
    assert abs(fit.a0 - 289.0) <= 1e-6 * 289.0
    history = list(fit.residual_history)
    assert all(b <= a for a, b in zip(history, history[1:]))
    assert abs(fit.natural_frequency_hz - math.sqrt(289.0) / (2 * math.pi)) <= 1e-6


def test_period_averaging_reduces_noise_variance():
    """백색 노이즈 p 주기 평균 → 빈별 분산 1/p (몬테카를로 200회)"""
    rng = np.random.default_rng(21)
    N, p, trials = 64, 8, 200
    x = rng.normal(size=N)
    assert np.allclose(average_periods(np.tile(x, (4, 1))), np.fft.rfft(x), rtol=0, atol=1e-12)

    single, averaged = [], []
    for _ in range(trials):
        noise = rng.normal(0.0, 1.0, size=(p, N))
        single.append(average_periods(noise[:1])[1:N // 2])
        averaged.append(average_periods(noise)[1:N // 2])
    var_single = np.mean(np.abs(np.array(single)) ** 2)
    var_averaged = np.mean(np.abs(np.array(averaged)) ** 2)
    logger.info(f"   분산: 단일 주기 {var_single:.2f}, {p}주기 평균 {var_averaged:.2f} (기대 {N}, {N / p})")
    assert abs(var_averaged / (N / p) - 1.0) <= 0.1
    assert 0.8 * p <= var_single / var_averaged <= 1.2 * p


def test_weights_scale_invariance():
    rng = np.random.default_rng(4)
    sigma = rng.uniform(0.0, 0.2, size=50)
    G = rng.normal(size=50) + 1j * rng.normal(size=50)
    W = weights_from_sigma(sigma, G)
    assert np.allclose(weights_from_sigma(7.5 * sigma, 7.5 * G), W, rtol=1e-12, atol=0.0)

    # σ/|G| = ρ (중앙값) → 0.5
    W3 = weights_from_sigma(np.array([0.1, 0.2, 0.3]), np.ones(3))
    assert W3[1] == 0.5
    assert W3[0] > W3[1] > W3[2]


def test_fit_zero_delay():
    true = SosDelayFit(b0=370.0, a1=0.7, a0=289.0, T=0.0)
    freqs = bin_frequencies(MultisineConfig())
    frf = FrfEstimate(freqs=freqs, G_bla=true.response(freqs), sigma_nl=np.zeros_like(freqs))
    fit = fit_sos_delay(frf, Ts=0.01)
    assert fit.T == 0.0
    assert abs(fit.b0 - 370.0) <= 1e-6 * 370.0


def test_weighted_fit_rejects_corrupted_resonance_bins():
    """공진 부근 빈 손상 + 큰 σ_nl: 가중 피팅이 비가중 피팅보다 참값에 가까움"""
    logger.info("=" * 80)
    logger.info("🧪 가중 vs 비가중 피팅 (손상된 공진 빈)")
    logger.info("=" * 80)

    true = SosDelayFit(b0=370.0, a1=0.7, a0=289.0, T=0.02)
    freqs = bin_frequencies(MultisineConfig())
    G = true.response(freqs)
    corrupt = (freqs >= 2.4) & (freqs <= 3.0)
    G_bad = np.where(corrupt, G * 1.3 * np.exp(0.3j), G)
    sigma = np.where(corrupt, 0.3, 1e-3) * np.abs(G)
    W = weights_from_sigma(sigma, G_bad)
    assert W[corrupt].max() < W[~corrupt].min()

    frf = FrfEstimate(freqs=freqs, G_bla=G_bad, sigma_nl=sigma, W=W)
    weighted = fit_sos_delay(frf, Ts=0.01)
    unweighted = fit_sos_delay(frf, Ts=0.01, W=np.ones_like(freqs))

    def error(fit):
        return max(abs(fit.b0 - 370.0) / 370.0, abs(fit.a1 - 0.7) / 0.7, abs(fit.a0 - 289.0) / 289.0)

    logger.info(f"   최대 상대 오차: 가중 {error(weighted):.3e}, 비가중 {error(unweighted):.3e}")
    assert error(weighted) < error(unweighted)
    for fit in (weighted, unweighted):
        history = list(fit.residual_history)
        assert 1 <= len(history) <= SK_PASSES + 1
        assert all(b < a for a, b in zip(history, history[1:]))


def test_physical_params_round_trip():
    p = PlantParams().detached()
    params = physical_params_from_fit(_true_fit(p, 0.0), p)
    assert abs(params.d - p.d) <= 1e-12 * p.d + 1e-18
    assert abs(params.m_dip - p.m_dip) <= 1e-12 * p.m_dip
    assert params.consistency_residual <= 1e-9

    try:
        physical_params_from_fit(SosDelayFit(b0=370.0, a1=-0.5, a0=289.0, T=0.0), p)
    except MagpendNonPhysicalFitError as e:
        assert e.d < 0
    else:
        raise AssertionError("음수 감쇠 허용됨")

    try:
        SosDelayFit(b0=-1.0, a1=0.5, a0=289.0, T=0.0)
    except MagpendNonPhysicalFitError:
        pass
    else:
        raise AssertionError("음수 b0 허용됨")


def test_linear_plant_pipeline():
    """선형 플랜트: σ_nl ≈ 0, BLA = 이산 FRF, (d, m_dip) 2% 이내"""
    logger.info("=" * 80)
    logger.info("🧪 선형 플랜트 식별")
    logger.info("=" * 80)

    cfg = SimConfig(noise_std=0.0)
    ms_cfg = MultisineConfig(amp=SMALL_AMPLITUDE)
    result = run_sysid_experiment(cfg, ms_cfg, linear=True)

    G = result.frf.G_bla
    assert result.frf.sigma_nl.max() <= 1e-10 * np.abs(G).max()

    model = linearized_model(PlantParams().detached(), ms_cfg.Ts)
    A = model.A[np.ix_([0, 2], [0, 2])]
    b = model.B[[0, 2], 0]
    z = np.exp(2j * np.pi * result.frf.freqs * ms_cfg.Ts)
    true = np.array([(np.linalg.solve(zk * np.eye(2) - A, b))[0] * zk ** (-cfg.delay_steps) for zk in z])
    assert np.abs(G - true).max() <= 1e-9 * np.abs(true).max()

    errors = result.relative_errors
    logger.info(f"   T = {result.fit.T * 1e3:.1f} ms, 상대 오차 {errors}")
    assert errors["d"] <= 0.02
    assert errors["m_dip"] <= 0.02
    assert abs(result.fit.natural_frequency_hz - 2.70) <= 0.05


def test_linear_plant_pipeline_with_noise():
    """측정 노이즈 0.05° → 5% 이내"""
    cfg = SimConfig(noise_std=math.radians(0.05), seed=7)
    result = run_sysid_experiment(cfg, MultisineConfig(amp=SMALL_AMPLITUDE), linear=True)
    errors = result.relative_errors
    logger.info(f"   노이즈 포함 상대 오차 {errors}")
    assert errors["d"] <= 0.05
    assert errors["m_dip"] <= 0.05
    assert result.frf.sigma_nl.max() > 0


def test_nonlinear_plant_pipeline_small_amplitude():
    """비선형 플랜트, 소진폭, 노이즈 0 → 2% 이내"""
    logger.info("=" * 80)
    logger.info("🧪 비선형 플랜트 식별 (소진폭)")
    logger.info("=" * 80)

    cfg = SimConfig(dt=1e-3, noise_std=0.0)
    result = run_sysid_experiment(cfg, MultisineConfig(amp=SMALL_AMPLITUDE), linear=False)
    errors = result.relative_errors
    logger.info(f"   상대 오차 {errors}")
    assert errors["d"] <= 0.02
    assert errors["m_dip"] <= 0.02


def test_nonlinear_sigma_peaks_near_resonance():
    """대진폭에서 σ_nl 최대값이 공진 부근 (1.7–3.7 Hz)"""
    cfg = MultisineConfig(amp=0.08, r=4, p_total=6, p_discard=4)
    plant = PlantParams().detached()
    u_records, y_records = [], []
    for i in range(cfg.r):
        u = np.tile(design_multisine(cfg, seed=i), cfg.p_total)
        u_records.append(u)
        y_records.append(simulate_actuator_response(plant, u, cfg.Ts, 1e-3, delay_steps=2))

    U, Y = spectra_from_records(u_records, y_records, cfg)
    frf = estimate_bla(U, Y, bin_frequencies(cfg))
    peak_hz = frf.freqs[int(np.argmax(frf.sigma_nl))]
    logger.info(f"   σ_nl 최대 주파수 = {peak_hz:.2f} Hz")
    assert 1.7 <= peak_hz <= 3.7


def main():
    tests = [
        ("여기 빈", test_excited_bins_default),
        ("멀티사인 RMS/스펙트럼", test_multisine_rms_and_spectrum),
        ("멀티사인 설정 검증", test_multisine_config_validation),
        ("주기 보조 함수", test_period_helpers),
        ("BLA 경계 조건", test_estimate_bla_edge_cases),
        ("합성 FRF 피팅", test_fit_exact_synthetic_frf),
        ("주기 평균 분산 1/p", test_period_averaging_reduces_noise_variance),
        ("가중치 척도 불변", test_weights_scale_invariance),
        ("지연 0 피팅", test_fit_zero_delay),
        ("가중 vs 비가중 피팅", test_weighted_fit_rejects_corrupted_resonance_bins),
        ("물리 파라미터", test_physical_params_round_trip),
        ("선형 플랜트 식별", test_linear_plant_pipeline),
        ("노이즈 포함 식별", test_linear_plant_pipeline_with_noise),
        ("비선형 소진폭 식별", test_nonlinear_plant_pipeline_small_amplitude),
        ("σ_nl 공진 피크", test_nonlinear_sigma_peaks_near_resonance),
    ]

    results = []
    for name, test in tests:
        try:
            test()
            results.append((name, True))
        except Exception as e:
            logger.error(f"❌ {name}: {e}")
            results.append((name, False))

    logger.info("=" * 80)
    for name, passed in results:
        logger.info(f"{'✅ PASS' if passed else '❌ FAIL'}: {name}")
    logger.info("=" * 80)
    return all(passed for _, passed in results)


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
