"""
control.py 검증 테스트

- 정확 이산화 vs 급수 전개 / 1차 일관성
- DARE (황금비 스칼라 해, 진자 모델 잔차와 안정성, 미수렴)
- 프리필터 정상상태 추종
- LQR 가중치 검증, 피드백 보조 함수
"""

import logging
import math
import sys

import numpy as np

from control import (
    LowPassFilter,
    LqrWeights,
    dare_residual,
    design_controller,
    discretize_exact,
    feedback,
    finite_diff_velocity,
    lowpass_coefficient,
    prefilter_gain,
    prefiltered_setpoint,
    simulate_linear_closed_loop,
    solve_dare,
)
from dynamics import PlantParams, continuous_model, linearized_model
from exceptions import MagpendConvergenceError, MagpendInvalidConfigError

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def _series_discretization(A_c, B_c, Ts, terms=12):
    n = A_c.shape[0]
    A = np.zeros((n, n))
    S = np.zeros((n, n))
    power = np.eye(n)
    for k in range(terms + 1):
        A += power * Ts ** k / math.factorial(k)
        S += power * Ts ** (k + 1) / math.factorial(k + 1)
        power = power @ A_c
    return A, S @ B_c


def test_discretization_matches_series():
    """Ts = 10 ms 에서 12항 급수와 1e-12 이내"""
    logger.info("=" * 80)
    logger.info("🧪 정확 이산화 vs 급수 전개")
    logger.info("=" * 80)

    A_c, B_c = continuous_model(PlantParams())
    A, B = discretize_exact(A_c, B_c, 0.01)
    A_ref, B_ref = _series_discretization(A_c, B_c, 0.01)

    logger.info(f"   ‖A − A_ref‖ = {np.abs(A - A_ref).max():.2e}, ‖B − B_ref‖ = {np.abs(B - B_ref).max():.2e}")
    assert np.abs(A - A_ref).max() <= 1e-12
    assert np.abs(B - B_ref).max() <= 1e-12


def test_discretization_first_order_consistency():
    """‖(A − I)/Ts − A_c‖ 가 Ts 에 선형 비례"""
    A_c, B_c = continuous_model(PlantParams())
    errors = []
    for Ts in (1e-2, 1e-3, 1e-4):
        A, _ = discretize_exact(A_c, B_c, Ts)
        errors.append(np.linalg.norm((A - np.eye(4)) / Ts - A_c))
    ratios = [errors[0] / errors[1], errors[1] / errors[2]]
    logger.info(f"   오차 = {errors}, 비율 = {ratios}")
    for ratio in ratios:
        assert 8.0 < ratio < 12.0


def test_discretization_rejects_bad_ts():
    A_c, B_c = continuous_model(PlantParams())
    for Ts in (0.0, -0.01):
        try:
            discretize_exact(A_c, B_c, Ts)
        except MagpendInvalidConfigError as e:
            assert e.key == "CONTROL_TS"
        else:
            raise AssertionError(f"Ts = {Ts} 허용됨")


def test_dare_golden_ratio():
    """A = B = Q = R = 1 → P = (1 + √5)/2"""
    logger.info("=" * 80)
    logger.info("🧪 DARE 황금비 해")
    logger.info("=" * 80)

    W = LqrWeights(Qw=np.array([[1.0]]), Rw=1.0)
    P, K = solve_dare(np.array([[1.0]]), np.array([[1.0]]), W)
    golden = (1.0 + math.sqrt(5.0)) / 2.0
    logger.info(f"   P = {P[0, 0]:.15f} (기대 {golden:.15f})")
    assert abs(P[0, 0] - golden) <= 1e-12
    assert abs(K[0, 0] - golden / (1.0 + golden)) <= 1e-12


def test_dare_pendulum_model():
    """잔차 ≤ 1e-10·‖P‖, ρ(A − BK) < 1"""
    model = linearized_model(PlantParams(), 0.01)
    W = LqrWeights()
    P, K = solve_dare(model.A, model.B, W)

    residual = dare_residual(model.A, model.B, W, P)
    rho = np.max(np.abs(np.linalg.eigvals(model.A - model.B @ K)))
    logger.info(f"   K = {K.ravel()}, 잔차 = {residual:.2e}, ρ = {rho:.4f}")
    assert residual <= 1e-10 * np.linalg.norm(P)
    assert rho < 1.0
    assert np.allclose(P, P.T)


def test_dare_unstabilizable_raises():
    """불안정 + 비가제어 → MagpendConvergenceError"""
    W = LqrWeights(Qw=np.array([[1.0]]), Rw=1.0)
    with np.errstate(all="ignore"):
        try:
            solve_dare(np.array([[2.0]]), np.array([[0.0]]), W)
        except MagpendConvergenceError as e:
            assert e.iterations is not None
        else:
            raise AssertionError("미수렴 예외가 발생하지 않음")


def test_prefilter_steady_state_tracking():
    """상수 설정점 선형 시뮬레이션 정상상태 α 오차 ≤ 1e-9"""
    logger.info("=" * 80)
    logger.info("🧪 프리필터 정상상태 추종")
    logger.info("=" * 80)

    model = linearized_model(PlantParams(), 0.01)
    ctrl = design_controller(model)
    alpha_sp = math.radians(2.0)
    states, _ = simulate_linear_closed_loop(model, ctrl.K, 6000, x_sp=ctrl.setpoint(alpha_sp))

    error = abs(states[-1, 0] - alpha_sp)
    logger.info(f"   F = {ctrl.F:.6f}, 최종 α 오차 = {error:.2e} rad")
    assert error <= 1e-9
    assert abs(states[-1, 1]) <= 1e-9


def test_dare_zero_state_weight():
    """Qw = 0, 안정한 A → P = 0, K = 0"""
    A = np.array([[0.5, 0.1], [0.0, -0.3]])
    B = np.array([[1.0], [1.0]])
    P, K = solve_dare(A, B, LqrWeights(Qw=np.zeros((2, 2)), Rw=1.0))
    assert np.all(P == 0.0)
    assert np.all(K == 0.0)


def test_prefilter_tracks_with_scaled_gain():
    """K → c·K: 새 F 로 정상상태 α = α_sp 유지 (c 는 LQR 이득 여유 안쪽)"""
    logger.info("=" * 80)
    logger.info("🧪 프리필터 이득 스케일링")
    logger.info("=" * 80)

    model = linearized_model(PlantParams(), 0.01)
    ctrl = design_controller(model)
    b = model.B[:, 0]
    gamma = math.sqrt(1.0 / (1.0 + float(b @ ctrl.P_dare @ b)))
    alpha_sp = math.radians(2.0)

    for c in (0.5 * (1.0 + 1.0 / (1.0 + gamma)), 0.5 * (1.0 + 1.0 / (1.0 - gamma))):
        K = c * ctrl.K
        rho = float(np.max(np.abs(np.linalg.eigvals(model.A - model.B @ K))))
        assert rho < 1.0
        F = prefilter_gain(model, K)
        assert F != ctrl.F

        n_steps = int(min(200000, math.ceil(40.0 / (1.0 - rho))))
        states, _ = simulate_linear_closed_loop(model, K, n_steps,
                                                x_sp=prefiltered_setpoint(alpha_sp, 0.0, F))
        error = abs(states[-1, 0] - alpha_sp)
        logger.info(f"   c = {c:.3f}, ρ = {rho:.4f}, F = {F:.6f}, 정상상태 오차 = {error:.2e}")
        assert error <= 1e-9


def test_lqr_weights_validation():
    bad = [
        {"Qw": np.array([[1.0, 2.0], [0.0, 1.0]])},
        {"Qw": np.diag([1.0, -1.0])},
        {"Qw": np.ones((2, 3))},
        {"Rw": 0.0},
    ]
    for kwargs in bad:
        try:
            LqrWeights(**kwargs)
        except MagpendInvalidConfigError as e:
            assert e.key in ("CONTROL_Q_DIAG", "CONTROL_R")
        else:
            raise AssertionError(f"잘못된 가중치 허용됨: {kwargs}")

    W = LqrWeights.from_diagonal([1, 2, 3, 4], 0.5)
    assert np.array_equal(W.Qw, np.diag([1.0, 2.0, 3.0, 4.0]))
    assert W.Rw == 0.5


def test_feedback_helpers():
    K = np.array([[2.0, -3.0, 0.5, 0.1]])
    x_sp = prefiltered_setpoint(0.1, 0.2, 1.5)
    assert np.array_equal(x_sp, np.array([1.5 * 0.1, 0.0, 1.5 * 0.2, 0.0]))
    x = np.array([0.05, 0.01, 0.0, -0.1])
    assert abs(feedback(x_sp, x, K) - float(K.ravel() @ (x_sp - x))) < 1e-15
    assert finite_diff_velocity(0.1, 0.3, 0.01) == (0.3 - 0.1) / 0.01

    a = lowpass_coefficient(0.05, 0.01)
    assert abs(a - (1.0 - math.exp(-2.0 * math.pi * 0.05 * 0.01))) < 1e-15
    f = LowPassFilter(0.5, 0.01)
    for _ in range(2000):
        f.update(1.0)
    assert abs(f.value - 1.0) < 1e-9


def main():
    tests = [
        ("이산화 급수 비교", test_discretization_matches_series),
        ("이산화 1차 일관성", test_discretization_first_order_consistency),
        ("이산화 Ts 검증", test_discretization_rejects_bad_ts),
        ("DARE 황금비", test_dare_golden_ratio),
        ("DARE 진자 모델", test_dare_pendulum_model),
        ("DARE 미수렴", test_dare_unstabilizable_raises),
        ("DARE Qw = 0", test_dare_zero_state_weight),
        ("프리필터 추종", test_prefilter_steady_state_tracking),
        ("프리필터 이득 스케일링", test_prefilter_tracks_with_scaled_gain),
        ("LQR 가중치 검증", test_lqr_weights_validation),
        ("피드백 보조 함수", test_feedback_helpers),
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
