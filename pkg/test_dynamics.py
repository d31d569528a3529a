"""
dynamics.py 검증 테스트

목적:
- 집중 파라미터 (J, η) 기본값
- 상향 평형점과 선형화 (수치 야코비안 비교)
- RK4 에너지 보존 / 감쇠 시 에너지 비증가
- 진자 분리 플랜트 축약
- 파라미터 검증
"""

import logging
import math
import sys

import numpy as np

from dynamics import (
    PlanarState,
    PlantParams,
    block_diagonal_model,
    continuous_model,
    linearized_model,
    lumped_params,
    magnetic_potential,
    nonlinear_accel,
    plane_models,
    rollout,
    total_energy,
)
from exceptions import MagpendParameterError

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def _state_derivative(x, u, p):
    a_dd, p_dd = nonlinear_accel(PlanarState(*x), u, p)
    return np.array([x[2], x[3], a_dd, p_dd])


def test_lumped_params_defaults():
    """기본 치수의 J, η"""
    logger.info("=" * 80)
    logger.info("🧪 집중 파라미터 기본값")
    logger.info("=" * 80)

    J, eta = lumped_params(PlantParams())
    logger.info(f"   J = {J:.6e}, η = {eta:.6e}")
    assert abs(J - 1.41902e-4) < 1e-9
    assert abs(eta - 1.1802e-3) < 1e-8


def test_upright_equilibrium():
    """원점, u = 0 에서 가속도 0"""
    p = PlantParams()
    assert nonlinear_accel(PlanarState(0.0, 0.0, 0.0, 0.0), 0.0, p) == (0.0, 0.0)


def test_hanging_equilibrium():
    """(π, π, 0, 0), u = π 에서 가속도 0 (sin(π) 반올림 오차 이내)"""
    p = PlantParams()
    a_dd, p_dd = nonlinear_accel(PlanarState(math.pi, math.pi, 0.0, 0.0), math.pi, p)
    logger.info(f"   하향 평형점 가속도 = ({a_dd:.2e}, {p_dd:.2e})")
    assert abs(a_dd) < 1e-10 and abs(p_dd) < 1e-10


def test_magnetic_potential():
    p = PlantParams()
    assert magnetic_potential(0.3, 0.3, p) == -p.m_dip * p.b_mag
    assert abs(magnetic_potential(math.pi / 2, 0.0, p)) < 1e-17
    assert abs(magnetic_potential(math.pi / 3, 0.0, p) + 0.02625) < 1e-15
    # 정렬 상태가 최소
    assert magnetic_potential(0.1, 0.1, p) < magnetic_potential(0.2, 0.1, p)


def test_block_diagonal_model():
    """3D 모델 = 평면 모델 2개의 블록 대각 (평면 간 결합 없음)"""
    model_a, model_b = plane_models(PlantParams(), 0.01)
    A8, B8 = block_diagonal_model(model_a, model_b)
    assert A8.shape == (8, 8) and B8.shape == (8, 2)
    assert np.array_equal(A8[:4, :4], model_a.A_c)
    assert np.array_equal(A8[4:, 4:], model_b.A_c)
    assert np.all(A8[:4, 4:] == 0.0) and np.all(A8[4:, :4] == 0.0)
    assert np.array_equal(B8[:4, 0], model_a.B_c[:, 0])
    assert np.array_equal(B8[4:, 1], model_b.B_c[:, 0])
    assert np.all(B8[:4, 1] == 0.0) and np.all(B8[4:, 0] == 0.0)

    single_A, single_B = block_diagonal_model(model_a)
    assert np.array_equal(single_A, A8) and np.array_equal(single_B, B8)


def test_linearization_matches_jacobian():
    """중앙 차분 야코비안 vs (A_c, B_c), 상대 오차 ≤ 1e-6"""
    logger.info("=" * 80)
    logger.info("🧪 선형화 검증 (수치 야코비안)")
    logger.info("=" * 80)

    p = PlantParams()
    A_c, B_c = continuous_model(p)
    h = 1e-6
    x0 = np.zeros(4)

    J_x = np.empty((4, 4))
    for j in range(4):
        e = np.zeros(4)
        e[j] = h
        J_x[:, j] = (_state_derivative(x0 + e, 0.0, p) - _state_derivative(x0 - e, 0.0, p)) / (2 * h)
    J_u = (_state_derivative(x0, h, p) - _state_derivative(x0, -h, p)) / (2 * h)

    err_A = np.linalg.norm(J_x - A_c) / np.linalg.norm(A_c)
    err_B = np.linalg.norm(J_u - B_c[:, 0]) / np.linalg.norm(B_c)
    logger.info(f"   ‖ΔA‖/‖A‖ = {err_A:.2e}, ‖ΔB‖/‖B‖ = {err_B:.2e}")
    assert err_A <= 1e-6
    assert err_B <= 1e-6


def test_energy_conservation_undamped():
    """감쇠 0, 상수 입력 10 s RK4 (dt = 1e-4) 에너지 상대 드리프트 < 1e-8"""
    logger.info("=" * 80)
    logger.info("🧪 에너지 보존 (d = 0)")
    logger.info("=" * 80)

    p = PlantParams(d=0.0)
    s0 = PlanarState(0.05, math.pi - 0.1, 0.0, 0.0)
    states = rollout(s0, 0.0, p, 1e-4, 100_000)

    e0 = total_energy(PlanarState(*states[0]), 0.0, p)
    e1 = total_energy(PlanarState(*states[-1]), 0.0, p)
    drift = abs(e1 - e0) / abs(e0)
    logger.info(f"   E0 = {e0:.12e}, E1 = {e1:.12e}, 드리프트 = {drift:.2e}")
    assert drift < 1e-8


def test_energy_non_increasing_with_damping():
    """u ≡ 0, d > 0, 진자가 매달린 상태에서 에너지 비증가"""
    p = PlantParams(d=5e-4)
    s0 = PlanarState(0.1, math.pi - 0.3, 0.0, 0.0)
    states = rollout(s0, 0.0, p, 1e-3, 5000)
    energies = np.array([total_energy(PlanarState(*s), 0.0, p) for s in states])

    assert np.all(np.diff(energies) <= 1e-10)
    assert energies[-1] < energies[0]


def test_detached_plant_reduction():
    """M = 0: φ̈ = 0, 선형 모델은 스칼라 액추에이터"""
    p = PlantParams().detached()
    assert p.is_detached
    assert p.M == 0.0

    a_dd, p_dd = nonlinear_accel(PlanarState(0.01, 0.3, 0.2, -0.5), 0.02, p)
    assert p_dd == 0.0
    J, eta = p.lumped
    expected = (eta * p.g * math.sin(0.01) + p.m_dip * p.b_mag * math.sin(0.01) - p.d * 0.2) / J
    assert abs(a_dd - expected) < 1e-9 * abs(expected)

    A_c, B_c = continuous_model(p)
    assert np.all(A_c[3] == 0.0) and B_c[3, 0] == 0.0
    assert abs(B_c[2, 0] - p.m_dip * p.b_mag / J) < 1e-9
    assert abs(-A_c[2, 0] - (p.m_dip * p.b_mag - eta * p.g) / J) < 1e-9


def test_stabilizability():
    p = PlantParams()
    assert p.is_stabilizable
    assert p.stiffness_margin > 0

    weak = PlantParams(b_mag=0.005)
    assert not weak.is_stabilizable


def test_parameter_validation():
    """음수 질량, 0 길이, 알 수 없는 키"""
    for kwargs in ({"M": -1.0}, {"L": 0.0}, {"m_dip": -1.5}, {"d": -1e-4}, {"g": float("nan")}):
        try:
            PlantParams(**kwargs)
        except MagpendParameterError:
            continue
        raise AssertionError(f"예외가 발생하지 않음: {kwargs}")

    try:
        PlantParams.from_dict({"M": 0.0044, "mass_typo": 1.0})
    except MagpendParameterError:
        pass
    else:
        raise AssertionError("알 수 없는 키가 허용됨")

    p = PlantParams(d=2e-4)
    assert PlantParams.from_dict(p.to_dict()) == p


def test_plane_models_are_discrete_zoh():
    """두 평면 모델 동일, 이산 A 는 expm(A_c·Ts)"""
    from scipy.linalg import expm

    p = PlantParams()
    model_a, model_b = plane_models(p, 0.01)
    assert np.array_equal(model_a.A, model_b.A)
    assert np.allclose(model_a.A, expm(model_a.A_c * 0.01), rtol=1e-12, atol=1e-14)
    assert linearized_model(p, 0.01).n_states == 4


def main():
    tests = [
        ("집중 파라미터", test_lumped_params_defaults),
        ("상향 평형점", test_upright_equilibrium),
        ("하향 평형점", test_hanging_equilibrium),
        ("자기 위치 에너지", test_magnetic_potential),
        ("3D 블록 대각 모델", test_block_diagonal_model),
        ("선형화 야코비안", test_linearization_matches_jacobian),
        ("에너지 보존", test_energy_conservation_undamped),
        ("감쇠 에너지 비증가", test_energy_non_increasing_with_damping),
        ("진자 분리 축약", test_detached_plant_reduction),
        ("안정화 조건", test_stabilizability),
        ("파라미터 검증", test_parameter_validation),
        ("평면 모델", test_plane_models_are_discrete_zoh),
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
