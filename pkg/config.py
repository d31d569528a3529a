"""
툴킷 설정 관리

dotenv 형식 설정 파일 (KEY=value, 접두사로 섹션 구분) 과 환경변수에서
설정을 로드하고 검증하는 MagpendConfig 클래스.

섹션: PLANT_*, FIELD_*, CONTROL_*, COMP_*, SIM_*, SYSID_*, ILC_*, TRAJ_*
각도는 설정 파일에 도(°) 단위로 쓰고 로드 시 라디안으로 변환한다.
"""

import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from dotenv import dotenv_values, set_key

from compensation import CompensationConfig
from control import LqrWeights
from dynamics import PlantParams
from exceptions import MagpendFileNotFoundError, MagpendInvalidConfigError
from field import (
    DEFAULT_COIL_DISTANCE,
    DEFAULT_COIL_MOMENT,
    ActuationMatrix,
    load_actuation_matrix,
    synthetic_actuation_matrix,
)
from simulation_engine import SimConfig
from sysid import MultisineConfig
from trajectory import TRAJECTORY_KINDS

# 설정 키 → PlantParams 필드
PLANT_KEYS = {
    "PLANT_PENDULUM_MASS": "M",
    "PLANT_ACTUATOR_MASS": "m",
    "PLANT_JOINT_MASS": "m_j",
    "PLANT_MAGNET_MASS": "m_m",
    "PLANT_PENDULUM_LENGTH": "L",
    "PLANT_ACTUATOR_LENGTH": "l",
    "PLANT_MAGNET_OFFSET": "l_m",
    "PLANT_DAMPING": "d",
    "PLANT_DIPOLE_MOMENT": "m_dip",
    "PLANT_FIELD_MAGNITUDE": "b_mag",
    "PLANT_GRAVITY": "g",
}

DEFAULTS = {
    "FIELD_ACTUATION_MATRIX": "",
    "FIELD_COIL_DISTANCE": str(DEFAULT_COIL_DISTANCE),
    "FIELD_COIL_MOMENT": str(DEFAULT_COIL_MOMENT),
    "CONTROL_TS": "0.01",
    "CONTROL_Q_DIAG": "10,100,1,1",
    "CONTROL_R": "1.0",
    "CONTROL_VELOCITY_CUTOFF_HZ": "",
    "COMP_CUTOFF_HZ": "0.05",
    "COMP_RATE_CUTOFF_HZ": "0.5",
    "COMP_RATE_THRESHOLD": "0.05",
    "SIM_DT": "1e-4",
    "SIM_DELAY_STEPS": "2",
    "SIM_NOISE_STD_DEG": "0.05",
    "SIM_XI_DEG": "0.0",
    "SIM_U_D_DEG": "0.0",
    "SIM_GRAD_C1": "3.0e-3",
    "SIM_GRAD_C2": "4.6e-2",
    "SIM_DURATION": "10.0",
    "SIM_INITIAL_ALPHA_DEG": "2.0",
    "SIM_INITIAL_BETA_DEG": "0.0",
    "SIM_COMPENSATION": "false",
    "SIM_SEED": "0",
    "SYSID_F_MIN": "0.1",
    "SYSID_F_MAX": "10.0",
    "SYSID_FS": "100.0",
    "SYSID_N": "1000",
    "SYSID_REALIZATIONS": "10",
    "SYSID_TOTAL_PERIODS": "10",
    "SYSID_DISCARD_PERIODS": "4",
    "SYSID_AMPLITUDE_DEG": "0.5",
    "ILC_W_E": "100.0",
    "ILC_W_DU": "10.0",
    "ILC_ITERATIONS": "4",
    "TRAJ_KIND": "circle",
    "TRAJ_AMPLITUDE_DEG": "5.0",
    "TRAJ_PERIOD": "10.0",
    "TRAJ_MAX_AMPLITUDE_DEG": "8.0",
}


def plant_to_env(p: PlantParams) -> dict[str, str]:
    """PlantParams → 설정 파일 키/값 (17 유효숫자)"""
    values = p.to_dict()
    return {key: f"{values[name]:.17g}" for key, name in PLANT_KEYS.items()}


def save_plant_env(p: PlantParams, path, header: str = "") -> Path:
    """PlantParams 를 --config 로 다시 읽을 수 있는 dotenv 파일로 저장"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(f"# {header}\n" if header else "", encoding="utf-8")
    for key, value in plant_to_env(p).items():
        set_key(str(path), key, value, quote_mode="never")
    return path


@dataclass
class MagpendConfig:
    """툴킷 설정"""

    # 플랜트
    plant: PlantParams

    # 자기장
    actuation_matrix_path: Optional[str]
    coil_distance: float         # m
    coil_moment: float           # A·m²/A

    # 제어
    control_ts: float            # s
    q_diag: tuple
    r_weight: float
    velocity_cutoff_hz: Optional[float]

    # 보상
    comp_cutoff_hz: float
    comp_rate_cutoff_hz: float
    comp_rate_threshold: float   # rad/s

    # 시뮬레이션
    sim_dt: float
    delay_steps: int
    noise_std: float             # rad
    xi: float                    # rad
    u_d: float                   # rad
    grad_c1: float
    grad_c2: float
    duration: float
    initial_alpha: float         # rad
    initial_beta: float          # rad
    compensation: bool
    seed: int

    # 시스템 식별
    sysid_f_min: float
    sysid_f_max: float
    sysid_fs: float
    sysid_n: int
    sysid_realizations: int
    sysid_total_periods: int
    sysid_discard_periods: int
    sysid_amplitude: float       # rad (RMS)

    # ILC
    ilc_w_e: float
    ilc_w_du: float
    ilc_iterations: int

    # 궤적
    traj_kind: str
    traj_amplitude: float        # rad
    traj_period: float           # s
    traj_max_amplitude: float    # rad

    @classmethod
    def from_env(cls, env_file=None, load_dotenv_first: bool = True) -> 'MagpendConfig':
        """
        설정 파일 + 환경변수에서 설정 로드 (환경변수가 파일보다 우선)

        Args:
            env_file: dotenv 형식 설정 파일 경로 (None 이면 현재 디렉터리 .env, 없으면 기본값)
            load_dotenv_first: 설정 파일을 읽을지 여부 (False 면 환경변수/기본값만)

        Returns:
            MagpendConfig 인스턴스

        Raises:
            MagpendFileNotFoundError: 지정한 설정 파일이 없는 경우
            MagpendInvalidConfigError: 값 형식이 잘못된 경우
        """
        values: dict[str, str] = {}
        if load_dotenv_first:
            if env_file is not None:
                path = Path(env_file)
                if not path.exists():
                    raise MagpendFileNotFoundError("설정 파일을 찾을 수 없습니다", path=path)
                values.update({k: v for k, v in dotenv_values(path).items() if v is not None})
            elif Path(".env").exists():
                values.update({k: v for k, v in dotenv_values(".env").items() if v is not None})

        known = set(DEFAULTS) | set(PLANT_KEYS)
        for key in known:
            if key in os.environ:
                values[key] = os.environ[key]

        def raw(key: str) -> str:
            return values.get(key, DEFAULTS.get(key, "")).strip()

        def number(key: str) -> float:
            try:
                return float(raw(key))
            except ValueError:
                raise MagpendInvalidConfigError(f"{key} 값이 숫자가 아닙니다: {raw(key)!r}", key=key)

        def integer(key: str) -> int:
            try:
                return int(raw(key))
            except ValueError:
                raise MagpendInvalidConfigError(f"{key} 값이 정수가 아닙니다: {raw(key)!r}", key=key)

        def flag(key: str) -> bool:
            return raw(key).lower() in ("true", "1", "yes", "on")

        def degrees(key: str) -> float:
            return math.radians(number(key))

        def optional_number(key: str) -> Optional[float]:
            return number(key) if raw(key) and raw(key).lower() != "none" else None

        plant_defaults = PlantParams().to_dict()
        plant_values = {}
        for key, name in PLANT_KEYS.items():
            plant_values[name] = number(key) if key in values else plant_defaults[name]

        try:
            q_diag = tuple(float(v) for v in raw("CONTROL_Q_DIAG").split(","))
        except ValueError:
            raise MagpendInvalidConfigError(
                f"CONTROL_Q_DIAG 형식이 올바르지 않습니다: {raw('CONTROL_Q_DIAG')!r} (예: 10,100,1,1)",
                key="CONTROL_Q_DIAG",
            )

        return cls(
            # 플랜트 (PlantParams 생성 시 물리 범위 검증)
            plant=PlantParams(**plant_values),

            # 자기장
            actuation_matrix_path=raw("FIELD_ACTUATION_MATRIX") or None,
            coil_distance=number("FIELD_COIL_DISTANCE"),
            coil_moment=number("FIELD_COIL_MOMENT"),

            # 제어
            control_ts=number("CONTROL_TS"),
            q_diag=q_diag,
            r_weight=number("CONTROL_R"),
            velocity_cutoff_hz=optional_number("CONTROL_VELOCITY_CUTOFF_HZ"),

            # 보상
            comp_cutoff_hz=number("COMP_CUTOFF_HZ"),
            comp_rate_cutoff_hz=number("COMP_RATE_CUTOFF_HZ"),
            comp_rate_threshold=number("COMP_RATE_THRESHOLD"),

            # 시뮬레이션
            sim_dt=number("SIM_DT"),
            delay_steps=integer("SIM_DELAY_STEPS"),
            noise_std=degrees("SIM_NOISE_STD_DEG"),
            xi=degrees("SIM_XI_DEG"),
            u_d=degrees("SIM_U_D_DEG"),
            grad_c1=number("SIM_GRAD_C1"),
            grad_c2=number("SIM_GRAD_C2"),
            duration=number("SIM_DURATION"),
            initial_alpha=degrees("SIM_INITIAL_ALPHA_DEG"),
            initial_beta=degrees("SIM_INITIAL_BETA_DEG"),
            compensation=flag("SIM_COMPENSATION"),
            seed=integer("SIM_SEED"),

            # 시스템 식별
            sysid_f_min=number("SYSID_F_MIN"),
            sysid_f_max=number("SYSID_F_MAX"),
            sysid_fs=number("SYSID_FS"),
            sysid_n=integer("SYSID_N"),
            sysid_realizations=integer("SYSID_REALIZATIONS"),
            sysid_total_periods=integer("SYSID_TOTAL_PERIODS"),
            sysid_discard_periods=integer("SYSID_DISCARD_PERIODS"),
            sysid_amplitude=degrees("SYSID_AMPLITUDE_DEG"),

            # ILC
            ilc_w_e=number("ILC_W_E"),
            ilc_w_du=number("ILC_W_DU"),
            ilc_iterations=integer("ILC_ITERATIONS"),

            # 궤적
            traj_kind=raw("TRAJ_KIND"),
            traj_amplitude=degrees("TRAJ_AMPLITUDE_DEG"),
            traj_period=number("TRAJ_PERIOD"),
            traj_max_amplitude=degrees("TRAJ_MAX_AMPLITUDE_DEG"),
        )

    def validate(self) -> None:
        """
        설정값 검증

        Raises:
            MagpendInvalidConfigError: 설정값이 유효하지 않은 경우 (key 속성에 설정 키)
        """
        if self.control_ts <= 0:
            raise MagpendInvalidConfigError(f"제어 주기는 0보다 커야 합니다: {self.control_ts}", key="CONTROL_TS")

        if len(self.q_diag) != 4 or any(q < 0 for q in self.q_diag):
            raise MagpendInvalidConfigError(
                f"CONTROL_Q_DIAG는 0 이상의 값 4개여야 합니다: {self.q_diag}", key="CONTROL_Q_DIAG"
            )

        if self.r_weight <= 0:
            raise MagpendInvalidConfigError(f"입력 가중치는 0보다 커야 합니다: {self.r_weight}", key="CONTROL_R")

        if self.coil_distance <= 0 or self.coil_moment <= 0:
            raise MagpendInvalidConfigError(
                f"코일 거리/모멘트는 0보다 커야 합니다: {self.coil_distance}, {self.coil_moment}",
                key="FIELD_COIL_DISTANCE",
            )

        if self.traj_kind not in TRAJECTORY_KINDS:
            raise MagpendInvalidConfigError(
                f"TRAJ_KIND는 {TRAJECTORY_KINDS} 중 하나여야 합니다: {self.traj_kind}", key="TRAJ_KIND"
            )

        if abs(self.traj_amplitude) > self.traj_max_amplitude:
            raise MagpendInvalidConfigError(
                f"궤적 진폭 {math.degrees(self.traj_amplitude):.2f}°가 상한 "
                f"{math.degrees(self.traj_max_amplitude):.2f}°를 초과합니다",
                key="TRAJ_AMPLITUDE_DEG",
            )

        if self.traj_period <= 0:
            raise MagpendInvalidConfigError(f"궤적 주기는 0보다 커야 합니다: {self.traj_period}", key="TRAJ_PERIOD")

        if self.ilc_w_e < 0 or self.ilc_w_du < 0:
            raise MagpendInvalidConfigError(
                f"ILC 가중치는 0 이상이어야 합니다: w_e={self.ilc_w_e}, w_du={self.ilc_w_du}", key="ILC_W_E"
            )

        if self.ilc_iterations < 0:
            raise MagpendInvalidConfigError(f"ILC 반복 수는 0 이상이어야 합니다: {self.ilc_iterations}",
                                            key="ILC_ITERATIONS")

        if self.seed < 0:
            raise MagpendInvalidConfigError(f"시드는 0 이상이어야 합니다: {self.seed}", key="SIM_SEED")

        # 하위 설정 객체가 나머지 범위 검사를 수행
        self.sim_config()
        self.multisine_config()
        self.compensation_config()

    # ========================================
    # 하위 설정 빌더
    # ========================================

    def plant_params(self) -> PlantParams:
        return self.plant

    def lqr_weights(self) -> LqrWeights:
        return LqrWeights.from_diagonal(self.q_diag, self.r_weight)

    def compensation_config(self) -> CompensationConfig:
        return CompensationConfig(
            cutoff_hz=self.comp_cutoff_hz,
            rate_cutoff_hz=self.comp_rate_cutoff_hz,
            rate_threshold=self.comp_rate_threshold,
        )

    def sim_config(self, seed: Optional[int] = None) -> SimConfig:
        return SimConfig(
            plant=self.plant,
            Ts=self.control_ts,
            dt=self.sim_dt,
            delay_steps=self.delay_steps,
            noise_std=self.noise_std,
            xi=self.xi,
            u_d=self.u_d,
            grad_c1=self.grad_c1,
            grad_c2=self.grad_c2,
            duration=self.duration,
            seed=self.seed if seed is None else seed,
            compensation=self.compensation_config(),
            velocity_cutoff_hz=self.velocity_cutoff_hz,
        )

    def multisine_config(self) -> MultisineConfig:
        return MultisineConfig(
            f_min=self.sysid_f_min,
            f_max=self.sysid_f_max,
            fs=self.sysid_fs,
            N=self.sysid_n,
            r=self.sysid_realizations,
            p_total=self.sysid_total_periods,
            p_discard=self.sysid_discard_periods,
            amp=self.sysid_amplitude,
        )

    def trajectory_spec(self) -> dict:
        """generate_trajectory 키워드 인자 (duration/Ts 제외)"""
        return {
            "kind": self.traj_kind,
            "amplitude": self.traj_amplitude,
            "period": self.traj_period,
            "max_amplitude": self.traj_max_amplitude,
        }

    def actuation_matrix(self) -> ActuationMatrix:
        if self.actuation_matrix_path:
            return load_actuation_matrix(self.actuation_matrix_path)
        return synthetic_actuation_matrix(self.coil_distance, self.coil_moment)

    def __str__(self) -> str:
        """설정 요약 문자열"""
        p = self.plant
        return f"""
자기 구동 역진자 설정:
  플랜트: M={p.M} kg, L={p.L} m, l={p.l} m, d={p.d:.3g}, |m̃|={p.m_dip} A·m², |b|={p.b_mag * 1e3:.1f} mT
  안정화 여유: {p.stiffness_margin:.4f} N·m/rad
  제어 주기: {self.control_ts * 1e3:.1f} ms (적분 {self.sim_dt:.0e} s, 지연 {self.delay_steps} 스텝)
  LQR 가중치: Q=diag{self.q_diag}, R={self.r_weight}
  노이즈: {math.degrees(self.noise_std):.3f}°, ξ={math.degrees(self.xi):.2f}°, u_d={math.degrees(self.u_d):.2f}°
  구배 외란: c1={self.grad_c1:.3g}, c2={self.grad_c2:.3g}
  보상: {'활성' if self.compensation else '비활성'} (차단 {self.comp_cutoff_hz} Hz)
  궤적: {self.traj_kind}, {math.degrees(self.traj_amplitude):.1f}°, {self.traj_period} s
  ILC: w_e={self.ilc_w_e}, w_du={self.ilc_w_du}, 반복 {self.ilc_iterations}회
  구동 행렬: {self.actuation_matrix_path or '합성 (점-쌍극자 8코일)'}
  시드: {self.seed}
"""
