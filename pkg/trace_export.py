"""
실험 결과 파일 입출력 (pandas CSV / JSON)

- 트레이스 CSV: TRACE_COLUMNS 순서, 17 유효숫자 (역파싱 시 비트 일치)
- FRF CSV: f_hz, re_g, im_g, sigma_nl, weight
- ILC 이력 CSV: 반복별 RMS 오차, 반복별 보정 신호
- 실행 요약 JSON (타임스탬프 없음 → 같은 시드면 바이트 동일)
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from exceptions import MagpendFileError, MagpendFileNotFoundError
from simulation_engine import Trace
from sysid import FrfEstimate

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def _write_frame(frame: pd.DataFrame, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise MagpendFileError(f"CSV 저장 실패: {e}", path=path) from e
    logger.debug(f"💾 저장: {path} ({len(frame)}행)")
    return path


def _read_frame(path) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise MagpendFileNotFoundError("CSV 파일을 찾을 수 없습니다", path=path)
    try:
        return pd.read_csv(path, float_precision="round_trip")
    except (OSError, ValueError, pd.errors.ParserError) as e:
        raise MagpendFileError(f"CSV 파싱 실패: {e}", path=path) from e


def export_trace(trace: Trace, path) -> Path:
    """트레이스 CSV 저장 (헤더 + 제어 스텝당 1행)"""
    return _write_frame(trace.to_frame(), path)


def load_trace(path) -> Trace:
    return Trace.from_frame(_read_frame(path))


def export_frf(frf: FrfEstimate, path) -> Path:
    return _write_frame(frf.to_frame(), path)


def load_frf(path) -> FrfEstimate:
    return FrfEstimate.from_frame(_read_frame(path))


def export_ilc_history(rms_errors: Sequence[float], path) -> Path:
    """반복별 RMS 추종 오차 (rad, deg)"""
    rms = np.asarray(rms_errors, dtype=float)
    frame = pd.DataFrame({
        "iteration": np.arange(rms.size),
        "rms_error_rad": rms,
        "rms_error_deg": np.degrees(rms),
    })
    return _write_frame(frame, path)


def export_ilc_corrections(corrections_a: Sequence[np.ndarray], corrections_b: Sequence[np.ndarray],
                           Ts: float, path) -> Path:
    """반복별 평면 보정 신호 (열: k, t, u_alpha_iter0, u_beta_iter0, …)"""
    N = len(corrections_a[0]) if corrections_a else 0
    columns = {"k": np.arange(N), "t": np.arange(N) * Ts}
    for n, (ua, ub) in enumerate(zip(corrections_a, corrections_b)):
        columns[f"u_alpha_iter{n}"] = np.asarray(ua, dtype=float)
        columns[f"u_beta_iter{n}"] = np.asarray(ub, dtype=float)
    return _write_frame(pd.DataFrame(columns), path)


def save_run_summary(summary: dict, path) -> Path:
    """실행 요약 JSON (ensure_ascii=False, indent=2)"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(summary, f, ensure_ascii=False, indent=2, default=_json_default)
            f.write("\n")
    except OSError as e:
        raise MagpendFileError(f"요약 저장 실패: {e}", path=path) from e
    return path


def load_run_summary(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise MagpendFileNotFoundError("요약 파일을 찾을 수 없습니다", path=path)
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"JSON 직렬화 불가: {type(obj)}")
