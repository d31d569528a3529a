"""
자기 구동 역진자 툴킷 커스텀 예외

역할: 도메인별 예외 타입 정의
- 설정/모델/수치/자기장/시뮬레이션/파일 오류 분류
- 구체적인 에러 메시지 (에러 코드 포함)
"""


class MagpendException(Exception):
    """툴킷 기본 예외"""
    def __init__(self, message: str, error_code: str = None):
        """
        Args:
            message: 에러 메시지
            error_code: 에러 코드 (선택)
        """
        self.message = message
        self.error_code = error_code
        super().__init__(self.message)

    def __str__(self):
        if self.error_code:
            return f"[{self.error_code}] {self.message}"
        return self.message


# ========================================
# 설정 관련 예외
# ========================================

class MagpendConfigError(MagpendException):
    """설정 오류"""
    pass


class MagpendInvalidConfigError(MagpendConfigError):
    """설정값 유효성 검증 실패"""
    def __init__(self, message: str, key: str = None):
        super().__init__(message, error_code="CONFIG")
        self.key = key


# ========================================
# 물리 모델 관련 예외
# ========================================

class MagpendModelError(MagpendException):
    """물리 모델 오류"""
    pass


class MagpendParameterError(MagpendModelError):
    """플랜트 파라미터가 유효 범위를 벗어남"""
    pass


class MagpendNonPhysicalFitError(MagpendModelError):
    """식별 결과가 물리적으로 불가능 (음수 감쇠, 음수 쌍극자 모멘트 등)"""
    def __init__(self, message: str, d: float = None, m_dip: float = None):
        super().__init__(message, error_code="NON_PHYSICAL")
        self.d = d
        self.m_dip = m_dip


# ========================================
# 수치 계산 관련 예외
# ========================================

class MagpendNumericalError(MagpendException):
    """수치 계산 오류"""
    pass


class MagpendSingularMatrixError(MagpendNumericalError):
    """특이 행렬 (역행렬 불가)"""
    pass


class MagpendRankDeficientError(MagpendNumericalError):
    """행렬 랭크 부족"""
    def __init__(self, message: str, rank: int = None, expected: int = None):
        super().__init__(message, error_code="RANK")
        self.rank = rank
        self.expected = expected


class MagpendConvergenceError(MagpendNumericalError):
    """반복 알고리즘 수렴 실패"""
    def __init__(self, message: str, iterations: int = None, residual: float = None):
        super().__init__(message, error_code="CONVERGENCE")
        self.iterations = iterations
        self.residual = residual


class MagpendIllConditionedError(MagpendNumericalError):
    """정규방정식 조건수 과대"""
    def __init__(self, message: str, condition_number: float = None):
        super().__init__(message, error_code="ILL_CONDITIONED")
        self.condition_number = condition_number


class MagpendDimensionError(MagpendNumericalError):
    """벡터/행렬 차원 불일치"""
    pass


# ========================================
# 자기장 관련 예외
# ========================================

class MagpendFieldError(MagpendException):
    """자기장 할당 오류"""
    pass


class MagpendGimbalLockError(MagpendFieldError):
    """자기장 방향이 각도 표현의 특이점 (|b| ≈ 0 또는 cos u_b ≈ 0)"""
    pass


# ========================================
# 시뮬레이션 관련 예외
# ========================================

class MagpendSimulationError(MagpendException):
    """시뮬레이션 오류"""
    pass


class MagpendDivergenceError(MagpendSimulationError):
    """폐루프 발산 (각도 한계 초과)"""
    def __init__(self, message: str, trace=None, step: int = None):
        """
        Args:
            message: 에러 메시지
            trace: 발산 직전까지 기록된 부분 트레이스 (진단용)
            step: 발산이 감지된 제어 스텝
        """
        super().__init__(message, error_code="DIVERGED")
        self.trace = trace
        self.step = step


# ========================================
# 파일 시스템 관련 예외
# ========================================

class MagpendFileError(MagpendException):
    """파일 읽기/쓰기 오류"""
    def __init__(self, message: str, path=None):
        super().__init__(message)
        self.path = path

    def __str__(self):
        if self.path is not None:
            return f"{self.message} (경로: {self.path})"
        return self.message


class MagpendFileNotFoundError(MagpendFileError):
    """파일을 찾을 수 없음"""
    pass


# ========================================
# 유틸리티 함수
# ========================================

def format_exception_message(exc: Exception) -> str:
    """
    예외를 사용자 친화적 메시지로 변환

    Args:
        exc: 예외 객체

    Returns:
        포맷된 에러 메시지
    """
    if isinstance(exc, MagpendConfigError):
        return f"⚙️ 설정 오류: {exc}"

    if isinstance(exc, MagpendModelError):
        return f"🧲 모델 오류: {exc}"

    if isinstance(exc, MagpendNumericalError):
        return f"🔢 수치 오류: {exc}"

    if isinstance(exc, MagpendFieldError):
        return f"🧭 자기장 오류: {exc}"

    if isinstance(exc, MagpendDivergenceError):
        return f"💥 시뮬레이션 발산: {exc}"

    if isinstance(exc, MagpendSimulationError):
        return f"🎛️ 시뮬레이션 오류: {exc}"

    if isinstance(exc, MagpendFileError):
        return f"📁 파일 오류: {exc}"

    if isinstance(exc, MagpendException):
        return f"❌ 시스템 오류: {exc}"

    return f"❌ 알 수 없는 오류: {str(exc)}"
