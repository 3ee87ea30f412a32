"""예외 정의

수치 판정 실패(verdict)는 예외가 아니라 리포트의 플래그로 남긴다.
여기 정의된 예외는 계산 자체가 성립하지 않는 경우에만 쓴다.
"""
from typing import Optional


class BilliardThermoError(Exception):
    """모든 도메인 예외의 기본 클래스"""


class ConfigError(BilliardThermoError, ValueError):
    """설정 파일/CLI 값 오류 (field 이름 포함)"""

    def __init__(self, field: str, message: str):
        super().__init__(f"설정 오류 [{field}]: {message}")
        self.field = field


class DomainError(BilliardThermoError, ValueError):
    """잘못된 입력 (산란체 번호, 각도 범위 등)"""


class InvalidTableError(BilliardThermoError, ValueError):
    """산란체가 겹치는 등 당구대 구성이 잘못됨"""


class NearTangentialError(BilliardThermoError):
    """접선 충돌 근처 점 (cos φ < tol_tangent)"""

    def __init__(self, message: str, cos_phi: Optional[float] = None):
        super().__init__(message)
        self.cos_phi = cos_phi


class HorizonViolationError(BilliardThermoError):
    """horizon_bound 안에서 충돌이 없음"""


class InsufficientDepthError(BilliardThermoError):
    """콘 반복이 tol까지 수렴하기 전에 궤도가 끊김"""

    def __init__(self, message: str, achieved_accuracy: float, depth: int):
        super().__init__(message)
        self.achieved_accuracy = achieved_accuracy
        self.depth = depth


class TruncatedItineraryError(BilliardThermoError):
    """itinerary 계산 중 접선 충돌로 길이가 잘림"""

    def __init__(self, message: str, achieved_length: int):
        super().__init__(message)
        self.achieved_length = achieved_length


class RefinementBudgetError(BilliardThermoError):
    """곡선 세분화 예산 초과"""


class ConvergenceError(BilliardThermoError):
    """거듭제곱 반복 미수렴"""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SpuriousEigenvectorError(BilliardThermoError):
    """고유벡터에 -tol 보다 작은 음수 성분이 있음"""


class InsufficientRangeError(BilliardThermoError):
    """스케일링 피팅에 쓸 수 있는 ε 개수 부족"""
