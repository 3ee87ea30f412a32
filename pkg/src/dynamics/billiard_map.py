"""충돌 사상 T, T⁻¹ 과 미분 DT

좌표 규약: r 은 반시계 방향 호의 길이, φ 는 출사 속도와 (Q 쪽) 법선 사이
각도로 r 이 증가하는 쪽으로 기울면 양수. 출사 방향각 ω = r/ρ + φ.
T⁻¹ = ι∘T∘ι, ι(r,φ) = (r,−φ).

배치 함수(advance)는 점 N개를 numpy 배열로 한 번에 민다.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.geometry.raycast import cast_rays
from src.geometry.table import TableGeometry
from src.utils.errors import DomainError, HorizonViolationError, NearTangentialError

logger = logging.getLogger("billiard_thermo")

TOL_TANGENT = 1e-9

# advance 의 상태 코드
OK = 0
NEAR_TANGENT = 1
ESCAPED = 2


@dataclass(frozen=True)
class PhasePoint:
    """M = ∂Q × [−π/2, π/2] 의 점"""
    scatterer_id: int
    r: float
    phi: float

    def __post_init__(self):
        if not abs(self.phi) <= math.pi / 2 + 1e-15:
            raise DomainError(f"|φ| ≤ π/2 이어야 함 (받은 값 {self.phi})")

    @property
    def cos_phi(self) -> float:
        return max(0.0, math.cos(self.phi))

    def reversed(self) -> "PhasePoint":
        """ι(r, φ) = (r, −φ)"""
        return PhasePoint(self.scatterer_id, self.r, -self.phi)


@dataclass
class CollisionStep:
    """T 한 번의 결과: 출발/도착 점, 비행 거리, DT"""
    origin: PhasePoint
    to: PhasePoint
    tau: float
    dT: np.ndarray
    grazing_margin: float


@dataclass
class Advance:
    """배치 한 스텝 결과 (status != OK 인 성분은 NaN)"""
    ids: np.ndarray
    r: np.ndarray
    phi: np.ndarray
    tau: np.ndarray
    status: np.ndarray
    lift: np.ndarray  # 충돌한 lift 의 격자 변위 (출발 산란체 셀 기준)

    @property
    def ok(self) -> np.ndarray:
        return self.status == OK


def advance(
    table: TableGeometry,
    ids: np.ndarray,
    r: np.ndarray,
    phi: np.ndarray,
    tol_tangent: float = TOL_TANGENT,
) -> Advance:
    """점 배치에 T 를 한 번 적용"""
    ids = np.asarray(ids, dtype=int)
    r = np.asarray(r, dtype=float)
    phi = np.asarray(phi, dtype=float)
    n = len(ids)
    status = np.full(n, OK, dtype=np.int8)
    status[~(np.cos(phi) >= tol_tangent)] = NEAR_TANGENT

    radii = table.radii[ids]
    centers = table.centers[ids]
    theta = r / radii
    normal = np.column_stack([np.cos(theta), np.sin(theta)])
    origin = centers + radii[:, None] * normal
    omega = theta + phi
    direction = np.column_stack([np.cos(omega), np.sin(omega)])

    out_ids = np.full(n, -1, dtype=int)
    out_r = np.full(n, np.nan)
    out_phi = np.full(n, np.nan)
    tau = np.full(n, np.nan)
    lift = np.zeros((n, 2), dtype=int)

    live = np.nonzero(status == OK)[0]
    if live.size:
        hits = cast_rays(table, origin[live], direction[live])
        escaped = ~hits.hit
        status[live[escaped]] = ESCAPED
        good = live[~escaped]
        h = ~escaped
        hit_ids = hits.scatterer[h]
        rel = hits.hit_point[h] - hits.lift_center[h]
        theta1 = np.mod(np.arctan2(rel[:, 1], rel[:, 0]), 2.0 * np.pi)
        phi1 = np.mod(theta1 + np.pi - omega[good] + np.pi, 2.0 * np.pi) - np.pi
        phi1 = np.clip(phi1, -np.pi / 2, np.pi / 2)
        out_ids[good] = hit_ids
        out_r[good] = theta1 * table.radii[hit_ids]
        out_phi[good] = phi1
        tau[good] = hits.distance[h]
        lift[good] = np.rint(hits.lift_center[h] - table.centers[hit_ids]).astype(int)
        arrival_bad = ~(np.cos(phi1) >= tol_tangent)
        status[good[arrival_bad]] = NEAR_TANGENT

    bad = status != OK
    out_ids[bad] = -1
    out_r[bad] = np.nan
    out_phi[bad] = np.nan
    tau[bad] = np.nan
    return Advance(ids=out_ids, r=out_r, phi=out_phi, tau=tau, status=status, lift=lift)


def advance_inverse(table: TableGeometry, ids, r, phi, tol_tangent: float = TOL_TANGENT) -> Advance:
    """T⁻¹ = ι∘T∘ι"""
    res = advance(table, ids, r, -np.asarray(phi, dtype=float), tol_tangent)
    res.phi = -res.phi
    return res


def differential(
    K0: np.ndarray, K1: np.ndarray, cos0: np.ndarray, cos1: np.ndarray, tau: np.ndarray
) -> np.ndarray:
    """(r,φ) 좌표의 DT, shape (..., 2, 2). det = cos φ / cos φ₁"""
    K0, K1, cos0, cos1, tau = np.broadcast_arrays(K0, K1, cos0, cos1, tau)
    m = np.empty(K0.shape + (2, 2))
    m[..., 0, 0] = -(tau * K0 + cos0) / cos1
    m[..., 0, 1] = -tau / cos1
    m[..., 1, 0] = -(tau * K0 * K1 + K0 * cos1 + K1 * cos0) / cos1
    m[..., 1, 1] = -(tau * K1 + cos1) / cos1
    return m


def _step_arrays(table: TableGeometry, x: PhasePoint, inverse: bool, tol_tangent: float) -> Advance:
    table.check_id(x.scatterer_id)
    if not math.isfinite(x.r):
        raise DomainError(f"r 이 유한하지 않음: {x.r}")
    fn = advance_inverse if inverse else advance
    res = fn(table, np.array([x.scatterer_id]), np.array([x.r]), np.array([x.phi]), tol_tangent)
    code = int(res.status[0])
    if code == NEAR_TANGENT:
        raise NearTangentialError(f"접선 충돌 근처: {x}", cos_phi=x.cos_phi)
    if code == ESCAPED:
        raise HorizonViolationError(f"horizon_bound={table.horizon_bound} 안에서 충돌 없음: {x}")
    return res


def step(table: TableGeometry, x: PhasePoint, tol_tangent: float = TOL_TANGENT) -> CollisionStep:
    """T(x) 와 DT(x)"""
    res = _step_arrays(table, x, False, tol_tangent)
    to = PhasePoint(int(res.ids[0]), float(res.r[0]), float(res.phi[0]))
    dT = differential(
        table.curvatures[x.scatterer_id], table.curvatures[to.scatterer_id],
        math.cos(x.phi), math.cos(to.phi), float(res.tau[0]),
    )
    return CollisionStep(origin=x, to=to, tau=float(res.tau[0]), dT=dT, grazing_margin=math.cos(to.phi))


def step_inverse(table: TableGeometry, x: PhasePoint, tol_tangent: float = TOL_TANGENT) -> CollisionStep:
    """T⁻¹(x) 와 D(T⁻¹)(x) = DT(T⁻¹x)⁻¹"""
    res = _step_arrays(table, x, True, tol_tangent)
    to = PhasePoint(int(res.ids[0]), float(res.r[0]), float(res.phi[0]))
    forward = differential(
        table.curvatures[to.scatterer_id], table.curvatures[x.scatterer_id],
        math.cos(to.phi), math.cos(x.phi), float(res.tau[0]),
    )
    return CollisionStep(
        origin=x, to=to, tau=float(res.tau[0]), dT=np.linalg.inv(forward),
        grazing_margin=math.cos(to.phi),
    )


def phase_distance(table: TableGeometry, a: PhasePoint, b: PhasePoint) -> float:
    """(r, φ) 유클리드 거리 (r 은 둘레 주기). 다른 산란체면 inf"""
    if a.scatterer_id != b.scatterer_id:
        return math.inf
    perim = table.perimeters[a.scatterer_id]
    dr = abs(a.r - b.r) % perim
    dr = min(dr, perim - dr)
    return math.hypot(dr, a.phi - b.phi)
