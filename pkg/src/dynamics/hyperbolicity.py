"""콘, 안정/불안정 방향, Jacobian, 적응 계량

기울기 V = dφ/dr 로 방향을 다룬다. 불안정 방향은 앞으로, 안정 방향은
뒤로 전파할 때 수축하며 닫힌 형태의 갱신식을 쓴다:
  앞으로:  V₁ = K₁ + (K₀+V₀)·c₁ / (c₀ + τ(K₀+V₀))
  뒤로:    V₀ = −[K₀ + (K₁−V₁)·c₀ / (c₁ + τ(K₁−V₁))]
여기서 c = cos φ. 두 식은 ι(r,φ) = (r,−φ) 로 서로 옮겨진다.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from src.dynamics.billiard_map import (
    OK, PhasePoint, TOL_TANGENT, advance,
)
from src.geometry.table import TableGeometry
from src.utils.errors import InsufficientDepthError, NearTangentialError

logger = logging.getLogger("billiard_thermo")

DEFAULT_DEPTH = 60
DEFAULT_TOL = 1e-12
# 배치 계산(샘플링, Ulam)용 깊이. 한 스텝에 콘 폭이 대략 Λ⁻² 로 줄어든다.
BATCH_DEPTH = 16


@dataclass
class TangentVector:
    dr: float
    dphi: float
    accuracy: float = 0.0
    depth: int = 0

    def __post_init__(self):
        if self.dr == 0.0 and self.dphi == 0.0:
            raise ValueError("영벡터는 허용되지 않음")

    @property
    def slope(self) -> float:
        return self.dphi / self.dr if self.dr != 0 else math.copysign(math.inf, self.dphi)

    def angle_to(self, other: "TangentVector") -> float:
        """두 방향(직선) 사이 각도 ∈ [0, π/2]"""
        a = math.atan2(self.dphi, self.dr)
        b = math.atan2(other.dphi, other.dr)
        d = abs(a - b) % math.pi
        return min(d, math.pi - d)


@dataclass
class Orbit:
    """배치 궤도: (steps+1, N) 배열, 무효 이후는 NaN"""
    ids: np.ndarray
    r: np.ndarray
    phi: np.ndarray
    tau: np.ndarray     # (steps, N)
    lift: np.ndarray    # (steps, N, 2)
    valid_len: np.ndarray  # 점별 유효 스텝 수
    status: np.ndarray  # 점별 마지막 상태 코드

    @property
    def steps(self) -> int:
        return self.tau.shape[0]

    @property
    def cos(self) -> np.ndarray:
        return np.cos(self.phi)

    def curvature(self, table: TableGeometry) -> np.ndarray:
        ids = np.where(self.ids >= 0, self.ids, 0)
        return np.where(self.ids >= 0, table.curvatures[ids], np.nan)


def orbit(
    table: TableGeometry,
    ids, r, phi,
    steps: int,
    tol_tangent: float = TOL_TANGENT,
    inverse: bool = False,
) -> Orbit:
    """점 배치의 앞(또는 ι 를 통해 뒤) 궤도"""
    ids = np.atleast_1d(np.asarray(ids, dtype=int))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    n = len(ids)
    sign = -1.0 if inverse else 1.0
    I = np.full((steps + 1, n), -1, dtype=int)
    R = np.full((steps + 1, n), np.nan)
    P = np.full((steps + 1, n), np.nan)
    tau = np.full((steps, n), np.nan)
    lift = np.zeros((steps, n, 2), dtype=int)
    I[0], R[0], P[0] = ids, r, phi
    valid_len = np.zeros(n, dtype=int)
    status = np.full(n, OK, dtype=np.int8)
    alive = np.ones(n, dtype=bool)
    for k in range(steps):
        idx = np.nonzero(alive)[0]
        if idx.size == 0:
            break
        res = advance(table, I[k, idx], R[k, idx], sign * P[k, idx], tol_tangent)
        ok = res.ok
        good = idx[ok]
        I[k + 1, good] = res.ids[ok]
        R[k + 1, good] = res.r[ok]
        P[k + 1, good] = sign * res.phi[ok]
        tau[k, good] = res.tau[ok]
        lift[k, good] = res.lift[ok]
        valid_len[good] = k + 1
        status[idx[~ok]] = res.status[~ok]
        alive[idx[~ok]] = False
    return Orbit(ids=I, r=R, phi=P, tau=tau, lift=lift, valid_len=valid_len, status=status)


def pull_back_stable_slope(K0, K1, c0, c1, tau, V1):
    """T⁻¹ 방향으로 안정 기울기 전파: x₁=Tx₀ 의 V₁ → x₀ 의 V₀"""
    a = K1 - V1
    return -(K0 + a * c0 / (c1 + tau * a))


def push_forward_unstable_slope(K0, K1, c0, c1, tau, V0):
    """T 방향으로 불안정 기울기 전파"""
    a = K0 + V0
    return K1 + a * c1 / (c0 + tau * a)


def stable_slopes(table: TableGeometry, orb: Orbit) -> Tuple[np.ndarray, np.ndarray]:
    """궤도 위 모든 위치의 안정 기울기와 정확도(두 콘 경계 시드의 각도 차)

    위치 k 의 유효 깊이는 valid_len − k. 깊이 0 인 위치는 NaN.
    """
    lo_seed, hi_seed = table.stable_slope_range
    steps, n = orb.steps, orb.ids.shape[1]
    K = orb.curvature(table)
    c = orb.cos
    V_lo = np.full((steps + 1, n), np.nan)
    V_hi = np.full((steps + 1, n), np.nan)
    for k in range(steps - 1, -1, -1):
        live = k < orb.valid_len
        if not np.any(live):
            continue
        seed_here = live & (orb.valid_len == k + 1)
        nxt_lo = np.where(seed_here, lo_seed, V_lo[k + 1])
        nxt_hi = np.where(seed_here, hi_seed, V_hi[k + 1])
        with np.errstate(invalid="ignore", divide="ignore"):
            v_lo = pull_back_stable_slope(K[k], K[k + 1], c[k], c[k + 1], orb.tau[k], nxt_lo)
            v_hi = pull_back_stable_slope(K[k], K[k + 1], c[k], c[k + 1], orb.tau[k], nxt_hi)
        V_lo[k] = np.where(live, v_lo, np.nan)
        V_hi[k] = np.where(live, v_hi, np.nan)
    slopes = 0.5 * (V_lo + V_hi)
    accuracy = np.abs(np.arctan(V_lo) - np.arctan(V_hi))
    return slopes, accuracy


def unstable_slopes(
    table: TableGeometry, orb: Orbit, depth: int = BATCH_DEPTH, tol_tangent: float = TOL_TANGENT
) -> Tuple[np.ndarray, np.ndarray]:
    """궤도 위 불안정 기울기: 시작점의 과거 궤도(ι 로 계산)에서 얻은 뒤 앞으로 전파"""
    back = orbit(table, orb.ids[0], orb.r[0], -orb.phi[0], depth, tol_tangent)
    s_back, acc_back = stable_slopes(table, back)
    lo_u, hi_u = table.unstable_slope_range
    # 과거 궤도가 전혀 없으면 콘 경계 두 개로 시작
    U_lo = np.where(np.isfinite(s_back[0]), -s_back[0] - 0.5 * _slope_spread(s_back[0], acc_back[0]), lo_u)
    U_hi = np.where(np.isfinite(s_back[0]), -s_back[0] + 0.5 * _slope_spread(s_back[0], acc_back[0]), hi_u)
    steps, n = orb.steps, orb.ids.shape[1]
    K = orb.curvature(table)
    c = orb.cos
    out_lo = np.full((steps + 1, n), np.nan)
    out_hi = np.full((steps + 1, n), np.nan)
    out_lo[0], out_hi[0] = U_lo, U_hi
    for k in range(steps):
        live = k < orb.valid_len
        with np.errstate(invalid="ignore", divide="ignore"):
            out_lo[k + 1] = np.where(live, push_forward_unstable_slope(K[k], K[k + 1], c[k], c[k + 1], orb.tau[k], out_lo[k]), np.nan)
            out_hi[k + 1] = np.where(live, push_forward_unstable_slope(K[k], K[k + 1], c[k], c[k + 1], orb.tau[k], out_hi[k]), np.nan)
    slopes = 0.5 * (out_lo + out_hi)
    accuracy = np.abs(np.arctan(out_lo) - np.arctan(out_hi))
    return slopes, accuracy


def _slope_spread(slope: np.ndarray, angle_acc: np.ndarray) -> np.ndarray:
    """각도 정확도를 기울기 폭으로 환산"""
    with np.errstate(invalid="ignore"):
        return np.nan_to_num(angle_acc * (1.0 + slope ** 2), nan=0.0)


def log_stable_jacobians(table: TableGeometry, orb: Orbit, Vs: np.ndarray, adapted: bool = False) -> np.ndarray:
    """한 스텝 log JˢT(x_k), shape (steps, N)

    JˢT(x) = c₀/(c₁ + τ(K₁ − V₁)) · √(1+V₁²)/√(1+V₀²)   (유클리드)
    적응 계량이면 √(1+V²) 대신 K + |V|.
    """
    K = orb.curvature(table)
    c = orb.cos
    with np.errstate(invalid="ignore", divide="ignore"):
        base = np.log(c[:-1]) - np.log(c[1:] + orb.tau * (K[1:] - Vs[1:]))
        if adapted:
            metric = np.log(K[1:] + np.abs(Vs[1:])) - np.log(K[:-1] + np.abs(Vs[:-1]))
        else:
            metric = 0.5 * (np.log1p(Vs[1:] ** 2) - np.log1p(Vs[:-1] ** 2))
    return base + metric


def log_unstable_jacobians(table: TableGeometry, orb: Orbit, Vu: np.ndarray, adapted: bool = False) -> np.ndarray:
    """한 스텝 log JᵘT(x_k) = log (c₀ + τ(K₀+U₀))/c₁ + 계량 보정"""
    K = orb.curvature(table)
    c = orb.cos
    with np.errstate(invalid="ignore", divide="ignore"):
        base = np.log(c[:-1] + orb.tau * (K[:-1] + Vu[:-1])) - np.log(c[1:])
        if adapted:
            metric = np.log(K[1:] + np.abs(Vu[1:])) - np.log(K[:-1] + np.abs(Vu[:-1]))
        else:
            metric = 0.5 * (np.log1p(Vu[1:] ** 2) - np.log1p(Vu[:-1] ** 2))
    return base + metric


# ── 배치 편의 함수 ─────────────────────────────

def stable_log_jacobian_batch(
    table: TableGeometry, ids, r, phi, n: int = 1, depth: int = BATCH_DEPTH,
    tol_tangent: float = TOL_TANGENT,
) -> Tuple[np.ndarray, np.ndarray]:
    """log JˢTⁿ(x) 배치. (값, 유효 마스크). 앞 n 스텝이 모두 정의돼야 유효"""
    orb = orbit(table, ids, r, phi, n + depth, tol_tangent)
    Vs, _ = stable_slopes(table, orb)
    logJ = log_stable_jacobians(table, orb, Vs)
    valid = orb.valid_len >= n + 1
    total = np.where(valid, np.nansum(logJ[:n], axis=0), np.nan)
    return total, valid


def unstable_log_jacobian_batch(
    table: TableGeometry, ids, r, phi, n: int = 1, depth: int = BATCH_DEPTH,
    tol_tangent: float = TOL_TANGENT,
) -> Tuple[np.ndarray, np.ndarray]:
    orb = orbit(table, ids, r, phi, n, tol_tangent)
    Vu, _ = unstable_slopes(table, orb, depth, tol_tangent)
    logJ = log_unstable_jacobians(table, orb, Vu)
    valid = (orb.valid_len >= n) & np.isfinite(Vu[0])
    total = np.where(valid, np.nansum(logJ[:n], axis=0), np.nan)
    return total, valid


# ── 단일 점 API ─────────────────────────────

def _single_orbit(table: TableGeometry, x: PhasePoint, steps: int, tol_tangent: float) -> Orbit:
    table.check_id(x.scatterer_id)
    return orbit(table, [x.scatterer_id], [x.r], [x.phi], steps, tol_tangent)


def _slope_to_vector(slope: float, accuracy: float, depth: int, sign: float = 1.0) -> TangentVector:
    norm = math.sqrt(1.0 + slope * slope)
    return TangentVector(dr=sign / norm, dphi=sign * slope / norm, accuracy=float(accuracy), depth=int(depth))


def stable_direction(
    table: TableGeometry, x: PhasePoint, depth: int = DEFAULT_DEPTH, tol: float = DEFAULT_TOL,
    tol_tangent: float = TOL_TANGENT,
) -> TangentVector:
    """Eˢ(x) = lim DT⁻ⁿ(Tⁿx)v, v ∈ Cˢ"""
    orb = _single_orbit(table, x, depth, tol_tangent)
    Vs, acc = stable_slopes(table, orb)
    achieved = int(orb.valid_len[0])
    if achieved == 0:
        raise NearTangentialError(f"접선 충돌 근처: {x}", cos_phi=x.cos_phi)
    accuracy = float(acc[0, 0])
    if achieved < depth and accuracy >= tol:
        raise InsufficientDepthError(
            f"깊이 {achieved}에서 궤도 끊김 (정확도 {accuracy:.3g} ≥ tol {tol:.1g})",
            achieved_accuracy=accuracy, depth=achieved,
        )
    return _slope_to_vector(float(Vs[0, 0]), accuracy, achieved)


def unstable_direction(
    table: TableGeometry, x: PhasePoint, depth: int = DEFAULT_DEPTH, tol: float = DEFAULT_TOL,
    tol_tangent: float = TOL_TANGENT,
) -> TangentVector:
    """Eᵘ(x) = ι Eˢ(ιx)"""
    try:
        vs = stable_direction(table, x.reversed(), depth, tol, tol_tangent)
    except InsufficientDepthError as e:
        raise InsufficientDepthError(f"과거 궤도: {e}", e.achieved_accuracy, e.depth)
    return TangentVector(dr=vs.dr, dphi=-vs.dphi, accuracy=vs.accuracy, depth=vs.depth)


def stable_jacobian(
    table: TableGeometry, x: PhasePoint, n: int, depth: int = BATCH_DEPTH * 2,
    tol_tangent: float = TOL_TANGENT, adapted: bool = False,
) -> float:
    """JˢTⁿ(x) = ∏ 한 스텝 안정 Jacobian"""
    orb = _single_orbit(table, x, n + depth, tol_tangent)
    if orb.valid_len[0] < n + 1:
        raise NearTangentialError(f"{int(orb.valid_len[0])} 스텝에서 접선 충돌 근처: {x}")
    Vs, _ = stable_slopes(table, orb)
    logJ = log_stable_jacobians(table, orb, Vs, adapted=adapted)
    return float(np.exp(np.sum(logJ[:n, 0])))


def unstable_jacobian(
    table: TableGeometry, x: PhasePoint, n: int, depth: int = BATCH_DEPTH * 2,
    tol_tangent: float = TOL_TANGENT, adapted: bool = False,
) -> float:
    """JᵘTⁿ(x)"""
    orb = _single_orbit(table, x, n, tol_tangent)
    if orb.valid_len[0] < n:
        raise NearTangentialError(f"{int(orb.valid_len[0])} 스텝에서 접선 충돌 근처: {x}")
    Vu, _ = unstable_slopes(table, orb, depth, tol_tangent)
    if not np.isfinite(Vu[0, 0]):
        raise NearTangentialError(f"과거 궤도가 바로 끊김: {x}")
    logJ = log_unstable_jacobians(table, orb, Vu, adapted=adapted)
    return float(np.exp(np.sum(logJ[:n, 0])))


def angle_factor(table: TableGeometry, x: PhasePoint, depth: int = BATCH_DEPTH * 2) -> float:
    """E(x) = sin ∠(Eˢ(x), Eᵘ(x))"""
    vs = stable_direction(table, x, depth, tol=1.0)
    vu = unstable_direction(table, x, depth, tol=1.0)
    return math.sin(vs.angle_to(vu))


# ── 검증용 배치 진단 ─────────────────────────────

def cone_invariance_check(table: TableGeometry, ids, r, phi) -> Dict[str, float]:
    """DT(Cᵘ) ⊂ int Cᵘ, DT⁻¹(Cˢ) ⊂ int Cˢ 를 콘 경계 벡터로 확인"""
    orb = orbit(table, ids, r, phi, 1)
    ok = orb.valid_len >= 1
    K = orb.curvature(table)[:, ok]
    c = orb.cos[:, ok]
    tau = orb.tau[0, ok]
    lo_u, hi_u = table.unstable_slope_range
    lo_s, hi_s = table.stable_slope_range
    fwd = [push_forward_unstable_slope(K[0], K[1], c[0], c[1], tau, v) for v in (lo_u, hi_u)]
    bwd = [pull_back_stable_slope(K[0], K[1], c[0], c[1], tau, v) for v in (lo_s, hi_s)]
    u_in = np.all([(f > lo_u) & (f < hi_u) for f in fwd], axis=0)
    s_in = np.all([(b > lo_s) & (b < hi_s) for b in bwd], axis=0)
    return {
        "points": int(np.sum(ok)),
        "unstable_violations": int(np.sum(~u_in)),
        "stable_violations": int(np.sum(~s_in)),
    }


def expansion_along_cone(
    table: TableGeometry, ids, r, phi, n: int, slopes: np.ndarray, adapted: bool = True
) -> Tuple[np.ndarray, np.ndarray]:
    """v = (1, slope) ∈ Cᵘ 의 log ‖DTⁿv‖/‖v‖ (적응 또는 유클리드 계량). (값, 유효 마스크)"""
    orb = orbit(table, ids, r, phi, n)
    valid = orb.valid_len >= n
    K = orb.curvature(table)
    c = orb.cos
    V = np.array(slopes, dtype=float)
    V0 = V.copy()
    log_dr = np.zeros(len(V))
    for k in range(n):
        with np.errstate(invalid="ignore", divide="ignore"):
            log_dr += np.log(c[k] + orb.tau[k] * (K[k] + V)) - np.log(c[k + 1])
            V = push_forward_unstable_slope(K[k], K[k + 1], c[k], c[k + 1], orb.tau[k], V)
    with np.errstate(invalid="ignore"):
        if adapted:
            metric = np.log(K[n] + np.abs(V)) - np.log(K[0] + np.abs(V0))
        else:
            metric = 0.5 * (np.log1p(V ** 2) - np.log1p(V0 ** 2))
    return np.where(valid, log_dr + metric, np.nan), valid


def empirical_c1(table: TableGeometry, ids, r, phi, n: int, rng: np.random.Generator) -> float:
    """유클리드 계량에서 min ‖DTⁿv‖/(Λⁿ‖v‖) (v ∈ Cᵘ 무작위)"""
    lo, hi = table.unstable_slope_range
    slopes = rng.uniform(lo, hi, size=len(np.atleast_1d(ids)))
    logs, valid = expansion_along_cone(table, ids, r, phi, n, slopes, adapted=False)
    return float(np.exp(np.nanmin(logs[valid]) - n * math.log(table.Lambda)))


def fit_distortion_constant(
    table: TableGeometry, x: PhasePoint, n: int, offsets: np.ndarray = None, depth: int = BATCH_DEPTH * 2,
) -> Dict[str, float]:
    """|1 − JˢTⁿ(x)/JˢTⁿ(y)| ≤ C_d · d(x,y)^{1/(q+1)} 의 C_d 피팅

    y 는 x 를 지나는 Eˢ(x) 방향 짧은 선분 위 점. 같은 itinerary 를 갖는 점만 쓴다.
    C_d 는 전체와 작은 절반에서 따로 구해 세분화 안정성을 본다.
    """
    if offsets is None:
        offsets = np.geomspace(1e-7, 1e-3, 24)
    vs = stable_direction(table, x, tol=1.0)
    pts_r = x.r + offsets * vs.dr
    pts_phi = x.phi + offsets * vs.dphi
    ids = np.full(len(offsets) + 1, x.scatterer_id)
    r_all = np.concatenate([[x.r], pts_r])
    phi_all = np.concatenate([[x.phi], pts_phi])
    logJ, valid = stable_log_jacobian_batch(table, ids, r_all, phi_all, n=n, depth=depth)
    orb = orbit(table, ids, r_all, phi_all, n)
    same = np.all(orb.ids[: n + 1] == orb.ids[: n + 1, :1], axis=0) & valid
    if not same[0]:
        raise NearTangentialError(f"기준점 궤도가 정의되지 않음: {x}")
    mask = same[1:]
    ratio = np.abs(1.0 - np.exp(logJ[0] - logJ[1:][mask]))
    dist = offsets[mask]
    power = 1.0 / (table.q_exponent + 1.0)
    c_all = ratio / dist ** power
    if c_all.size == 0:
        return {"C_d": float("nan"), "C_d_fine": float("nan"), "pairs": 0}
    half = c_all[: max(1, c_all.size // 2)]
    return {"C_d": float(np.max(c_all)), "C_d_fine": float(np.max(half)), "pairs": int(c_all.size)}


def trajectory_frame(table: TableGeometry, x: PhasePoint, n_steps: int, depth: int = BATCH_DEPTH) -> pd.DataFrame:
    """궤도 덤프 (step, scatterer_id, r, phi, tau, log_Js, log_Ju)"""
    orb = _single_orbit(table, x, n_steps + depth, TOL_TANGENT)
    Vs, _ = stable_slopes(table, orb)
    Vu, _ = unstable_slopes(table, orb, depth)
    log_js = log_stable_jacobians(table, orb, Vs)[:, 0]
    log_ju = log_unstable_jacobians(table, orb, Vu)[:, 0]
    usable = int(min(n_steps, max(0, orb.valid_len[0] - 1)))
    return pd.DataFrame({
        "step": np.arange(usable),
        "scatterer_id": orb.ids[:usable, 0],
        "r": orb.r[:usable, 0],
        "phi": orb.phi[:usable, 0],
        "tau": orb.tau[:usable, 0],
        "log_Js": log_js[:usable],
        "log_Ju": log_ju[:usable],
    })
