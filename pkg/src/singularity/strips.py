"""동질성 띠 ℍ_k

u = π/2 − |φ| 에 대해 k0^{−q} ≤ u 이면 k = 0,
아니면 (k+1)^{−q} ≤ u < k^{−q} 인 k 에 φ 의 부호를 붙인다.
u 가 정확히 k^{−q} 이면 반열린 구간 규약에 따라 k−1 띠로 간다.
"""
import math
from dataclasses import dataclass

import numpy as np

from src.geometry.table import TableGeometry

# 완전 접선(u = 0)에 주는 띠 번호
TANGENT_STRIP = 10 ** 9


@dataclass(frozen=True)
class StripIndex:
    k: int


def strip_of_margin(u: float, q: float, k0: int) -> int:
    """u = π/2 − |φ| ≥ 0 에 대한 부호 없는 띠 번호"""
    if u >= k0 ** (-q):
        return 0
    if u <= 0.0:
        return TANGENT_STRIP
    k = max(int(k0), int(math.ceil(u ** (-1.0 / q))) - 1)
    # 부동소수 보정
    while (k + 1) ** (-q) > u:
        k += 1
    while k > k0 and u >= k ** (-q):
        k -= 1
    return k


def strip_index(table: TableGeometry, x) -> StripIndex:
    phi = x.phi if hasattr(x, "phi") else float(x)
    u = math.pi / 2 - abs(phi)
    k = strip_of_margin(u, table.q_exponent, table.k0)
    return StripIndex(k=int(math.copysign(k, phi)) if k else 0)


def strip_indices(phi: np.ndarray, q: float, k0: int) -> np.ndarray:
    """배치 버전 (부호 포함). NaN 은 0 으로 둔다"""
    phi = np.asarray(phi, dtype=float)
    u = np.pi / 2 - np.abs(phi)
    out = np.zeros(phi.shape, dtype=np.int64)
    near = np.isfinite(u) & (u < k0 ** (-q))
    if np.any(near):
        uu = u[near]
        with np.errstate(divide="ignore"):
            k = np.ceil(np.where(uu > 0, uu, np.inf) ** (-1.0 / q)).astype(np.float64) - 1
        k = np.where(np.isfinite(k), k, TANGENT_STRIP)
        k = np.maximum(k, k0).astype(np.int64)
        # 경계 보정 (한 칸까지)
        bump = (k + 1.0) ** (-q) > uu
        k = k + bump
        drop = (k > k0) & (uu >= k.astype(float) ** (-q)) & ~bump
        k = k - drop
        out[near] = np.where(phi[near] < 0, -k, k)
    return out


def largest_resolved_strip(phi: np.ndarray, q: float, k0: int) -> int:
    """샘플에 실제로 나타난 가장 큰 |k|"""
    ks = np.abs(strip_indices(phi[np.isfinite(phi)], q, k0))
    ks = ks[ks < TANGENT_STRIP]
    return int(ks.max()) if ks.size else 0
