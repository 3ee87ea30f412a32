"""광선-원 교차 (토러스 격자 펼침)

광선 N개 × lift L개를 한 번에 계산한다. 같은 거리의 교차는
(scatterer_id, 나선 순서 셀) 사전식 순서의 첫 항목이 이긴다.
"""
import logging
from dataclasses import dataclass

import numpy as np

from src.geometry.table import TableGeometry
from src.utils.parallel import map_chunks

logger = logging.getLogger("billiard_thermo")

# 출발 산란체 자기 자신과의 교차(s≈0)를 제외하는 최소 비행 거리
MIN_FLIGHT = 1e-10


@dataclass
class RayHits:
    """광선 배치의 첫 충돌 결과 (충돌 없음: distance=inf, scatterer=-1)"""
    distance: np.ndarray
    scatterer: np.ndarray
    lift_center: np.ndarray
    hit_point: np.ndarray  # 펼친 평면 좌표 (origin 의 셀 기준)

    @property
    def hit(self) -> np.ndarray:
        return np.isfinite(self.distance)


def cast_rays(
    table: TableGeometry,
    origins: np.ndarray,
    directions: np.ndarray,
    horizon_bound: float = None,
    chunk_size: int = 2048,
) -> RayHits:
    """origins (N,2) 에서 단위 방향 directions (N,2) 로 쏜 광선의 첫 충돌"""
    bound = table.horizon_bound if horizon_bound is None else float(horizon_bound)
    lifts = table.lifts()
    centers, radii, ids = lifts["centers"], lifts["radii"], lifts["ids"]
    origins = np.atleast_2d(np.asarray(origins, dtype=float))
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    cells = np.floor(origins)
    local = origins - cells

    def _chunk(sl: slice):
        p = local[sl]
        d = directions[sl]
        diff = p[:, None, :] - centers[None, :, :]
        b = np.einsum("nk,nlk->nl", d, diff)
        cc = np.einsum("nlk,nlk->nl", diff, diff) - radii[None, :] ** 2
        disc = b * b - cc
        s = -b - np.sqrt(np.maximum(disc, 0.0))
        valid = (disc > 0.0) & (s > MIN_FLIGHT) & (s <= bound)
        s = np.where(valid, s, np.inf)
        k = np.argmin(s, axis=1)
        dist = s[np.arange(len(k)), k]
        return dist, k

    parts = map_chunks(_chunk, len(origins), chunk_size)
    if parts:
        dist = np.concatenate([p[0] for p in parts])
        k = np.concatenate([p[1] for p in parts])
    else:
        dist = np.zeros(0)
        k = np.zeros(0, dtype=int)

    hit = np.isfinite(dist)
    scatterer = np.where(hit, ids[k], -1)
    lift_center = centers[k] + cells
    hit_point = origins + np.where(hit, dist, 0.0)[:, None] * directions
    return RayHits(distance=dist, scatterer=scatterer, lift_center=lift_center, hit_point=hit_point)
