"""당구대 검증 (겹침, τ_min, 유한 지평 샘플 인증)

유한 지평 판정은 증명이 아니라 샘플 인증이다. 접선 충돌은 충돌로 치지 않고
직선으로 계속 진행시켜(grazing continuation) horizon_bound 까지 추적한다.
"""
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np

from src.geometry.raycast import cast_rays
from src.geometry.table import TableGeometry, pairwise_gaps
from src.utils.errors import DomainError, InvalidTableError

logger = logging.getLogger("billiard_thermo")

GRAZING_COS = 1e-3
MAX_GRAZING_CONTINUATIONS = 8


@dataclass
class ValidationReport:
    gap_matrix: List[List[float]]
    tau_min: float
    tau_max: float
    K_min: float
    K_max: float
    Lambda: float
    boundary_length: float
    finite_horizon: bool
    rays_cast: int
    escaped_rays: int
    grazing_chains: int
    longest_ray: Dict = field(default_factory=dict)
    direction_samples: int = 0
    horizon_bound: float = 0.0
    table: Optional[TableGeometry] = field(default=None, repr=False)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data.pop("table", None)
        return data


def _direction_grid(direction_samples: int) -> np.ndarray:
    angles = 2.0 * np.pi * np.arange(direction_samples) / direction_samples
    return np.column_stack([np.cos(angles), np.sin(angles)])


def validate_table(
    table: TableGeometry,
    direction_samples: int = 1000,
    horizon_bound: float = None,
    boundary_samples: int = 64,
) -> ValidationReport:
    """겹침 검사 + 광선 격자로 τ_max / 유한 지평 판정

    반환 리포트의 `table` 은 tau_max 와 finite_horizon 이 채워진 새 TableGeometry.
    """
    if direction_samples < 1000:
        raise DomainError(f"direction_samples ≥ 10³ 필요 (받은 값 {direction_samples})")
    bound = table.horizon_bound if horizon_bound is None else float(horizon_bound)
    if bound != table.horizon_bound:
        table = table.with_horizon(bound)

    gaps = pairwise_gaps(table, bound)
    if np.min(gaps) <= 0:
        i, j = np.unravel_index(np.argmin(gaps), gaps.shape)
        raise InvalidTableError(f"산란체 {i}, {j} 가 겹침 (최소 간격 {gaps[i, j]:.6g})")
    tau_min = float(np.min(gaps))

    directions = _direction_grid(direction_samples)
    origins, dirs, sources = [], [], []
    for sid, s in enumerate(table.scatterers):
        theta = 2.0 * np.pi * (np.arange(boundary_samples) + 0.5) / boundary_samples
        normals = np.column_stack([np.cos(theta), np.sin(theta)])
        points = np.asarray(s.center) + s.radius * normals
        outward = normals @ directions.T > 0.0
        pi, di = np.nonzero(outward)
        origins.append(points[pi])
        dirs.append(directions[di])
        sources.append(np.full(len(pi), sid))
    origins = np.vstack(origins)
    dirs = np.vstack(dirs)

    flight, escaped, chains = _trace_with_grazing(table, origins, dirs, bound)
    finite = escaped == 0
    finite_flights = flight[np.isfinite(flight)]
    tau_max = float(np.max(finite_flights)) if finite_flights.size else math.inf
    k = int(np.nanargmax(np.where(np.isfinite(flight), flight, -1.0)))
    longest = {
        "origin": origins[k].tolist(),
        "direction": dirs[k].tolist(),
        "flight": float(flight[k]),
    }

    validated = replace(table, tau_max=tau_max if finite else None, finite_horizon=bool(finite))
    report = ValidationReport(
        gap_matrix=gaps.tolist(),
        tau_min=tau_min,
        tau_max=tau_max,
        K_min=table.K_min,
        K_max=table.K_max,
        Lambda=1.0 + 2.0 * tau_min * table.K_min,
        boundary_length=table.boundary_length,
        finite_horizon=bool(finite),
        rays_cast=int(len(origins)),
        escaped_rays=int(escaped),
        grazing_chains=int(chains),
        longest_ray=longest,
        direction_samples=int(direction_samples),
        horizon_bound=bound,
        table=validated,
    )
    if finite:
        logger.info(f"✅ 유한 지평 확인: τ_min={tau_min:.4f}, τ_max≈{tau_max:.4f}, Λ={report.Lambda:.4f}")
    else:
        logger.warning(f"⚠️ 유한 지평 아님: {escaped}개 광선이 {bound} 안에서 충돌 없음")
    return report


def _trace_with_grazing(table: TableGeometry, origins: np.ndarray, dirs: np.ndarray, bound: float):
    """접선 충돌을 통과시키며 광선 추적. (비행 거리, 탈출 수, grazing chain 수) 반환"""
    total = np.zeros(len(origins))
    current = origins.copy()
    active = np.arange(len(origins))
    flight = np.full(len(origins), np.inf)
    chains = 0
    for _ in range(MAX_GRAZING_CONTINUATIONS + 1):
        if active.size == 0:
            break
        hits = cast_rays(table, current[active], dirs[active], horizon_bound=bound)
        remaining = bound - total[active]
        hit = hits.hit & (hits.distance <= remaining)
        normals = (hits.hit_point - hits.lift_center)
        normals /= np.linalg.norm(normals, axis=1, keepdims=True).clip(1e-300)
        cos_hit = np.abs(np.einsum("nk,nk->n", normals, dirs[active]))
        grazing = hit & (cos_hit < GRAZING_COS)
        landed = hit & ~grazing
        flight[active[landed]] = total[active[landed]] + hits.distance[landed]
        if np.any(grazing):
            chains += int(np.sum(grazing))
            idx = active[grazing]
            total[idx] += hits.distance[grazing]
            current[idx] = hits.hit_point[grazing]
        active = active[grazing]
    escaped = int(np.sum(~np.isfinite(flight)))
    return flight, escaped, chains
