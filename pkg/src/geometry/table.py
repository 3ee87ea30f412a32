"""당구대 구성 (토러스 위의 원형 산란체)

Q = T² \\ ∪ O_i. 산란체는 원만 다룬다 (곡률 K = 1/반지름 일정).
경계 좌표 r 은 중심 기준 각도 0 에서 시작해 반시계 방향으로 잰 호의 길이.
"""
import json
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.utils.errors import ConfigError, DomainError

DEFAULT_TABLE = {
    "disks": [
        {"center": [0.0, 0.0], "radius": 0.25},
        {"center": [0.5, 0.5], "radius": 0.25},
    ],
    "q": 3.0,
    "k0": 3,
    "delta0": 0.05,
}

DEFAULT_HORIZON_BOUND = 3.0


@dataclass(frozen=True)
class Scatterer:
    """원형 산란체 하나"""
    center: Tuple[float, float]
    radius: float

    @property
    def curvature(self) -> float:
        return 1.0 / self.radius

    @property
    def perimeter(self) -> float:
        return 2.0 * math.pi * self.radius


@dataclass(frozen=True)
class BoundaryPoint:
    scatterer_id: int
    r: float
    position: Tuple[float, float]
    inward_normal: Tuple[float, float]
    curvature: float


@dataclass(frozen=True)
class TableGeometry:
    """당구대와 파생 상수

    tau_min 은 토러스 lift 사이 경계 간격의 최솟값(진짜 inf τ 의 하한)이고
    Lambda = 1 + 2·tau_min·K_min 이다. tau_max 와 finite_horizon 은
    validate_table 을 통과한 뒤에만 채워진다.
    """
    scatterers: Tuple[Scatterer, ...]
    q_exponent: float = 3.0
    k0: int = 3
    delta0: float = 0.05
    horizon_bound: float = DEFAULT_HORIZON_BOUND
    tau_max: Optional[float] = None
    finite_horizon: bool = False
    _tau_min: float = field(init=False, repr=False, compare=False)
    _lifts: Dict[str, np.ndarray] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.scatterers:
            raise ConfigError("disks", "산란체가 하나 이상 필요")
        if self.q_exponent <= 1:
            raise ConfigError("q", f"q > 1 이어야 함 (받은 값 {self.q_exponent})")
        if int(self.k0) < 1:
            raise ConfigError("k0", f"k0 ≥ 1 이어야 함 (받은 값 {self.k0})")
        if not 0 < self.delta0 < 1:
            raise ConfigError("delta0", f"delta0 ∈ (0,1) 이어야 함 (받은 값 {self.delta0})")
        for i, s in enumerate(self.scatterers):
            if not s.radius > 0:
                raise ConfigError(f"disks[{i}].radius", "반지름은 양수여야 함")
        object.__setattr__(self, "_lifts", _build_lifts(self.scatterers, self.horizon_bound))
        object.__setattr__(self, "_tau_min", float(np.min(pairwise_gaps(self, self.horizon_bound))))

    # ── 파생 상수 ─────────────────────────────
    @property
    def n_scatterers(self) -> int:
        return len(self.scatterers)

    @property
    def radii(self) -> np.ndarray:
        return np.array([s.radius for s in self.scatterers])

    @property
    def centers(self) -> np.ndarray:
        return np.array([s.center for s in self.scatterers], dtype=float)

    @property
    def curvatures(self) -> np.ndarray:
        return 1.0 / self.radii

    @property
    def perimeters(self) -> np.ndarray:
        return 2.0 * np.pi * self.radii

    @property
    def K_min(self) -> float:
        return 1.0 / float(np.max(self.radii))

    @property
    def K_max(self) -> float:
        return 1.0 / float(np.min(self.radii))

    @property
    def tau_min(self) -> float:
        return self._tau_min

    @property
    def Lambda(self) -> float:
        return 1.0 + 2.0 * self.tau_min * self.K_min

    @property
    def boundary_length(self) -> float:
        return float(np.sum(self.perimeters))

    @property
    def unstable_slope_range(self) -> Tuple[float, float]:
        """Cᵘ 기울기 범위 [K_min, K_max + 1/τ_min]"""
        return self.K_min, self.K_max + 1.0 / self.tau_min

    @property
    def stable_slope_range(self) -> Tuple[float, float]:
        """Cˢ 기울기 범위 [−K_max − 1/τ_min, −K_min]"""
        return -self.K_max - 1.0 / self.tau_min, -self.K_min

    def lifts(self) -> Dict[str, np.ndarray]:
        """horizon_bound 안의 lift 목록 (scatterer_id, 나선 순서로 정렬)"""
        return self._lifts

    def check_id(self, scatterer_id: int):
        if not 0 <= int(scatterer_id) < self.n_scatterers:
            raise DomainError(f"잘못된 scatterer_id: {scatterer_id} (산란체 {self.n_scatterers}개)")

    def with_horizon(self, horizon_bound: float) -> "TableGeometry":
        return replace(self, horizon_bound=float(horizon_bound))

    def to_dict(self) -> Dict:
        return {
            "disks": [{"center": list(s.center), "radius": s.radius} for s in self.scatterers],
            "q": self.q_exponent,
            "k0": self.k0,
            "delta0": self.delta0,
        }

    @classmethod
    def from_dict(cls, data: Dict, horizon_bound: float = DEFAULT_HORIZON_BOUND) -> "TableGeometry":
        """JSON 테이블 형식에서 생성"""
        if "disks" not in data:
            raise ConfigError("disks", "필수 항목 누락")
        scatterers = []
        for i, disk in enumerate(data["disks"]):
            try:
                cx, cy = (float(v) for v in disk["center"])
                radius = float(disk["radius"])
            except (KeyError, TypeError, ValueError) as e:
                raise ConfigError(f"disks[{i}]", f"center/radius 형식 오류: {e}")
            scatterers.append(Scatterer(center=(cx % 1.0, cy % 1.0), radius=radius))
        return cls(
            scatterers=tuple(scatterers),
            q_exponent=float(data.get("q", 3.0)),
            k0=int(data.get("k0", 3)),
            delta0=float(data.get("delta0", 0.05)),
            horizon_bound=float(horizon_bound),
        )


def load_table_config(path: str, horizon_bound: float = DEFAULT_HORIZON_BOUND) -> TableGeometry:
    """테이블 JSON 파일 로드"""
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError("table", f"JSON 파싱 실패: {e}")
    return TableGeometry.from_dict(data, horizon_bound=horizon_bound)


def default_table(horizon_bound: float = DEFAULT_HORIZON_BOUND) -> TableGeometry:
    return TableGeometry.from_dict(DEFAULT_TABLE, horizon_bound=horizon_bound)


def _spiral_offsets(reach: int) -> List[Tuple[int, int]]:
    """격자 오프셋을 나선 순서(링 → 각도)로 나열"""
    offsets = [(a, b) for a in range(-reach, reach + 1) for b in range(-reach, reach + 1)]
    offsets.sort(key=lambda m: (max(abs(m[0]), abs(m[1])), math.atan2(m[1], m[0]) % (2 * math.pi)))
    return offsets


def _build_lifts(scatterers, horizon_bound: float) -> Dict[str, np.ndarray]:
    reach = int(math.ceil(horizon_bound)) + 1
    offsets = _spiral_offsets(reach)
    centers, radii, ids, cells = [], [], [], []
    for sid, s in enumerate(scatterers):
        for m in offsets:
            centers.append((s.center[0] + m[0], s.center[1] + m[1]))
            radii.append(s.radius)
            ids.append(sid)
            cells.append(m)
    return {
        "centers": np.array(centers, dtype=float),
        "radii": np.array(radii, dtype=float),
        "ids": np.array(ids, dtype=int),
        "cells": np.array(cells, dtype=int),
    }


def pairwise_gaps(table: TableGeometry, horizon_bound: float) -> np.ndarray:
    """산란체 쌍별 최소 경계 간격 (토러스 lift 포함, 자기 자신은 m ≠ 0)"""
    n = table.n_scatterers
    reach = int(math.ceil(horizon_bound)) + 1
    gaps = np.full((n, n), np.inf)
    for i, si in enumerate(table.scatterers):
        for j, sj in enumerate(table.scatterers):
            for a in range(-reach, reach + 1):
                for b in range(-reach, reach + 1):
                    if i == j and a == 0 and b == 0:
                        continue
                    dx = sj.center[0] + a - si.center[0]
                    dy = sj.center[1] + b - si.center[1]
                    gap = math.hypot(dx, dy) - si.radius - sj.radius
                    if gap <= horizon_bound:
                        gaps[i, j] = min(gaps[i, j], gap)
    return gaps


def boundary_point(table: TableGeometry, scatterer_id: int, r: float) -> BoundaryPoint:
    """경계 좌표 (산란체, 호의 길이) → 위치/법선/곡률"""
    table.check_id(scatterer_id)
    if not math.isfinite(r):
        raise DomainError(f"r 이 유한하지 않음: {r}")
    s = table.scatterers[int(scatterer_id)]
    r_mod = math.fmod(r, s.perimeter)
    if r_mod < 0:
        r_mod += s.perimeter
    angle = r_mod / s.radius
    normal = (math.cos(angle), math.sin(angle))
    position = (
        (s.center[0] + s.radius * normal[0]) % 1.0,
        (s.center[1] + s.radius * normal[1]) % 1.0,
    )
    return BoundaryPoint(
        scatterer_id=int(scatterer_id),
        r=r_mod,
        position=position,
        inward_normal=normal,
        curvature=s.curvature,
    )
