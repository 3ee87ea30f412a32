"""위상 공간 샘플링 계획

계층화 지터 격자 + 접선 근처(높은 띠) 로그 균등 샘플 + 특이 곡선 주변 샘플.
얇은 셀이 Q_n 오차를 좌우하므로 뒤의 두 종류를 따로 둔다.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from src.geometry.table import TableGeometry
from src.singularity.curves import SingularCurveSet
from src.utils.rng import make_rng

logger = logging.getLogger("billiard_thermo")


@dataclass
class SamplingPlan:
    grid_r: int = 160
    grid_phi: int = 160
    per_cell: int = 1
    tangent_samples: int = 4000
    min_margin: float = 1e-8
    near_curve_samples: int = 0
    curves: Optional[SingularCurveSet] = field(default=None, repr=False)
    seed: int = 0
    refinement_passes: int = 0

    @property
    def resolution(self) -> float:
        return max(np.pi / self.grid_phi, 1.0 / self.grid_r)

    def refined(self, factor: int = 2) -> "SamplingPlan":
        """격자를 factor 배로 세분화한 계획 (같은 seed)"""
        return SamplingPlan(
            grid_r=self.grid_r * factor, grid_phi=self.grid_phi * factor, per_cell=self.per_cell,
            tangent_samples=self.tangent_samples * factor, min_margin=self.min_margin,
            near_curve_samples=self.near_curve_samples * factor, curves=self.curves,
            seed=self.seed, refinement_passes=self.refinement_passes + 1,
        )

    def meta(self) -> dict:
        return {
            "grid_r": self.grid_r, "grid_phi": self.grid_phi, "per_cell": self.per_cell,
            "tangent_samples": self.tangent_samples, "near_curve_samples": self.near_curve_samples,
            "refinement_passes": self.refinement_passes, "seed": self.seed,
        }

    def draw(self, table: TableGeometry) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(ids, r, phi) 샘플. 같은 계획이면 항상 같은 점"""
        rng = make_rng(self.seed, "sampling-plan", self.grid_r, self.grid_phi, self.per_cell)
        ids, rs, phis = [], [], []
        for sid in range(table.n_scatterers):
            perim = table.perimeters[sid]
            i, j = np.meshgrid(np.arange(self.grid_r), np.arange(self.grid_phi), indexing="ij")
            i = np.repeat(i.ravel(), self.per_cell)
            j = np.repeat(j.ravel(), self.per_cell)
            jitter = rng.random((len(i), 2))
            rs.append((i + jitter[:, 0]) / self.grid_r * perim)
            phis.append(-np.pi / 2 + (j + jitter[:, 1]) / self.grid_phi * np.pi)
            ids.append(np.full(len(i), sid))
        if self.tangent_samples:
            # u = π/2 − |φ| 를 로그 균등으로
            n = self.tangent_samples
            sid = rng.integers(0, table.n_scatterers, n)
            u = np.exp(rng.uniform(np.log(self.min_margin), np.log(np.pi / self.grid_phi), n))
            sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
            ids.append(sid)
            rs.append(rng.random(n) * table.perimeters[sid])
            phis.append(sign * (np.pi / 2 - u))
        if self.near_curve_samples and self.curves is not None:
            pts = [p for p in self.curves.polylines if p.power != 0]
            if pts:
                sizes = np.array([p.size for p in pts], dtype=float)
                pick = rng.choice(len(pts), self.near_curve_samples, p=sizes / sizes.sum())
                band = 3.0 * self.curves.resolution
                for k in pick:
                    p = pts[k]
                    v = rng.integers(0, p.size)
                    ids.append(np.array([p.scatterer_id]))
                    rs.append(np.array([np.mod(p.r[v] + rng.uniform(-band, band), table.perimeters[p.scatterer_id])]))
                    phis.append(np.array([np.clip(p.phi[v] + rng.uniform(-band, band), -np.pi / 2, np.pi / 2)]))
        return np.concatenate(ids).astype(int), np.concatenate(rs), np.concatenate(phis)


def sample_srb(table: TableGeometry, count: int, rng: np.random.Generator):
    """μ_SRB = cos φ dr dφ / (2|∂Q|) 에서 독립 샘플 (r 균등, sin φ 균등)"""
    weights = table.perimeters / table.boundary_length
    ids = rng.choice(table.n_scatterers, size=count, p=weights)
    r = rng.random(count) * table.perimeters[ids]
    phi = np.arcsin(rng.uniform(-1.0, 1.0, count))
    return ids, r, phi
