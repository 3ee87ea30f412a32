"""μ_t 샘플과 궤도 기반 SRB 히스토그램"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import stats

from src.complexity.sampling import sample_srb
from src.dynamics.billiard_map import PhasePoint
from src.dynamics.hyperbolicity import orbit
from src.geometry.table import TableGeometry
from src.spectrum.eigen import EquilibriumMeasure
from src.spectrum.ulam import UlamGrid, draw_from_cells
from src.utils.errors import DomainError
from src.utils.rng import make_rng

logger = logging.getLogger("billiard_thermo")

ULAM_CELLS = "ulam-cells"
TRAJECTORY = "trajectory-reweighting"


@dataclass
class MeasureSample:
    t: float
    ids: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    cells: np.ndarray = field(repr=False)
    seed: int = 0
    source: str = ULAM_CELLS

    @property
    def count(self) -> int:
        return len(self.ids)

    @property
    def weights(self) -> np.ndarray:
        # 재표집 후 균등
        return np.full(self.count, 1.0 / max(1, self.count))

    @property
    def points(self) -> List[PhasePoint]:
        return [PhasePoint(int(i), float(r), float(p)) for i, r, p in zip(self.ids, self.r, self.phi)]


def birkhoff_histogram(
    table: TableGeometry, grid: UlamGrid, orbits: int = 200, steps: int = 2_000, seed: int = 0,
    burn_in: int = 20,
):
    """긴 궤도의 셀 방문 빈도 (μ_SRB 의 Birkhoff 평균 근사)

    반환: (셀 빈도, 방문한 점들의 φ)
    """
    rng = make_rng(seed, "birkhoff", grid.n_r, grid.n_s)
    ids, r, phi = sample_srb(table, orbits, rng)
    orb = orbit(table, ids, r, phi, burn_in + steps)
    block = slice(burn_in, burn_in + steps + 1)
    valid = np.arange(orb.ids.shape[0])[:, None] <= orb.valid_len[None, :]
    valid = valid[block]
    o_ids, o_r, o_phi = orb.ids[block][valid], orb.r[block][valid], orb.phi[block][valid]
    cells = grid.cell_of(o_ids, o_r, o_phi)
    counts = np.bincount(cells, minlength=grid.size).astype(float)
    logger.debug(f"Birkhoff 히스토그램: 방문 {counts.sum():.0f}, 궤도 {orbits}")
    return counts / counts.sum(), o_phi


def sample_measure(
    measure: EquilibriumMeasure, count: int, seed: int, source: str = ULAM_CELLS,
    table: Optional[TableGeometry] = None, steps: int = 200,
) -> MeasureSample:
    """μ_t 에서 count 개 점

    ulam-cells: mu_cells 비례로 셀을 고르고 셀 안에서 (r, sin φ) 균등.
    trajectory-reweighting: SRB 궤도 점을 밀도 mu_cells/μ_SRB(셀) 로 재표집.
    """
    if measure.grid is None:
        raise DomainError("격자 없는 측도는 샘플링할 수 없다")
    grid = measure.grid
    rng = make_rng(seed, "measure-sample", source, measure.t)
    if source == ULAM_CELLS:
        cells, ids, r, phi = draw_from_cells(grid, measure.mu_cells, count, rng)
    elif source == TRAJECTORY:
        if table is None:
            raise DomainError("trajectory-reweighting 에는 table 필요")
        orbits = max(1, count // steps + 1)
        ids0, r0, phi0 = sample_srb(table, orbits, rng)
        orb = orbit(table, ids0, r0, phi0, 20 + steps)
        valid = (np.arange(orb.ids.shape[0])[:, None] <= orb.valid_len[None, :])[20:]
        pool_ids, pool_r, pool_phi = orb.ids[20:][valid], orb.r[20:][valid], orb.phi[20:][valid]
        pool_cells = grid.cell_of(pool_ids, pool_r, pool_phi)
        density = measure.mu_cells / grid.reference_mass
        w = density[pool_cells]
        pick = rng.choice(len(pool_cells), size=count, p=w / w.sum())
        cells, ids, r, phi = pool_cells[pick], pool_ids[pick], pool_r[pick], pool_phi[pick]
    else:
        raise DomainError(f"알 수 없는 샘플 출처: {source}")
    return MeasureSample(t=measure.t, ids=ids, r=r, phi=phi, cells=cells, seed=seed, source=source)


def histogram_test(sample: MeasureSample, measure: EquilibriumMeasure) -> dict:
    """셀 히스토그램 vs mu_cells χ² 검정 (기대 빈도 5 미만 셀은 병합)"""
    observed = np.bincount(sample.cells, minlength=measure.grid.size).astype(float)
    expected = measure.mu_cells * sample.count
    small = expected < 5.0
    if small.any():
        observed = np.append(observed[~small], observed[small].sum())
        expected = np.append(expected[~small], expected[small].sum())
        if expected[-1] == 0:
            observed, expected = observed[:-1], expected[:-1]
    expected *= observed.sum() / expected.sum()
    chi2, p_value = stats.chisquare(observed, expected)
    return {
        "chi2": float(chi2), "p_value": float(p_value), "cells": int(len(expected)),
        "empty_weight_hits": int(np.sum(np.bincount(sample.cells, minlength=measure.grid.size)[measure.mu_cells <= 0])),
    }


def phi_marginal_test(sample: MeasureSample, reference_phi: np.ndarray) -> dict:
    """φ 주변분포 2표본 KS 검정"""
    res = stats.ks_2samp(sample.phi, reference_phi)
    return {"ks": float(res.statistic), "p_value": float(res.pvalue)}
