"""가중 Ulam 이산화 L_t

격자는 산란체별 (r, sin φ) 직사각형. 이 좌표에서 μ_SRB 는 균등이므로 셀 질량이
같은 산란체 안에서 모두 같다.
L[i][j] = (셀 i 의 샘플 x 중 T⁻¹x ∈ 셀 j 인 것의) |JˢT(T⁻¹x)|^{t−1} 평균 기여.
샘플별 (i, j, log JˢT) 를 저장해 두고 다른 t 는 reweight 로 만든다.
"""
import logging
import os
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp

from src.dynamics.billiard_map import advance_inverse
from src.dynamics.hyperbolicity import BATCH_DEPTH, orbit, pull_back_stable_slope, stable_slopes
from src.geometry.table import TableGeometry
from src.utils.errors import ConfigError, DomainError
from src.utils.parallel import map_chunks
from src.utils.rng import make_rng

logger = logging.getLogger("billiard_thermo")

CACHE_VERSION = 1
REJECT_FLAG_FRACTION = 0.5


@dataclass(frozen=True)
class UlamGrid:
    n_r: int
    n_s: int
    perimeters: Tuple[float, ...]
    boundary_length: float

    @classmethod
    def for_table(cls, table: TableGeometry, n_r: int, n_s: int) -> "UlamGrid":
        if n_r < 1 or n_s < 1:
            raise ConfigError("grid", f"격자 크기는 양수여야 함 ({n_r}×{n_s})")
        return cls(int(n_r), int(n_s), tuple(float(p) for p in table.perimeters), table.boundary_length)

    @property
    def cells_per_scatterer(self) -> int:
        return self.n_r * self.n_s

    @property
    def size(self) -> int:
        return self.cells_per_scatterer * len(self.perimeters)

    @property
    def spec(self) -> Tuple[int, int]:
        return self.n_r, self.n_s

    @property
    def reference_mass(self) -> np.ndarray:
        """μ_SRB(셀), 합 1"""
        per = np.asarray(self.perimeters) / (self.cells_per_scatterer * self.boundary_length)
        return np.repeat(per, self.cells_per_scatterer)

    def cell_of(self, ids: np.ndarray, r: np.ndarray, phi: np.ndarray) -> np.ndarray:
        ids = np.asarray(ids, dtype=int)
        perim = np.asarray(self.perimeters)[ids]
        i = np.clip((np.mod(r, perim) / perim * self.n_r).astype(int), 0, self.n_r - 1)
        j = np.clip(((np.sin(phi) + 1.0) * 0.5 * self.n_s).astype(int), 0, self.n_s - 1)
        return ids * self.cells_per_scatterer + i * self.n_s + j

    def decompose(self, cells: np.ndarray):
        sid, rest = np.divmod(np.asarray(cells), self.cells_per_scatterer)
        i, j = np.divmod(rest, self.n_s)
        return sid, i, j

    def sample_in_cells(self, cells: np.ndarray, rng: np.random.Generator):
        """셀 안에서 (r, sin φ) 균등 샘플"""
        sid, i, j = self.decompose(cells)
        u = rng.random((len(cells), 2))
        perim = np.asarray(self.perimeters)[sid]
        r = (i + u[:, 0]) / self.n_r * perim
        s = -1.0 + 2.0 * (j + u[:, 1]) / self.n_s
        return sid, r, np.arcsin(np.clip(s, -1.0, 1.0))


def draw_from_cells(grid: UlamGrid, weights: np.ndarray, count: int, rng: np.random.Generator):
    """셀을 weights 에 비례해 고르고 셀 안에서 균등 샘플"""
    p = np.clip(weights, 0.0, None)
    p = p / p.sum()
    cells = rng.choice(grid.size, size=count, p=p)
    ids, r, phi = grid.sample_in_cells(cells, rng)
    return cells, ids, r, phi


@dataclass
class UlamOperator:
    t: float
    grid: UlamGrid
    matrix: sp.csr_matrix = field(repr=False)
    rows: np.ndarray = field(repr=False)        # 샘플 x 의 셀
    cols: np.ndarray = field(repr=False)        # T⁻¹x 의 셀
    log_js: np.ndarray = field(repr=False)      # log JˢT(T⁻¹x)
    accepted: np.ndarray = field(repr=False)    # 셀별 채택 샘플 수
    attempted: np.ndarray = field(repr=False)
    seed: int = 0
    flagged_cells: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int), repr=False)

    @property
    def size(self) -> int:
        return self.grid.size

    @property
    def reference_mass(self) -> np.ndarray:
        return self.grid.reference_mass

    @property
    def rejection_fraction(self) -> float:
        return float(1.0 - self.accepted.sum() / max(1, self.attempted.sum()))

    def reweight(self, t: float) -> "UlamOperator":
        """같은 샘플로 다른 t 의 연산자 (희소 패턴 동일)"""
        return UlamOperator(
            t=float(t), grid=self.grid,
            matrix=_build_matrix(self.grid.size, self.rows, self.cols, self.log_js, self.accepted, t),
            rows=self.rows, cols=self.cols, log_js=self.log_js, accepted=self.accepted,
            attempted=self.attempted, seed=self.seed, flagged_cells=self.flagged_cells,
        )

    def subset(self, mask: np.ndarray) -> "UlamOperator":
        """샘플 부분집합으로 만든 연산자 (batch-means 오차용)"""
        rows, cols, log_js = self.rows[mask], self.cols[mask], self.log_js[mask]
        accepted = np.bincount(rows, minlength=self.grid.size)
        return UlamOperator(
            t=self.t, grid=self.grid,
            matrix=_build_matrix(self.grid.size, rows, cols, log_js, accepted, self.t),
            rows=rows, cols=cols, log_js=log_js, accepted=accepted, attempted=self.attempted,
            seed=self.seed, flagged_cells=self.flagged_cells,
        )

    def save(self, path: str):
        """버전 헤더가 있는 npz 캐시"""
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        np.savez_compressed(
            path, version=CACHE_VERSION, t=self.t, seed=self.seed,
            grid_spec=np.array(self.grid.spec), perimeters=np.array(self.grid.perimeters),
            boundary_length=self.grid.boundary_length,
            rows=self.rows, cols=self.cols, log_js=self.log_js,
            accepted=self.accepted, attempted=self.attempted, flagged=self.flagged_cells,
        )

    @classmethod
    def load(cls, path: str) -> "UlamOperator":
        with np.load(path) as data:
            if int(data["version"]) != CACHE_VERSION:
                raise DomainError(f"연산자 캐시 버전 불일치: {int(data['version'])} != {CACHE_VERSION}")
            n_r, n_s = (int(v) for v in data["grid_spec"])
            grid = UlamGrid(n_r, n_s, tuple(float(p) for p in data["perimeters"]), float(data["boundary_length"]))
            t = float(data["t"])
            rows, cols, log_js = data["rows"], data["cols"], data["log_js"]
            accepted = data["accepted"]
            return cls(
                t=t, grid=grid, matrix=_build_matrix(grid.size, rows, cols, log_js, accepted, t),
                rows=rows, cols=cols, log_js=log_js, accepted=accepted, attempted=data["attempted"],
                seed=int(data["seed"]), flagged_cells=data["flagged"],
            )


def _build_matrix(size: int, rows, cols, log_js, accepted, t: float) -> sp.csr_matrix:
    counts = np.maximum(accepted, 1)[rows]
    data = np.exp((t - 1.0) * log_js) / counts
    return sp.csr_matrix((data, (rows, cols)), shape=(size, size))


def _preimages(table: TableGeometry, ids, r, phi, depth: int):
    """x → (T⁻¹x, log JˢT(T⁻¹x), 유효)"""
    orb = orbit(table, ids, r, phi, depth)
    Vs, _ = stable_slopes(table, orb)
    vx = Vs[0]
    back = advance_inverse(table, ids, r, phi)
    ok = back.ok & np.isfinite(vx)
    yid = np.where(ok, back.ids, 0)
    K = table.curvatures
    Kx, Ky = K[np.asarray(ids)], K[yid]
    cx, cy = np.cos(phi), np.cos(back.phi)
    with np.errstate(invalid="ignore", divide="ignore"):
        vy = pull_back_stable_slope(Ky, Kx, cy, cx, back.tau, vx)
        log_j = (np.log(cy) - np.log(cx + back.tau * (Kx - vx))
                 + 0.5 * (np.log1p(vx ** 2) - np.log1p(vy ** 2)))
    ok &= np.isfinite(log_j)
    return back.ids, back.r, back.phi, log_j, ok


def assemble_ulam(
    table: TableGeometry,
    t: float,
    grid_spec: Tuple[int, int],
    samples_per_cell: int,
    seed: int,
    retry_cap: int = 3,
    depth: int = BATCH_DEPTH,
    chunk_size: int = 8192,
) -> UlamOperator:
    """셀마다 몬테카를로로 L_t 조립 (같은 seed 면 t 와 무관하게 같은 샘플)"""
    if samples_per_cell < 16:
        raise ConfigError("samples_per_cell", f"≥ 16 필요 (받은 값 {samples_per_cell})")
    if not t > 0:
        raise DomainError(f"t > 0 이어야 함 (받은 값 {t})")
    grid = UlamGrid.for_table(table, *grid_spec)
    rng = make_rng(seed, "ulam", grid.n_r, grid.n_s, samples_per_cell)
    pending = np.repeat(np.arange(grid.size), samples_per_cell)
    attempted = np.zeros(grid.size, dtype=np.int64)
    rows, cols, logs = [], [], []

    for attempt in range(retry_cap + 1):
        if pending.size == 0:
            break
        ids, r, phi = grid.sample_in_cells(pending, rng)
        np.add.at(attempted, pending, 1)

        def _chunk(sl: slice):
            return _preimages(table, ids[sl], r[sl], phi[sl], depth)

        parts = map_chunks(_chunk, len(pending), chunk_size)
        y_id = np.concatenate([p[0] for p in parts])
        y_r = np.concatenate([p[1] for p in parts])
        y_phi = np.concatenate([p[2] for p in parts])
        log_j = np.concatenate([p[3] for p in parts])
        ok = np.concatenate([p[4] for p in parts])
        rows.append(pending[ok])
        cols.append(grid.cell_of(y_id[ok], y_r[ok], y_phi[ok]))
        logs.append(log_j[ok])
        pending = pending[~ok]
        if pending.size:
            logger.debug(f"Ulam 재시도 {attempt + 1}: 거부 샘플 {pending.size}개")

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    logs = np.concatenate(logs)
    accepted = np.bincount(rows, minlength=grid.size)
    rejected = attempted - accepted
    flagged = np.nonzero(rejected > REJECT_FLAG_FRACTION * attempted)[0]
    if flagged.size:
        logger.warning(f"⚠️ 거부율 50% 초과 셀 {flagged.size}개 (채택 샘플만 사용)")
    op = UlamOperator(
        t=float(t), grid=grid, matrix=_build_matrix(grid.size, rows, cols, logs, accepted, t),
        rows=rows, cols=cols, log_js=logs, accepted=accepted, attempted=attempted,
        seed=int(seed), flagged_cells=flagged,
    )
    logger.info(f"🧮 Ulam 조립: t={t:.3f}, 셀 {grid.size}개, 비영 {op.matrix.nnz}개, 거부율 {op.rejection_fraction:.3%}")
    return op
