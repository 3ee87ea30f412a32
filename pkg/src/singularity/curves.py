"""특이 곡선 S_n = ∪_{i=0}^{−n} Tⁱ S₀ 의 폴리라인 근사

각 폴리라인은 어느 Tʲ S₀ 에 속하는지를 power=j 로 기록한다.
n > 0 이면 j ∈ {0, −1, …, −n}, n < 0 이면 j ∈ {0, 1, …, |n|}.
S₀ 는 φ = ±(π/2 − EDGE) 에서 샘플링해 |j| 번 사상하고, 이웃 정점 간격이
resolution 보다 크면 매개변수 중점을 끼워 넣는다.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from src.dynamics.billiard_map import PhasePoint
from src.dynamics.hyperbolicity import orbit
from src.geometry.table import TableGeometry
from src.utils.errors import DomainError, RefinementBudgetError

logger = logging.getLogger("billiard_thermo")

EDGE = 1e-7
N_MAX_CURVES = 6
# 매개변수 공간에서 이보다 가까운 불연속은 더 쪼개지 않음
PARAM_FLOOR = 1e-12


@dataclass
class Polyline:
    power: int
    branch_id: int
    scatterer_id: int
    r: np.ndarray
    phi: np.ndarray

    @property
    def size(self) -> int:
        return len(self.r)

    def slopes(self) -> np.ndarray:
        dr = np.diff(self.r)
        dphi = np.diff(self.phi)
        with np.errstate(divide="ignore", invalid="ignore"):
            return dphi / dr


@dataclass
class SingularCurveSet:
    level: int
    polylines: List[Polyline]
    resolution: float
    partial: bool = False
    vertices: int = 0
    _trees: Dict = field(default_factory=dict, repr=False)

    def powers(self) -> List[int]:
        return sorted({p.power for p in self.polylines})

    def by_power(self, power: int) -> List[Polyline]:
        return [p for p in self.polylines if p.power == power]

    def tangent_slopes(self, power: int) -> np.ndarray:
        parts = [p.slopes() for p in self.by_power(power) if p.size > 1]
        return np.concatenate(parts) if parts else np.zeros(0)

    def to_frame(self) -> pd.DataFrame:
        frames = [
            pd.DataFrame({
                "level": p.power, "branch_id": p.branch_id, "scatterer_id": p.scatterer_id,
                "r": p.r, "phi": p.phi,
            })
            for p in self.polylines
        ]
        if not frames:
            return pd.DataFrame(columns=["level", "branch_id", "scatterer_id", "r", "phi"])
        return pd.concat(frames, ignore_index=True)

    def save_csv(self, path: str):
        self.to_frame().to_csv(path, index=False)

    # ── 거리 질의용 인덱스 ─────────────────────────────
    def _tree(self, table: TableGeometry, sid: int):
        if sid in self._trees:
            return self._trees[sid]
        perim = table.perimeters[sid]
        pts, nxt = [], []
        offset = 0
        for p in self.polylines:
            if p.power == 0 or p.scatterer_id != sid:
                continue
            for shift in (-perim, 0.0, perim):
                pts.append(np.column_stack([p.r + shift, p.phi]))
                idx = np.arange(offset, offset + p.size)
                n_idx = idx + 1
                n_idx[-1] = -1
                nxt.append(n_idx)
                offset += p.size
        if not pts:
            self._trees[sid] = None
            return None
        coords = np.concatenate(pts)
        nxt = np.concatenate(nxt)
        prev = np.full(len(nxt), -1)
        has_next = nxt >= 0
        prev[nxt[has_next]] = np.nonzero(has_next)[0]
        entry = (cKDTree(coords), coords, nxt, prev)
        self._trees[sid] = entry
        return entry


def _segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = np.einsum("...k,...k->...", ab, ab)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.clip(np.einsum("...k,...k->...", p - a, ab) / denom, 0.0, 1.0)
    s = np.where(denom > 0, s, 0.0)
    proj = a + s[..., None] * ab
    return np.linalg.norm(p - proj, axis=-1)


def _map_params(table: TableGeometry, sid: int, sign: float, power: int, u: np.ndarray):
    """S₀ 매개변수 u ∈ [0,1) 의 Tʲ 상 (도착 산란체, r, φ, 가지 키, 유효)"""
    perim = table.perimeters[sid]
    steps = abs(power)
    ids = np.full(len(u), sid)
    r = u * perim
    phi = np.full(len(u), sign * (np.pi / 2 - EDGE))
    orb = orbit(table, ids, r, phi, steps, inverse=power < 0)
    valid = orb.valid_len >= steps
    key = np.concatenate([orb.ids[1: steps + 1].T, orb.lift.transpose(1, 0, 2).reshape(len(u), -1)], axis=1)
    return orb.ids[steps], orb.r[steps], orb.phi[steps], key, valid


def _trace_branch(
    table: TableGeometry, sid: int, sign: float, power: int, resolution: float,
    initial_samples: int, vertex_budget: int, max_passes: int,
) -> Tuple[List[Tuple[int, np.ndarray, np.ndarray]], bool, int]:
    u = np.linspace(0.0, 1.0, initial_samples, endpoint=False)
    hid, hr, hphi, key, valid = _map_params(table, sid, sign, power, u)
    jump = max(50.0 * resolution, 0.05)
    exhausted = True
    for _ in range(max_passes):
        same = valid[:-1] & valid[1:] & np.all(key[:-1] == key[1:], axis=1)
        gap = np.hypot(np.diff(hr), np.diff(hphi))
        coarse = same & (gap > resolution) & (np.diff(u) > PARAM_FLOOR) & (gap < 0.5 * table.perimeters[np.where(hid[:-1] >= 0, hid[:-1], 0)])
        edge = ~same & (np.diff(u) > PARAM_FLOOR)
        split = np.nonzero(coarse | edge)[0]
        if split.size == 0:
            exhausted = False
            break
        if len(u) + split.size > vertex_budget:
            break
        mids = 0.5 * (u[split] + u[split + 1])
        m_id, m_r, m_phi, m_key, m_valid = _map_params(table, sid, sign, power, mids)
        u = np.concatenate([u, mids])
        order = np.argsort(u, kind="stable")
        u = u[order]
        hid = np.concatenate([hid, m_id])[order]
        hr = np.concatenate([hr, m_r])[order]
        hphi = np.concatenate([hphi, m_phi])[order]
        key = np.concatenate([key, m_key])[order]
        valid = np.concatenate([valid, m_valid])[order]
    # 끊는 지점: 무효, 키 변경, r 랩어라운드 점프
    same = valid[:-1] & valid[1:] & np.all(key[:-1] == key[1:], axis=1)
    gap = np.hypot(np.diff(hr), np.diff(hphi))
    cont = same & (gap <= jump)
    branches = []
    start = 0
    for i in range(len(u)):
        end_here = i == len(u) - 1 or not cont[i]
        if end_here:
            if valid[start]:
                branches.append((int(hid[start]), hr[start: i + 1].copy(), hphi[start: i + 1].copy()))
            start = i + 1
    return branches, exhausted, len(u)


def singularity_curves(
    table: TableGeometry,
    n: int,
    resolution: float = 2e-3,
    initial_samples: int = 512,
    vertex_budget: int = 200_000,
    max_passes: int = 40,
    n_max: int = N_MAX_CURVES,
    strict: bool = False,
) -> SingularCurveSet:
    """S_n 폴리라인 집합. 예산 초과 시 partial=True (strict 면 예외)"""
    if abs(n) > n_max:
        raise DomainError(f"|n| ≤ {n_max} 만 지원 (받은 값 {n})")
    polylines: List[Polyline] = []
    branch_id = 0
    for sid in range(table.n_scatterers):
        perim = table.perimeters[sid]
        count = max(2, int(math.ceil(perim / resolution)) + 1)
        r = np.linspace(0.0, perim, count)
        for sign in (1.0, -1.0):
            polylines.append(Polyline(0, branch_id, sid, r, np.full(count, sign * np.pi / 2)))
            branch_id += 1
    partial = False
    vertices = sum(p.size for p in polylines)
    sign_n = -1 if n > 0 else 1
    for step in range(1, abs(n) + 1):
        power = sign_n * step
        for sid in range(table.n_scatterers):
            for sign in (1.0, -1.0):
                branches, exhausted, used = _trace_branch(
                    table, sid, sign, power, resolution, initial_samples, vertex_budget, max_passes,
                )
                partial = partial or exhausted
                vertices += used
                for target, br, bphi in branches:
                    polylines.append(Polyline(power, branch_id, target, br, bphi))
                    branch_id += 1
        logger.debug(f"T^{power} S₀: 폴리라인 누적 {len(polylines)}개")
    if partial:
        msg = f"S_{n} 세분화 예산 초과 (resolution={resolution})"
        if strict:
            raise RefinementBudgetError(msg)
        logger.warning(f"⚠️ {msg}: 일부 곡선만 반환")
    return SingularCurveSet(level=n, polylines=polylines, resolution=resolution,
                            partial=partial, vertices=vertices)


def distances_to_singularity(
    table: TableGeometry, curves: SingularCurveSet, ids, r, phi, k_nearest: int = 6,
) -> np.ndarray:
    """배치 거리 d(x, S_level) (S₀ 는 해석적으로 π/2 − |φ|)"""
    ids = np.atleast_1d(np.asarray(ids, dtype=int))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    out = np.pi / 2 - np.abs(phi)
    for sid in np.unique(ids):
        entry = curves._tree(table, int(sid))
        if entry is None:
            continue
        tree, coords, nxt, prev = entry
        mask = ids == sid
        pts = np.column_stack([np.mod(r[mask], table.perimeters[sid]), phi[mask]])
        k = min(k_nearest, len(coords))
        _, idx = tree.query(pts, k=k)
        idx = idx.reshape(len(pts), k)
        best = np.linalg.norm(coords[idx] - pts[:, None, :], axis=-1)
        for neighbor in (nxt, prev):
            other = neighbor[idx]
            ok = other >= 0
            seg = _segment_distance(pts[:, None, :], coords[idx], coords[np.where(ok, other, idx)])
            best = np.minimum(best, np.where(ok, seg, np.inf))
        out[mask] = np.minimum(out[mask], best.min(axis=1))
    return out


def distance_to_singularity(
    table: TableGeometry, x: PhasePoint, level: int = 1, curves: Optional[SingularCurveSet] = None,
    resolution: float = 2e-3,
) -> float:
    """x 에서 S_{±1} 까지의 (r,φ) 거리. 정확도는 curves.resolution 수준"""
    if level not in (1, -1) and curves is None:
        raise DomainError(f"level 은 ±1 (받은 값 {level})")
    table.check_id(x.scatterer_id)
    if curves is None:
        curves = singularity_curves(table, level, resolution=resolution)
    return float(distances_to_singularity(table, curves, [x.scatterer_id], [x.r], [x.phi])[0])
