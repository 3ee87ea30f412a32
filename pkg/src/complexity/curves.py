"""안정 곡선의 역방향 전개 𝒢_n(W) 와 성장 보조정리 진단

W 위 점은 호의 길이 매개변수 s 로 식별한다. 세대 k 의 조각은 T⁻ᵏW 의 부분곡선이고
정점마다 log J_{W_i}Tᵏ (유클리드 / 적응 계량) 를 들고 다닌다.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.dynamics.billiard_map import PhasePoint, advance_inverse
from src.dynamics.hyperbolicity import pull_back_stable_slope, stable_direction
from src.geometry.table import TableGeometry
from src.singularity.strips import strip_indices
from src.utils.errors import DomainError, RefinementBudgetError

logger = logging.getLogger("billiard_thermo")

PARAM_FLOOR = 1e-13
K0_SEARCH_MAX = 12


@dataclass
class StableCurve:
    """한 산란체 위 (r, φ) 폴리라인과 정점별 기울기"""
    scatterer_id: int
    r: np.ndarray
    phi: np.ndarray
    slopes: np.ndarray
    s: Optional[np.ndarray] = None          # 원래 W 의 매개변수
    log_j: Optional[np.ndarray] = None      # log J_{W_i}Tⁿ (유클리드)
    log_j_adapted: Optional[np.ndarray] = None
    homogeneous: bool = True

    @property
    def length(self) -> float:
        return float(np.sum(np.hypot(np.diff(self.r), np.diff(self.phi))))

    @property
    def image_length(self) -> float:
        """|TⁿW_i| = W 매개변수 폭"""
        return float(self.s[-1] - self.s[0]) if self.s is not None else self.length

    @property
    def sup_log_j(self) -> float:
        return float(np.max(self.log_j)) if self.log_j is not None else 0.0

    @property
    def sup_log_j_adapted(self) -> float:
        return float(np.max(self.log_j_adapted)) if self.log_j_adapted is not None else 0.0

    @classmethod
    def segment(
        cls, table: TableGeometry, center: PhasePoint, length: float, slope: Optional[float] = None,
        vertices: int = 33,
    ) -> "StableCurve":
        """center 를 지나는 길이 length 의 직선 안정 곡선 (기본 기울기: Eˢ(center))"""
        lo, hi = table.stable_slope_range
        if slope is None:
            slope = stable_direction(table, center, depth=30, tol=1.0).slope
        if not lo <= slope <= hi:
            raise DomainError(f"기울기 {slope:.4g} 가 Cˢ [{lo:.4g}, {hi:.4g}] 밖")
        s = np.linspace(-0.5 * length, 0.5 * length, vertices)
        unit = np.array([1.0, slope]) / math.hypot(1.0, slope)
        r = center.r + s * unit[0]
        phi = center.phi + s * unit[1]
        if np.any(np.abs(phi) >= np.pi / 2):
            raise DomainError("곡선이 S₀ 를 넘음")
        strips = strip_indices(phi, table.q_exponent, table.k0)
        return cls(
            scatterer_id=center.scatterer_id, r=r, phi=phi, slopes=np.full(vertices, slope),
            s=s - s[0], log_j=np.zeros(vertices), log_j_adapted=np.zeros(vertices),
            homogeneous=bool(np.all(strips == strips[0])),
        )

    def at_params(self, s: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """매개변수 s 에서의 (r, φ, 기울기) 선형 보간"""
        return (np.interp(s, self.s, self.r), np.interp(s, self.s, self.phi), np.interp(s, self.s, self.slopes))


@dataclass
class _Path:
    ids: np.ndarray
    r: np.ndarray
    phi: np.ndarray
    slope: np.ndarray
    log_j: np.ndarray
    log_j_adapted: np.ndarray
    key: np.ndarray
    valid: np.ndarray


def _pull_back_path(table: TableGeometry, W: StableCurve, s: np.ndarray, n: int) -> _Path:
    """W 의 매개변수 s 점들을 T⁻¹ 로 n 번 당기며 기울기/Jacobian/키 누적"""
    r, phi, V = W.at_params(s)
    ids = np.full(len(s), W.scatterer_id)
    K = table.curvatures
    log_j = np.zeros(len(s))
    log_ja = np.zeros(len(s))
    valid = np.ones(len(s), dtype=bool)
    keys = []
    for _ in range(n):
        res = advance_inverse(table, ids, r, phi)
        ok = res.ok & valid
        nid = np.where(ok, res.ids, 0)
        cid = np.where(ids >= 0, ids, 0)
        K1, K0 = K[cid], K[nid]
        c1, c0 = np.cos(phi), np.cos(res.phi)
        with np.errstate(invalid="ignore", divide="ignore"):
            V0 = pull_back_stable_slope(K0, K1, c0, c1, res.tau, V)
            step = np.log(c0) - np.log(c1 + res.tau * (K1 - V))
            log_j = log_j + step + 0.5 * (np.log1p(V ** 2) - np.log1p(V0 ** 2))
            log_ja = log_ja + step + np.log(K1 + np.abs(V)) - np.log(K0 + np.abs(V0))
        strips = strip_indices(np.nan_to_num(res.phi), table.q_exponent, table.k0)
        keys.append(np.column_stack([np.where(ok, res.ids, -1), strips, res.lift]))
        ids, r, phi, V = np.where(ok, res.ids, -1), res.r, res.phi, V0
        valid = ok
    key = np.concatenate(keys, axis=1) if keys else np.zeros((len(s), 0), dtype=int)
    return _Path(ids, r, phi, V, log_j, log_ja, key, valid)


def _refined_path(
    table: TableGeometry, W: StableCurve, n: int, max_gap: float, vertex_budget: int, max_passes: int = 60,
) -> Tuple[np.ndarray, _Path, bool]:
    s = W.s.copy()
    path = _pull_back_path(table, W, s, n)
    exhausted = True
    for _ in range(max_passes):
        same = path.valid[:-1] & path.valid[1:] & np.all(path.key[:-1] == path.key[1:], axis=1)
        gap = np.hypot(np.diff(path.r), np.diff(path.phi))
        wide = np.diff(s) > PARAM_FLOOR
        split = np.nonzero(wide & ((same & (gap > max_gap)) | ~same))[0]
        if split.size == 0:
            exhausted = False
            break
        if len(s) + split.size > vertex_budget:
            break
        mids = 0.5 * (s[split] + s[split + 1])
        extra = _pull_back_path(table, W, mids, n)
        s = np.concatenate([s, mids])
        order = np.argsort(s, kind="stable")
        s = s[order]
        path = _Path(*[
            np.concatenate([getattr(path, f), getattr(extra, f)])[order]
            for f in ("ids", "r", "phi", "slope", "log_j", "log_j_adapted", "key", "valid")
        ])
    return s, path, exhausted


def _split_long(piece: StableCurve, delta: float) -> List[StableCurve]:
    """길이 > δ 인 조각을 길이 [δ/2, δ] 의 조각으로 균등 분할"""
    length = piece.length
    if length <= delta or piece.r.size < 2:
        return [piece]
    m = int(math.ceil(length / delta))
    arc = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(piece.r), np.diff(piece.phi)))])
    cuts = np.linspace(0.0, arc[-1], m + 1)
    out = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        inner = arc[(arc > a) & (arc < b)]
        grid = np.concatenate([[a], inner, [b]])
        def f(arr):
            return np.interp(grid, arc, arr)
        out.append(StableCurve(
            scatterer_id=piece.scatterer_id, r=f(piece.r), phi=f(piece.phi), slopes=f(piece.slopes),
            s=f(piece.s), log_j=f(piece.log_j), log_j_adapted=f(piece.log_j_adapted),
            homogeneous=piece.homogeneous,
        ))
    return out


@dataclass
class Evolution:
    generation: int
    pieces: List[StableCurve]
    partial: bool = False

    @property
    def weights(self) -> np.ndarray:
        """|J_{W_i}Tⁿ|_{C⁰} (유클리드)"""
        return np.exp([p.sup_log_j for p in self.pieces])

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "generation": self.generation,
            "piece_id": np.arange(len(self.pieces)),
            "length": [p.length for p in self.pieces],
            "sup_logJs": [p.sup_log_j for p in self.pieces],
        })


def _decompose(
    table: TableGeometry, W: StableCurve, n: int, delta: Optional[float], vertex_budget: int,
    strict: bool,
) -> Evolution:
    max_gap = (delta if delta else table.delta0) / 8.0
    s, path, exhausted = _refined_path(table, W, n, max_gap, vertex_budget)
    if exhausted:
        msg = f"곡선 전개 세분화 예산 초과 (n={n})"
        if strict:
            raise RefinementBudgetError(msg)
        logger.warning(f"⚠️ {msg}: 부분 분해")
    same = path.valid[:-1] & path.valid[1:] & np.all(path.key[:-1] == path.key[1:], axis=1)
    pieces: List[StableCurve] = []
    start = 0
    for i in range(len(s)):
        if i == len(s) - 1 or not same[i]:
            sl = slice(start, i + 1)
            if path.valid[start] and i + 1 - start >= 2:
                piece = StableCurve(
                    scatterer_id=int(path.ids[start]), r=path.r[sl], phi=path.phi[sl], slopes=path.slope[sl],
                    s=s[sl], log_j=path.log_j[sl], log_j_adapted=path.log_j_adapted[sl],
                )
                pieces.extend(_split_long(piece, delta) if delta else [piece])
            start = i + 1
    return Evolution(generation=n, pieces=pieces, partial=exhausted)


def evolve_stable_curve(
    table: TableGeometry, W: StableCurve, n: int, delta: float, vertex_budget: int = 100_000,
    strict: bool = False,
) -> Evolution:
    """𝒢_n(W): T⁻ⁿW 를 S₀^ℍ 에서 자르고 긴 조각은 [δ/2, δ] 로 분할"""
    if n < 1:
        raise DomainError(f"n ≥ 1 이어야 함 (받은 값 {n})")
    if not W.homogeneous:
        logger.warning("⚠️ W 가 한 동질성 띠 안에 있지 않음")
    return _decompose(table, W, n, delta, vertex_budget, strict)


def evolution_frame(table: TableGeometry, W: StableCurve, n: int, delta: float) -> pd.DataFrame:
    """세대 1..n 의 조각 덤프 (generation, piece_id, length, sup_logJs)"""
    return pd.concat([evolve_stable_curve(table, W, k, delta).frame() for k in range(1, n + 1)], ignore_index=True)


@dataclass
class OneStepSum:
    t: float
    total: float
    theta_hat: float
    components: int


def one_step_expansion_sum(table: TableGeometry, W: StableCurve, t: float) -> OneStepSum:
    """Σ_i |J_{V_i}T|^t_{C⁰,*} 와 θ̂ = sum^{1/t}"""
    if W.length >= table.delta0:
        raise DomainError(f"|W| = {W.length:.4g} ≥ δ₀ = {table.delta0}")
    evo = _decompose(table, W, 1, None, 50_000, strict=False)
    sups = np.array([p.sup_log_j_adapted for p in evo.pieces])
    total = float(np.sum(np.exp(t * sups))) if sups.size else 0.0
    return OneStepSum(t=float(t), total=total, theta_hat=total ** (1.0 / t) if total > 0 else 0.0,
                      components=len(evo.pieces))


def one_step_violations(
    table: TableGeometry, curves: Sequence[StableCurve], t: float, theta: float,
) -> Tuple[int, float]:
    """Σ|J_{V_i}T|^t_* ≥ θ^t 인 곡선 수와 최대 sum/θ^t"""
    ratios = np.array([one_step_expansion_sum(table, W, t).total / theta ** t for W in curves])
    if ratios.size == 0:
        return 0, 0.0
    return int(np.sum(ratios >= 1.0)), float(ratios.max())


def smallest_k0(
    table: TableGeometry, curves: Sequence[StableCurve], t: float, theta: float, k0_max: int = K0_SEARCH_MAX,
) -> Optional[int]:
    """table.k0 부터 올려가며 t 에서 위반이 없는 첫 k0. k0_max 까지 없으면 None"""
    for k0 in range(int(table.k0), int(k0_max) + 1):
        violations, worst = one_step_violations(replace(table, k0=k0), curves, t, theta)
        logger.debug(f"k0={k0}, t={t}: 위반 {violations}, 최대 비율 {worst:.3f}")
        if violations == 0:
            return k0
    return None


def short_piece_fraction(table: TableGeometry, W: StableCurve, n: int, delta1: float, t: float) -> float:
    """𝒢_n^{δ₁}(W) 에서 짧은 조각(|W_i| < δ₁/3) 의 가중치 비율"""
    if W.length < delta1 / 3.0:
        raise DomainError(f"|W| ≥ δ₁/3 필요 (|W| = {W.length:.4g})")
    evo = evolve_stable_curve(table, W, n, delta1)
    if not evo.pieces:
        return 1.0
    weights = np.exp(t * np.array([p.sup_log_j_adapted for p in evo.pieces]))
    lengths = np.array([p.length for p in evo.pieces])
    long_mask = lengths >= delta1 / 3.0
    if not np.any(long_mask):
        return 1.0
    return float(weights[~long_mask].sum() / weights.sum())
