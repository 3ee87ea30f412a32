"""스펙트럼에서 얻는 압력과 도함수, 상관 감쇠

P(t) = log λ_t, P′(t) = ∫ log JˢT dμ_t,
P″(t) = Σ_k 자기상관 (양쪽 합 C(0) + 2Σ_{k≥1} C(k) 을 기본값으로, 한쪽 합도 함께 보고).
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.dynamics.hyperbolicity import BATCH_DEPTH, log_stable_jacobians, orbit, stable_slopes
from src.geometry.table import TableGeometry
from src.spectrum.eigen import EquilibriumMeasure, leading_triple
from src.spectrum.ulam import UlamOperator, assemble_ulam, draw_from_cells
from src.utils.errors import DomainError
from src.utils.rng import make_rng

logger = logging.getLogger("billiard_thermo")

Observable = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]

HEAVY_TAIL_FRACTION = 0.1


def measure_orbits(
    table: TableGeometry, measure: EquilibriumMeasure, count: int, steps: int, rng: np.random.Generator,
    burn_in: int = 0, depth: int = BATCH_DEPTH,
):
    """μ_t 에서 시작한 steps 스텝 궤도와 스텝별 log JˢT

    T 를 밀면 셀 균등 초기 분포가 μ_SRB 쪽으로 끌려가므로 μ_t 통계에는 burn_in=0 을 쓴다.

    반환: (ids, r, phi (steps+1, M), log_js (steps, M), 완주 마스크)
    """
    _, ids, r, phi = draw_from_cells(measure.grid, measure.mu_cells, count, rng)
    orb = orbit(table, ids, r, phi, burn_in + steps + depth)
    Vs, _ = stable_slopes(table, orb)
    log_js = log_stable_jacobians(table, orb, Vs)
    keep = orb.valid_len >= burn_in + steps + 1
    window = slice(burn_in, burn_in + steps + 1)
    truncated = 1.0 - keep.mean()
    if truncated > 0.01:
        logger.warning(f"⚠️ 접선 근처로 잘린 궤도 {truncated:.2%}")
    return (orb.ids[window], orb.r[window], orb.phi[window],
            log_js[burn_in: burn_in + steps], keep)


@dataclass
class SpectralPressure:
    t: float
    log_lambdas: List[float]
    cells: List[int]
    estimate: float
    trend: float
    richardson: float
    standard_error: float = float("nan")

    @property
    def spread(self) -> float:
        return abs(self.trend) + 3.0 * (self.standard_error if math.isfinite(self.standard_error) else 0.0)


def pressure_from_spectrum(
    table: TableGeometry, t: float, grid_ladder: Sequence[Tuple[int, int]], samples_per_cell: int,
    seed: int, operators: Optional[Dict[Tuple[int, int], UlamOperator]] = None,
) -> SpectralPressure:
    """격자 사다리 위의 log λ̂_t 와 세분화 추세"""
    if len(grid_ladder) < 2:
        raise DomainError("격자 사다리는 2단계 이상 필요")
    logs, cells, last_op = [], [], None
    for spec in grid_ladder:
        spec = tuple(spec)
        op = operators.get(spec) if operators else None
        op = op.reweight(t) if op is not None else assemble_ulam(table, t, spec, samples_per_cell, seed)
        logs.append(leading_triple(op).log_lambda)
        cells.append(op.size)
        last_op = op
    trend = logs[-1] - logs[-2]
    se = lambda_standard_error(last_op)
    return SpectralPressure(
        t=float(t), log_lambdas=logs, cells=cells, estimate=logs[-1], trend=trend,
        richardson=logs[-1] + trend, standard_error=se,
    )


def lambda_standard_error(op: UlamOperator, batches: int = 4) -> float:
    """batch-means 표준오차: 샘플을 batches 묶음으로 나눠 각각의 log λ̂ 산포"""
    labels = np.arange(len(op.rows)) % batches
    values = []
    for b in range(batches):
        try:
            values.append(leading_triple(op.subset(labels == b)).log_lambda)
        except Exception as e:
            logger.debug(f"batch {b} 건너뜀: {e}")
    if len(values) < 2:
        return float("nan")
    # 각 묶음은 샘플이 1/batches 이므로 전체 추정의 오차는 √batches 만큼 작다
    return float(np.std(values, ddof=1) / math.sqrt(len(values)))


@dataclass
class Derivatives:
    t: float
    P1: float
    P1_error: float
    P2: float
    P2_error: float
    P2_one_sided: float
    autocorrelation: List[float] = field(default_factory=list)
    tail_bound: float = 0.0
    heavy_tail: bool = False
    P1_orbit: float = float("nan")    # 궤도 시작점 평균 (셀별 값과 교차 확인용)

    def to_dict(self) -> dict:
        return asdict(self)


def _autocorrelation(series: np.ndarray, k_max: int) -> np.ndarray:
    """series (steps, M): C(k) = mean_M[(x_0 − x̄_0)(x_k − x̄_k)]

    시작 시점 0 에 고정한 공분산 (시작점만 μ_t 분포).
    """
    x = series - series.mean(axis=1, keepdims=True)
    return np.array([np.mean(x[0] * x[k]) for k in range(k_max + 1)])


def pressure_derivatives(
    table: TableGeometry, t: float, measure: EquilibriumMeasure, K_trunc: int = 40,
    samples: int = 20_000, seed: int = 0, gap: Optional[float] = None, batches: int = 8,
) -> Derivatives:
    """P̂₁, P̂₂ 와 오차

    P̂₁ 은 셀별 μ_t 가중 log JˢT 합 (측도에 셀 값이 없으면 궤도 시작점 평균).
    P̂₂ 는 μ_t 에서 바로 시작한 궤도의 Green–Kubo 합.
    """
    if K_trunc < 10:
        raise DomainError(f"K_trunc ≥ 10 필요 (받은 값 {K_trunc})")
    rng = make_rng(seed, "derivatives", t)
    _, _, _, log_js, keep = measure_orbits(table, measure, samples, K_trunc + 1, rng)
    series = log_js[:, keep]
    first = series[0]
    p1_orbit = float(first.mean())
    p1_err = float(first.std(ddof=1) / math.sqrt(max(1, first.size - 1)))
    if measure.cell_log_js is not None:
        p1 = measure.integrate_cells(measure.cell_log_js)
        logger.debug(f"P̂₁ t={t:.3f}: 셀별 {p1:.5f}, 궤도 {p1_orbit:.5f} ± {p1_err:.5f}")
    else:
        p1 = p1_orbit
    corr = _autocorrelation(series, K_trunc)
    p2 = float(corr[0] + 2.0 * corr[1:].sum())
    one_sided = float(corr.sum())
    groups = np.array_split(np.arange(series.shape[1]), batches)
    per_group = []
    for g in groups:
        if g.size > 1:
            c = _autocorrelation(series[:, g], K_trunc)
            per_group.append(c[0] + 2.0 * c[1:].sum())
    p2_err = float(np.std(per_group, ddof=1) / math.sqrt(len(per_group))) if len(per_group) > 1 else float("nan")
    upsilon = gap if gap is not None and gap < 1 else measure.gap
    tail = 0.0
    if upsilon is not None and math.isfinite(upsilon) and upsilon < 1:
        tail = float(2.0 * abs(corr[-1]) * upsilon / (1.0 - upsilon))
    heavy = abs(corr[-1]) > HEAVY_TAIL_FRACTION * abs(p2) if p2 != 0 else False
    if heavy:
        logger.warning(f"⚠️ P″ 꼬리 항 |C({K_trunc})| 이 부분합의 10% 초과")
    return Derivatives(
        t=float(t), P1=p1, P1_error=p1_err, P2=p2, P2_error=p2_err, P2_one_sided=one_sided,
        autocorrelation=[float(c) for c in corr], tail_bound=tail, heavy_tail=bool(heavy), P1_orbit=p1_orbit,
    )


@dataclass
class CorrelationCurve:
    k: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    rate: float = float("nan")
    fit_ok: bool = False


def correlation(
    table: TableGeometry, measure: EquilibriumMeasure, f: Observable, h: Observable, k_max: int,
    samples: int = 20_000, seed: int = 0,
) -> CorrelationCurve:
    """Ĉ(k) = ∫(f∘T^k)h dμ_t − ∫f dμ_t ∫h dμ_t"""
    rng = make_rng(seed, "correlation", measure.t, k_max)
    ids, r, phi, _, keep = measure_orbits(table, measure, samples, k_max, rng, burn_in=0)
    ids, r, phi = ids[:, keep], r[:, keep], phi[:, keep]
    h0 = h(ids[0], r[0], phi[0])
    f0 = f(ids[0], r[0], phi[0])
    mean_f, mean_h = f0.mean(), h0.mean()
    values, errors = [], []
    for k in range(k_max + 1):
        fk = f(ids[k], r[k], phi[k])
        prod = fk * h0
        values.append(float(prod.mean() - mean_f * mean_h))
        errors.append(float(prod.std(ddof=1) / math.sqrt(max(1, prod.size - 1))))
    values, errors = np.array(values), np.array(errors)
    curve = CorrelationCurve(k=np.arange(k_max + 1), values=values, errors=errors)
    significant = np.abs(values[1:]) > 2.0 * errors[1:]
    usable = 0
    for flag in significant:
        if not flag:
            break
        usable += 1
    if usable >= 3:
        ks = np.arange(1, usable + 1)
        slope = np.polyfit(ks, np.log(np.abs(values[1: usable + 1])), 1)[0]
        curve.rate, curve.fit_ok = float(np.exp(slope)), True
    else:
        logger.info("상관 감쇠 피팅 생략: 몬테카를로 오차가 신호보다 큼")
    return curve
