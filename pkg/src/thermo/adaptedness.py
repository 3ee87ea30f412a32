"""특이 집합 근방의 측도: 적응성 적분과 ε-근방 스케일링"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from src.geometry.table import TableGeometry
from src.singularity.curves import SingularCurveSet, distances_to_singularity, singularity_curves
from src.thermo.sampling import MeasureSample
from src.utils.errors import InsufficientRangeError

logger = logging.getLogger("billiard_thermo")

SLOPE_THRESHOLD = 0.05
FLOOR_FACTOR = 3.0


def singular_distances(
    table: TableGeometry, sample: MeasureSample, curves: Sequence[SingularCurveSet],
) -> np.ndarray:
    """min_s d(x, S) over the given curve sets"""
    d = np.full(sample.count, np.inf)
    for c in curves:
        d = np.minimum(d, distances_to_singularity(table, c, sample.ids, sample.r, sample.phi))
    return d


@dataclass
class AdaptednessReport:
    estimate: float
    shells: pd.DataFrame = field(repr=False)
    decaying: bool
    extrapolated: bool
    tail: float
    floor: float

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate, "decaying": self.decaying, "extrapolated": self.extrapolated,
            "tail": self.tail, "floor": self.floor, "shells": len(self.shells),
        }


def adaptedness_integral(
    table: TableGeometry, sample: MeasureSample, curves: Optional[Sequence[SingularCurveSet]] = None,
    resolution: float = 2e-3,
) -> AdaptednessReport:
    """∫|log d(x, S_{±1})| dμ 의 몬테카를로 추정과 dyadic 거리 껍질별 부분합

    껍질 j = {2^{−(j+1)} < d ≤ 2^{−j}}. 곡선 해상도 아래 껍질은 피팅한 질량 감소율로 외삽한다.
    """
    if curves is None:
        curves = [singularity_curves(table, 1, resolution), singularity_curves(table, -1, resolution)]
    floor = max(c.resolution for c in curves)
    d = singular_distances(table, sample, curves)
    d = np.clip(d, np.finfo(float).tiny, None)
    j = np.floor(-np.log2(np.minimum(d, 1.0))).astype(int)
    j_floor = int(np.floor(-np.log2(floor)))
    resolved = j < j_floor
    n_shells = j_floor
    mass = np.bincount(j[resolved], minlength=n_shells)[:n_shells] / sample.count
    contrib = np.bincount(j[resolved], weights=np.abs(np.log(d[resolved])), minlength=n_shells)[:n_shells] / sample.count
    shells = pd.DataFrame({
        "shell": np.arange(n_shells),
        "upper": 2.0 ** -np.arange(n_shells),
        "lower": 2.0 ** -(np.arange(n_shells) + 1),
        "mass": mass,
        "contribution": contrib,
    })
    shells["partial_sum"] = shells["contribution"].cumsum()

    unresolved_mass = float(np.mean(~resolved))
    tail, extrapolated = 0.0, False
    decaying = True
    used = shells[shells["mass"] > 0]
    if len(used) >= 3:
        tail_part = used.tail(min(6, len(used)))
        slope = np.polyfit(tail_part["shell"], np.log(tail_part["mass"]), 1)[0]
        ratio = float(np.exp(slope))
        decaying = ratio < 1.0
        if unresolved_mass > 0:
            extrapolated = True
            # Σ_{j≥j_floor} m_j (j+1) log 2, m_j = m_{j_floor} ratio^{j−j_floor}
            m0 = float(tail_part["mass"].iloc[-1]) * ratio ** (j_floor - int(tail_part["shell"].iloc[-1]))
            if decaying:
                jj = np.arange(j_floor, j_floor + 200)
                tail = float(np.sum(m0 * ratio ** (jj - j_floor) * (jj + 1) * np.log(2.0)))
            else:
                tail = float("inf")
    elif unresolved_mass > 0:
        extrapolated = True
        tail = unresolved_mass * (j_floor + 1) * np.log(2.0)
    if extrapolated:
        logger.info(f"적응성 적분: 해상도 {floor:.1e} 아래 질량 {unresolved_mass:.2e}, 꼬리 외삽")
    estimate = float(shells["contribution"].sum() + tail)
    return AdaptednessReport(
        estimate=estimate, shells=shells, decaying=bool(decaying), extrapolated=extrapolated,
        tail=tail, floor=floor,
    )


@dataclass
class NeighborhoodScaling:
    epsilons: np.ndarray
    masses: np.ndarray
    slope: float
    intercept: float

    @property
    def consistent(self) -> bool:
        return self.slope >= SLOPE_THRESHOLD

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.masses) >= 0))

    def to_dict(self) -> dict:
        return {
            "epsilons": self.epsilons.tolist(), "masses": self.masses.tolist(),
            "slope": self.slope, "consistent": self.consistent, "monotone": self.monotone,
        }


def neighborhood_scaling(
    table: TableGeometry, sample: MeasureSample, curve: SingularCurveSet, epsilons: Sequence[float],
) -> NeighborhoodScaling:
    """μ̂(N_ε(S)) 를 샘플 개수로 세고 log-log 기울기를 맞춘다"""
    eps = np.sort(np.asarray(epsilons, dtype=float))
    eps = eps[eps > FLOOR_FACTOR * curve.resolution]
    if len(eps) < 3:
        raise InsufficientRangeError(
            f"해상도 {curve.resolution:.1e} 위의 ε 가 {len(eps)}개 뿐 (3개 이상 필요)"
        )
    d = distances_to_singularity(table, curve, sample.ids, sample.r, sample.phi)
    masses = np.array([np.mean(d < e) for e in eps])
    usable = masses > 0
    if usable.sum() < 3:
        raise InsufficientRangeError(f"표본이 닿은 ε 가 {int(usable.sum())}개 뿐")
    slope, intercept = np.polyfit(np.log(eps[usable]), np.log(masses[usable]), 1)
    logger.debug(f"ε-근방 스케일링 기울기 {slope:.3f}")
    return NeighborhoodScaling(epsilons=eps, masses=masses, slope=float(slope), intercept=float(intercept))
