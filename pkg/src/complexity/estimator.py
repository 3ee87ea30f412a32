"""복잡도 Q_n(t,g) 와 압력 P_*(t,g), h_*, t_* 추정

샘플을 n-itinerary 로 묶고 클래스별 sup |JˢTⁿ|^t e^{S_n g} 를 더한다.
한 번 뽑은 궤도(ClassSample)로 모든 n ≤ n_max, 모든 t 를 계산한다.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.optimize import brentq
from scipy.special import logsumexp

from src.complexity.sampling import SamplingPlan, sample_srb
from src.dynamics.hyperbolicity import BATCH_DEPTH, log_stable_jacobians, orbit, stable_slopes
from src.geometry.table import TableGeometry
from src.singularity.strips import largest_resolved_strip, strip_indices
from src.utils.errors import DomainError
from src.utils.rng import make_rng

logger = logging.getLogger("billiard_thermo")

SKIP_WARN_FRACTION = 0.01
SATURATION_FRACTION = 0.5

Observable = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def choose_theta(Lambda: float) -> float:
    """θ = (Λ⁻¹, Λ^{−1/2}) 의 중점"""
    return 0.5 * (1.0 / Lambda + 1.0 / math.sqrt(Lambda))


@dataclass
class ClassSample:
    """n = 1..n_max 의 클래스 번호와 누적 log JˢTⁿ"""
    n_max: int
    codes: Dict[int, np.ndarray]
    valid: Dict[int, np.ndarray]
    cum_log_js: np.ndarray      # (n_max, N): log JˢTⁿ, n = 1..n_max
    ids: np.ndarray             # (n_max+1, N) 궤도
    r: np.ndarray
    phi: np.ndarray
    diameters: Dict[int, np.ndarray] = field(default_factory=dict)
    use_strips: bool = True
    max_strip: int = 0
    plan_meta: dict = field(default_factory=dict)

    @property
    def samples(self) -> int:
        return self.ids.shape[1]


def sample_classes(
    table: TableGeometry,
    n_max: int,
    plan: SamplingPlan,
    use_strips: bool = True,
    include_lifts: bool = True,
    depth: int = BATCH_DEPTH,
) -> ClassSample:
    """계획대로 점을 뽑고 궤도, itinerary 클래스, Jacobian 계산"""
    ids, r, phi = plan.draw(table)
    orb = orbit(table, ids, r, phi, n_max + depth)
    Vs, _ = stable_slopes(table, orb)
    log_js = log_stable_jacobians(table, orb, Vs)[:n_max]
    cum = np.cumsum(log_js, axis=0)
    strips = strip_indices(np.nan_to_num(orb.phi[:n_max]), table.q_exponent, table.k0)
    codes, valid, diam = {}, {}, {}
    for n in range(1, n_max + 1):
        ok = (orb.valid_len >= n + 1) & np.isfinite(cum[n - 1])
        cols = [orb.ids[: n + 1].T]
        if use_strips:
            cols.append(strips[:n].T)
        if include_lifts:
            cols.append(orb.lift[:n].transpose(1, 0, 2).reshape(len(ids), -1))
        rows = np.concatenate(cols, axis=1)
        c = np.full(len(ids), -1, dtype=np.int64)
        if np.any(ok):
            _, inv = np.unique(rows[ok], axis=0, return_inverse=True)
            c[ok] = inv.ravel()
        codes[n], valid[n] = c, ok
        frame = pd.DataFrame({"code": c[ok], "r": r[ok], "phi": phi[ok]})
        span = frame.groupby("code").agg(["min", "max"])
        d = np.hypot(span[("r", "max")] - span[("r", "min")], span[("phi", "max")] - span[("phi", "min")])
        diam[n] = d.to_numpy()
    max_strip = largest_resolved_strip(phi, table.q_exponent, table.k0) if use_strips else 0
    return ClassSample(
        n_max=n_max, codes=codes, valid=valid, cum_log_js=cum,
        ids=orb.ids[: n_max + 1], r=orb.r[: n_max + 1], phi=orb.phi[: n_max + 1],
        diameters=diam, use_strips=use_strips, max_strip=max_strip, plan_meta=plan.meta(),
    )


@dataclass
class ComplexityEstimate:
    n: int
    t: float
    value: float
    log_value: float
    class_count: int
    class_log_sup: np.ndarray = field(repr=False)
    samples: int = 0
    skipped: int = 0
    skip_fraction: float = 0.0
    saturated: bool = False
    max_strip: int = 0
    sampling_meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("class_log_sup")
        return d


def _birkhoff_sum(cs: ClassSample, g: Observable, n: int) -> np.ndarray:
    total = np.zeros(cs.samples)
    for j in range(n):
        ids = np.where(cs.ids[j] >= 0, cs.ids[j], 0)
        total += np.nan_to_num(g(ids, np.nan_to_num(cs.r[j]), np.nan_to_num(cs.phi[j])))
    return total


def check_small_g(g_sup: float, t0: float, theta: float):
    """2|g|_{C⁰} < −t₀ log θ 인지 확인"""
    bound = 0.5 * t0 * abs(math.log(theta))
    if g_sup >= bound:
        raise DomainError(f"|g|_C0 = {g_sup:.4g} ≥ (t₀/2)|log θ| = {bound:.4g}: 작은 g 영역 밖")


def estimate_Qn(
    table: TableGeometry,
    t: float,
    n: int,
    g: Optional[Observable] = None,
    sampler: Optional[SamplingPlan] = None,
    classes: Optional[ClassSample] = None,
    distortion_c: float = 0.0,
) -> ComplexityEstimate:
    """Q̂_n(t,g) = Σ_클래스 max |JˢTⁿ|^t e^{S_n g} (· 왜곡 보정)"""
    if n < 1:
        raise DomainError(f"n ≥ 1 이어야 함 (받은 값 {n})")
    if not t > 0:
        raise DomainError(f"t > 0 이어야 함 (받은 값 {t})")
    if classes is None or classes.n_max < n:
        classes = sample_classes(table, n, sampler or SamplingPlan())
    codes, ok = classes.codes[n], classes.valid[n]
    logw = t * classes.cum_log_js[n - 1]
    if g is not None:
        start = classes.ids[0] >= 0
        g_sup = float(np.max(np.abs(g(classes.ids[0][start], classes.r[0][start], classes.phi[0][start]))))
        check_small_g(g_sup, t, choose_theta(table.Lambda))
        logw = logw + _birkhoff_sum(classes, g, n)
    frame = pd.DataFrame({"code": codes[ok], "logw": logw[ok]})
    log_sup = frame.groupby("code")["logw"].max().to_numpy()
    if distortion_c > 0:
        diam = classes.diameters[n]
        log_sup = log_sup + t * np.log1p(distortion_c * diam ** (1.0 / (table.q_exponent + 1.0)))
    log_value = float(logsumexp(log_sup)) if log_sup.size else -np.inf
    skipped = int(np.sum(~ok))
    skip_fraction = skipped / max(1, classes.samples)
    saturated = log_sup.size > SATURATION_FRACTION * max(1, int(np.sum(ok)))
    if skip_fraction > SKIP_WARN_FRACTION:
        logger.warning(f"⚠️ Q_{n}: 접선 근처로 건너뛴 샘플 {skip_fraction:.2%}")
    if saturated:
        logger.warning(f"⚠️ Q_{n}: 클래스 수 {log_sup.size} ≈ 샘플 수 (해상도 소진)")
    return ComplexityEstimate(
        n=n, t=float(t), value=float(np.exp(log_value)), log_value=log_value,
        class_count=int(log_sup.size), class_log_sup=log_sup, samples=classes.samples,
        skipped=skipped, skip_fraction=skip_fraction, saturated=saturated,
        max_strip=classes.max_strip, sampling_meta=classes.plan_meta,
    )


@dataclass
class PressurePoint:
    t: float
    P_inf: float
    P_fit: float
    P_last: float
    spread: float
    n_max: int
    log_Q: List[float]
    classes: int
    saturated: bool = False

    @property
    def estimate(self) -> float:
        return self.P_inf


def _pressure_from_logs(t: float, log_q: Sequence[float], classes: int, saturated: bool) -> PressurePoint:
    log_q = np.asarray(log_q, dtype=float)
    ns = np.arange(1, len(log_q) + 1)
    per_n = log_q / ns
    p_inf = float(np.min(per_n))
    fit_ns = ns[1:] if len(ns) > 2 else ns
    slope = float(np.polyfit(fit_ns, log_q[fit_ns - 1], 1)[0])
    p_last = float(per_n[-1])
    spread = float(max(abs(slope - p_inf), abs(p_last - p_inf)))
    return PressurePoint(
        t=float(t), P_inf=p_inf, P_fit=slope, P_last=p_last, spread=spread,
        n_max=int(len(log_q)), log_Q=[float(v) for v in log_q], classes=classes, saturated=saturated,
    )


def estimate_pressure(
    table: TableGeometry,
    t: float,
    n_max: int,
    sampler: Optional[SamplingPlan] = None,
    classes: Optional[ClassSample] = None,
    g: Optional[Observable] = None,
    distortion_c: float = 0.0,
) -> PressurePoint:
    """P̂_*(t,g): inf_n (1/n)log Q̂_n (점추정), 기울기 피팅, 마지막 항"""
    if n_max < 4:
        raise DomainError(f"n_max ≥ 4 필요 (받은 값 {n_max})")
    if classes is None or classes.n_max < n_max:
        classes = sample_classes(table, n_max, sampler or SamplingPlan())
    estimates = [estimate_Qn(table, t, n, g=g, classes=classes, distortion_c=distortion_c) for n in range(1, n_max + 1)]
    point = _pressure_from_logs(
        t, [e.log_value for e in estimates], estimates[-1].class_count, any(e.saturated for e in estimates),
    )
    logger.debug(f"P̂_*({t:.3f}) = {point.P_inf:.4f} (fit {point.P_fit:.4f}, spread {point.spread:.4f})")
    return point


@dataclass
class PressureCurve:
    points: List[PressurePoint]

    @property
    def t(self) -> np.ndarray:
        return np.array([p.t for p in self.points])

    @property
    def values(self) -> np.ndarray:
        return np.array([p.P_inf for p in self.points])

    @property
    def spreads(self) -> np.ndarray:
        return np.array([p.spread for p in self.points])

    def at(self, t: float) -> PressurePoint:
        for p in self.points:
            if abs(p.t - t) < 1e-12:
                return p
        raise KeyError(t)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{
            "t": p.t, "P_star_inf": p.P_inf, "P_star_fit": p.P_fit, "P_star_last": p.P_last,
            "spread": p.spread, "n_max": p.n_max, "classes": p.classes,
        } for p in self.points])

    def save_csv(self, path: str):
        self.to_frame().to_csv(path, index=False, float_format="%.10g")

    def monotonicity_defect(self, Lambda: float = None) -> float:
        """max(P(t_{i+1}) − P(t_i) + Δt·log Λ − spread) (≤ 0 이면 통과)"""
        t, v, s = self.t, self.values, self.spreads
        slope = math.log(Lambda) if Lambda else 0.0
        d = v[1:] - v[:-1] + (t[1:] - t[:-1]) * slope - np.maximum(s[1:], s[:-1])
        return float(np.max(d)) if d.size else 0.0

    def convexity_defect(self) -> float:
        """균등 격자 가정 중점 볼록성 위반의 최댓값 (spread 차감)"""
        v, s = self.values, self.spreads
        if v.size < 3:
            return 0.0
        d = v[1:-1] - 0.5 * (v[:-2] + v[2:]) - s[1:-1]
        return float(np.max(d))


def pressure_curve(
    table: TableGeometry, t_grid: Sequence[float], n_max: int,
    sampler: Optional[SamplingPlan] = None, classes: Optional[ClassSample] = None,
    distortion_c: float = 0.0,
) -> PressureCurve:
    if classes is None:
        classes = sample_classes(table, n_max, sampler or SamplingPlan())
    return PressureCurve([estimate_pressure(table, t, n_max, classes=classes, distortion_c=distortion_c) for t in t_grid])


def growth_diagnostics(point: PressurePoint) -> Dict[str, float]:
    """부분/초곱셈성과 정확한 지수 성장 띠"""
    log_q = np.asarray(point.log_Q)
    n_max = len(log_q)
    sub_excess, super_c2 = -np.inf, np.inf
    for n in range(1, n_max):
        for k in range(1, n_max - n + 1):
            combo = log_q[n + k - 1] - log_q[n - 1] - log_q[k - 1]
            sub_excess = max(sub_excess, combo)
            super_c2 = min(super_c2, combo)
    ratio = log_q - np.arange(1, n_max + 1) * point.P_inf
    band = ratio[1:] if n_max > 1 else ratio
    return {
        "submultiplicative_log_excess": float(sub_excess),
        "supermultiplicative_c2": float(np.exp(super_c2)),
        "growth_band_factor": float(np.exp(band.max() - band.min())),
    }


@dataclass
class HStarEstimate:
    h_star: float
    h_fit: float
    spread: float
    counts: List[int]


def estimate_h_star(
    table: TableGeometry, n_max: int, sampler: Optional[SamplingPlan] = None,
    classes: Optional[ClassSample] = None,
) -> HStarEstimate:
    """ĥ_* = inf_n (1/n) log #M₀ⁿ (띠 없이 센 클래스 수)"""
    if classes is None or classes.use_strips:
        classes = sample_classes(table, n_max, sampler or SamplingPlan(), use_strips=False)
    counts = [int(np.unique(classes.codes[n][classes.valid[n]]).size) for n in range(1, n_max + 1)]
    point = _pressure_from_logs(0.0, np.log(np.maximum(counts, 1)), counts[-1], False)
    return HStarEstimate(h_star=point.P_inf, h_fit=point.P_fit, spread=point.spread, counts=counts)


@dataclass
class SparseRecurrence:
    phi0: float
    n0: int
    s0: float
    segments: int
    verdict: Optional[bool] = None


def sparse_recurrence_statistic(
    table: TableGeometry, phi0: float, n0: int, orbit_samples: int, seed: int = 0,
    h_star: Optional[float] = None,
) -> SparseRecurrence:
    """ŝ₀ = 길이 n0 궤도 조각 중 |φ| > φ0 충돌 비율의 최댓값"""
    if not phi0 < math.pi / 2:
        raise DomainError(f"φ0 < π/2 이어야 함 (받은 값 {phi0})")
    rng = make_rng(seed, "sparse-recurrence", n0)
    ids, r, phi = sample_srb(table, orbit_samples, rng)
    orb = orbit(table, ids, r, phi, n0 - 1)
    ok = orb.valid_len >= n0 - 1
    hits = np.abs(orb.phi[:n0, ok]) > phi0
    fractions = hits.mean(axis=0) if hits.size else np.zeros(0)
    s0 = float(fractions.max()) if fractions.size else 0.0
    verdict = None if h_star is None else bool(h_star > s0 * math.log(2.0))
    return SparseRecurrence(phi0=float(phi0), n0=int(n0), s0=s0, segments=int(ok.sum()), verdict=verdict)


@dataclass
class TStarEstimate:
    t_star: float
    low: float
    high: float
    bounded: bool
    extrapolated: bool = False

    @property
    def exceeds_one(self) -> bool:
        return self.t_star > 1.0


def _root(t: np.ndarray, f: np.ndarray):
    """f(t)=0 의 근 (구간 안은 brentq, 밖은 마지막 구간 선형 외삽). 없으면 None"""
    sign = np.nonzero(np.sign(f[:-1]) * np.sign(f[1:]) <= 0)[0]
    if sign.size:
        i = int(sign[0])
        if f[i] == 0:
            return float(t[i]), False
        if f[i + 1] == 0:
            return float(t[i + 1]), False
        def interp(s):
            return float(np.interp(s, t, f))
        return float(brentq(interp, t[i], t[i + 1])), False
    slope = (f[-1] - f[-2]) / (t[-1] - t[-2])
    if f[-1] > 0 and slope < 0:
        return float(t[-1] - f[-1] / slope), True
    return None, False


def estimate_t_star(curve, Lambda: float) -> TStarEstimate:
    """P̂_*(t) + t·log Λ = 0 의 근 t̂_*"""
    t = np.asarray(curve.t, dtype=float)
    p = np.asarray(curve.values, dtype=float)
    spread = np.asarray(getattr(curve, "spreads", np.zeros_like(p)), dtype=float)
    log_l = math.log(Lambda)
    center, extrap = _root(t, p + t * log_l)
    if center is None:
        logger.warning("⚠️ t_*: 범위 안에서 부호 변화 없음 (하한만 보고)")
        return TStarEstimate(t_star=float(t[-1]), low=float(t[-1]), high=math.inf, bounded=False)
    lo, _ = _root(t, p - spread + t * log_l)
    hi, _ = _root(t, p + spread + t * log_l)
    est = TStarEstimate(
        t_star=center, low=float(lo if lo is not None else center),
        high=float(hi if hi is not None else math.inf), bounded=True, extrapolated=extrap,
    )
    if not est.exceeds_one:
        logger.warning(f"⚠️ t̂_* = {center:.4f} ≤ 1")
    return est
