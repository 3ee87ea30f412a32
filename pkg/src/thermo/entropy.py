"""엔트로피 항등식과 Bowen ball 질량

ĥ_{μ_t} = log λ̂_t − t·P̂₁ 이고 ∫log JᵘT dμ_t = −P̂₁.
t = 1 에서는 Pesin 공식 h_SRB = ∫log JᵘT dμ_SRB 와 비교한다.
"""
import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from src.complexity.sampling import sample_srb
from src.dynamics.billiard_map import PhasePoint
from src.dynamics.hyperbolicity import BATCH_DEPTH, log_stable_jacobians, orbit, stable_slopes, unstable_log_jacobian_batch
from src.geometry.table import TableGeometry
from src.spectrum.eigen import EquilibriumMeasure
from src.spectrum.pressure import Derivatives
from src.thermo.sampling import MeasureSample, sample_measure
from src.utils.errors import DomainError
from src.utils.rng import make_rng

logger = logging.getLogger("billiard_thermo")


@dataclass
class EntropyReport:
    t: float
    log_lambda: float
    P1: float
    entropy: float
    entropy_error: float
    lyapunov: float
    srb_lyapunov: float = float("nan")
    srb_lyapunov_error: float = float("nan")
    pesin_residual: float = float("nan")
    h_star: float = float("nan")
    below_h_star: Optional[bool] = None

    def to_dict(self) -> dict:
        return asdict(self)


def srb_lyapunov(table: TableGeometry, samples: int = 50_000, seed: int = 0):
    """χ̂ᵘ = ∫log JᵘT dμ_SRB 와 표준오차 (독립 SRB 샘플)"""
    rng = make_rng(seed, "srb-lyapunov")
    ids, r, phi = sample_srb(table, samples, rng)
    total, valid = unstable_log_jacobian_batch(table, ids, r, phi, 1)
    vals = total[valid]
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size))


def entropy_identities(
    table: TableGeometry, t: float, measure: EquilibriumMeasure, derivatives: Derivatives,
    h_star: Optional[float] = None, h_star_spread: float = 0.0, samples: int = 50_000, seed: int = 0,
) -> EntropyReport:
    h = measure.log_lambda - t * derivatives.P1
    report = EntropyReport(
        t=float(t), log_lambda=measure.log_lambda, P1=derivatives.P1, entropy=float(h),
        entropy_error=float(abs(t) * derivatives.P1_error), lyapunov=float(-derivatives.P1),
    )
    if abs(t - 1.0) < 1e-12:
        chi, chi_err = srb_lyapunov(table, samples, seed)
        report.srb_lyapunov, report.srb_lyapunov_error = chi, chi_err
        report.pesin_residual = float(abs(h - chi) / abs(chi))
    if h_star is not None:
        report.h_star = float(h_star)
        report.below_h_star = bool(h <= h_star + h_star_spread + 3 * report.entropy_error)
    return report


@dataclass(frozen=True)
class BowenBall:
    """B_n(x, ε) = {y : d(T^{−j}y, T^{−j}x) ≤ ε, 0 ≤ j ≤ n}"""
    center: PhasePoint
    n: int
    epsilon: float

    def contains(self, table: TableGeometry, ids, r, phi) -> np.ndarray:
        ys = orbit(table, ids, r, phi, self.n, inverse=True)
        xs = orbit(table, [self.center.scatterer_id], [self.center.r], [self.center.phi], self.n, inverse=True)
        inside = np.ones(ys.ids.shape[1], dtype=bool)
        for j in range(self.n + 1):
            inside &= _within(table, ys.ids[j], ys.r[j], ys.phi[j], xs.ids[j, 0], xs.r[j, 0], xs.phi[j, 0], self.epsilon)
        return inside


def _within(table: TableGeometry, ids, r, phi, cid, cr, cphi, eps) -> np.ndarray:
    if cid < 0 or not np.isfinite(cr):
        return np.zeros(len(ids), dtype=bool)
    perim = table.perimeters[cid]
    dr = np.abs(r - cr) % perim
    dr = np.minimum(dr, perim - dr)
    with np.errstate(invalid="ignore"):
        return (ids == cid) & (np.hypot(dr, phi - cphi) <= eps)


def bowen_ball_hits(
    table: TableGeometry, sample: MeasureSample, centers: MeasureSample, n_max: int, epsilon: float,
) -> np.ndarray:
    """(n_max+1, C) 표본 적중 수: hits[n, c] = #{y ∈ sample : y ∈ B_n(x_c, ε)}"""
    ys = orbit(table, sample.ids, sample.r, sample.phi, n_max, inverse=True)
    xs = orbit(table, centers.ids, centers.r, centers.phi, n_max, inverse=True)
    hits = np.zeros((n_max + 1, centers.count), dtype=int)
    trees = {}
    for sid in range(table.n_scatterers):
        mask = np.nonzero(sample.ids == sid)[0]
        perim = table.perimeters[sid]
        r_wrapped = np.minimum(np.mod(sample.r[mask], perim), np.nextafter(perim, 0.0))
        pts = np.column_stack([r_wrapped, sample.phi[mask] + np.pi / 2])
        trees[sid] = (cKDTree(pts, boxsize=[perim, 2 * np.pi]), mask)
    for c in range(centers.count):
        sid = int(centers.ids[c])
        tree, mask = trees[sid]
        q = [np.mod(centers.r[c], table.perimeters[sid]), centers.phi[c] + np.pi / 2]
        cand = mask[np.asarray(tree.query_ball_point(q, epsilon), dtype=int)]
        hits[0, c] = cand.size
        for j in range(1, n_max + 1):
            if cand.size == 0:
                break
            keep = _within(table, ys.ids[j, cand], ys.r[j, cand], ys.phi[j, cand],
                           xs.ids[j, c], xs.r[j, c], xs.phi[j, c], epsilon)
            cand = cand[keep]
            hits[j, c] = cand.size
    return hits


def backward_log_js(table: TableGeometry, centers: MeasureSample, n_max: int, depth: int = BATCH_DEPTH) -> np.ndarray:
    """(n_max+1, C): row n = Σ_{k=1}^{n} log JˢT(T^{−k}x)"""
    back = orbit(table, centers.ids, centers.r, centers.phi, n_max, inverse=True)
    y_ids, y_r, y_phi = back.ids[n_max], back.r[n_max], back.phi[n_max]
    ok = back.valid_len >= n_max
    fwd = orbit(table, np.where(ok, y_ids, 0), np.nan_to_num(y_r), np.nan_to_num(y_phi), n_max + depth)
    Vs, _ = stable_slopes(table, fwd)
    log_js = log_stable_jacobians(table, fwd, Vs)[:n_max]      # 행 i ↔ T^{−(n_max−i)}x
    ok &= fwd.valid_len >= n_max + 1
    out = np.zeros((n_max + 1, centers.count))
    for n in range(1, n_max + 1):
        out[n] = log_js[n_max - n:].sum(axis=0)
    out[:, ~ok] = np.nan
    return out


@dataclass
class BowenCheck:
    t: float
    epsilon: float
    n_max: int
    log_A: float
    violation_rate: float
    pairs: int
    skipped: int
    nested: bool
    exponent_error: float

    def to_dict(self) -> dict:
        return asdict(self)


def bowen_ball_check(
    table: TableGeometry, t: float, measure: EquilibriumMeasure, trials: int = 200, n_max: int = 8,
    epsilon: float = 0.05, sample_count: int = 400_000, seed: int = 0, pressure: Optional[float] = None,
) -> BowenCheck:
    """μ̂_t(B_n(x,ε)) ≤ A·exp(−nP + tΣ log JˢT(T^{−k}x)) 위반 비율

    A 는 중심의 절반에서 맞추고 나머지 절반에서 위반을 센다.
    """
    if epsilon >= 0.5 * table.tau_min:
        raise DomainError(f"ε={epsilon} 이 너무 큼 (τ_min/2 = {0.5 * table.tau_min:.3f} 미만 필요)")
    P = measure.log_lambda if pressure is None else pressure
    sample = sample_measure(measure, sample_count, seed)
    centers = sample_measure(measure, trials, seed + 1)
    hits = bowen_ball_hits(table, sample, centers, n_max, epsilon)
    sums = backward_log_js(table, centers, n_max)
    ns = np.arange(n_max + 1)[:, None]
    log_mass = np.log(np.where(hits > 0, hits, 1) / sample.count)
    residual = log_mass - (-ns * P + t * sums)
    usable = (hits > 0) & np.isfinite(residual) & (ns >= 1)
    skipped = int(np.sum((hits == 0) & (ns >= 1)))
    if skipped:
        logger.info(f"Bowen ball: 표본 적중 0 인 (x, n) {skipped}개 건너뜀")
    half = np.arange(centers.count) % 2 == 0
    fit, test = usable & half[None, :], usable & ~half[None, :]
    if not fit.any() or not test.any():
        raise DomainError("Bowen ball 검정에 쓸 (x, n) 쌍이 없다")
    log_A = float(residual[fit].max())
    slack = 3.0 / np.sqrt(np.where(hits > 0, hits, 1))
    violations = test & (residual > log_A + slack)
    nested = bool(np.all(np.diff(hits, axis=0) <= 0))

    # 중심별 log μ̂(B_n) 의 n-기울기 vs −P + t·(평균 log JˢT)
    errors = []
    for c in range(centers.count):
        sel = usable[:, c]
        if sel.sum() >= 3:
            slope = np.polyfit(ns[sel, 0], log_mass[sel, c], 1)[0]
            predicted = -P + t * sums[n_max, c] / n_max
            if predicted != 0 and np.isfinite(predicted):
                errors.append(abs(slope - predicted) / abs(predicted))
    return BowenCheck(
        t=float(t), epsilon=float(epsilon), n_max=int(n_max), log_A=log_A,
        violation_rate=float(violations.sum() / test.sum()), pairs=int(usable.sum()), skipped=skipped,
        nested=nested, exponent_error=float(np.median(errors)) if errors else float("nan"),
    )


def local_entropy(
    table: TableGeometry, measure: EquilibriumMeasure, n: int = 6, epsilon: float = 0.05,
    centers: int = 100, sample_count: int = 200_000, seed: int = 0,
) -> dict:
    """−(1/n) log μ̂_t(B_n(x,ε)) 의 중심 평균 (Brin–Katok 형 추정)"""
    sample = sample_measure(measure, sample_count, seed)
    xs = sample_measure(measure, centers, seed + 1)
    hits = bowen_ball_hits(table, sample, xs, n, epsilon)[n]
    hit = hits > 0
    values = -np.log(hits[hit] / sample.count) / n
    return {
        "t": measure.t, "n": n, "epsilon": epsilon,
        "local_entropy": float(values.mean()) if values.size else float("nan"),
        "std_error": float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else float("nan"),
        "centers": int(hit.sum()), "skipped": int((~hit).sum()),
    }
