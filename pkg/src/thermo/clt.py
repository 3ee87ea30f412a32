"""블록 합 중심극한 검정과 t-격자 위 측도 진단"""
import logging
import math
from dataclasses import asdict, dataclass
from typing import Callable, Dict, Optional, Sequence

import numpy as np
from scipy import stats

from src.geometry.table import TableGeometry
from src.spectrum.eigen import EquilibriumMeasure
from src.spectrum.pressure import Derivatives, measure_orbits
from src.spectrum.ulam import UlamGrid
from src.utils.rng import make_rng

logger = logging.getLogger("billiard_thermo")

ALPHA = 0.01
DEGENERATE_VARIANCE = 1e-8


@dataclass
class CLTReport:
    t: float
    n_block: int
    m_samples: int
    P2: float
    block_variance: float
    variance_ratio: float
    ks_statistic: float
    p_value: float
    passed: bool
    skipped: bool = False
    note: str = ""
    truncated_fraction: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def clt_check(
    table: TableGeometry, t: float, measure: EquilibriumMeasure, n_block: int = 400, m_samples: int = 5_000,
    derivatives: Optional[Derivatives] = None, seed: int = 0, alpha: float = ALPHA,
) -> CLTReport:
    """S_k/√k (S_k = Σ(log JˢT − χ_t)∘T^j) 의 분포를 Normal(0, P̂₂) 와 KS 비교"""
    P2 = derivatives.P2 if derivatives is not None else float("nan")
    if derivatives is not None and P2 <= max(DEGENERATE_VARIANCE, 2.0 * (derivatives.P2_error or 0.0)):
        note = "P̂₂ 가 0 과 구별되지 않음: log JˢT 가 코호몰로지상 상수일 수 있어 검정 생략"
        logger.info(note)
        return CLTReport(t=float(t), n_block=n_block, m_samples=m_samples, P2=P2, block_variance=0.0,
                         variance_ratio=float("nan"), ks_statistic=float("nan"), p_value=float("nan"),
                         passed=False, skipped=True, note=note)
    rng = make_rng(seed, "clt", t, n_block)
    _, _, _, log_js, keep = measure_orbits(table, measure, m_samples, n_block, rng)
    truncated = float(1.0 - keep.mean())
    series = log_js[:, keep]
    chi = derivatives.P1 if derivatives is not None else float(series.mean())
    sums = (series - chi).sum(axis=0) / math.sqrt(n_block)
    var = float(sums.var(ddof=1))
    if not math.isfinite(P2):
        P2 = var
    if var < DEGENERATE_VARIANCE:
        note = "블록 합 분산이 0: 퇴화"
        return CLTReport(t=float(t), n_block=n_block, m_samples=m_samples, P2=P2, block_variance=var,
                         variance_ratio=float("nan"), ks_statistic=float("nan"), p_value=float("nan"),
                         passed=False, skipped=True, note=note, truncated_fraction=truncated)
    res = stats.kstest(sums, "norm", args=(0.0, math.sqrt(P2)))
    passed = bool(res.pvalue >= alpha)
    logger.info(f"CLT t={t:.2f}: KS={res.statistic:.4f} p={res.pvalue:.3f} 분산비 {var / P2:.3f}")
    return CLTReport(
        t=float(t), n_block=n_block, m_samples=int(keep.sum()), P2=float(P2), block_variance=var,
        variance_ratio=float(var / P2), ks_statistic=float(res.statistic), p_value=float(res.pvalue),
        passed=passed, truncated_fraction=truncated,
    )


def cell_centers(grid: UlamGrid):
    sid, i, j = grid.decompose(np.arange(grid.size))
    perim = np.asarray(grid.perimeters)[sid]
    r = (i + 0.5) / grid.n_r * perim
    phi = np.arcsin(-1.0 + 2.0 * (j + 0.5) / grid.n_s)
    return sid, r, phi


def affine_pressure_diagnostic(measure_a: EquilibriumMeasure, measure_b: EquilibriumMeasure, tol: float = 1e-3) -> dict:
    """두 t 의 μ̂_t 사이 TV 거리. 거의 0 이면 압력이 구간에서 아핀일 가능성을 표시"""
    tv = float(0.5 * np.abs(measure_a.mu_cells - measure_b.mu_cells).sum())
    return {"t_a": measure_a.t, "t_b": measure_b.t, "tv": tv, "indistinct": tv < tol}


def observable_continuity(
    measures: Sequence[EquilibriumMeasure], observable: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
) -> Dict[str, object]:
    """셀 중심에서 평가한 ψ 의 μ̂_t(ψ) 를 t 격자 위에서 보고 최대 차분 몫을 잰다"""
    ts = np.array([m.t for m in measures])
    values = np.array([m.integrate_cells(observable(*cell_centers(m.grid))) for m in measures])
    order = np.argsort(ts)
    ts, values = ts[order], values[order]
    quotients = np.abs(np.diff(values)) / np.diff(ts) if len(ts) > 1 else np.array([])
    return {
        "t": ts.tolist(), "values": values.tolist(),
        "max_difference_quotient": float(quotients.max()) if quotients.size else 0.0,
    }
