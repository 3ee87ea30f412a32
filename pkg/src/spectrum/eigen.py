"""선두 고유 삼중쌍 (λ, ν, ν̃), 두 번째 고유값, 평형 측도 μ_t

ν 는 μ_SRB 에 대한 셀별 밀도(오른쪽 고유벡터), ν̃ 는 왼쪽 고유벡터를 셀 질량으로
나눈 밀도. μ_t(셀 i) ∝ ν_i·ν̃_i·μ_SRB(셀 i).
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigs

from src.spectrum.ulam import UlamGrid, UlamOperator
from src.utils.errors import ConvergenceError, SpuriousEigenvectorError
from src.utils.rng import make_rng

logger = logging.getLogger("billiard_thermo")

Operator = Union[UlamOperator, sp.spmatrix, np.ndarray]


def _unpack(op: Operator):
    if isinstance(op, UlamOperator):
        return op.matrix.tocsr(), op.reference_mass, op.t
    m = sp.csr_matrix(op)
    return m, np.full(m.shape[0], 1.0 / m.shape[0]), None


@dataclass
class LeadingTriple:
    lam: float
    nu: np.ndarray = field(repr=False)        # 오른쪽, Σ ν·μ = 1
    nu_tilde: np.ndarray = field(repr=False)  # 왼쪽/μ, ⟨ν, ν̃⟩_μ = 1
    left: np.ndarray = field(repr=False)      # 왼쪽 고유벡터 (합 1)
    iterations: int = 0
    residual: float = 0.0
    plain_gap: float = 0.0                    # 단순 거듭제곱 반복과 Cesàro 평균의 차

    @property
    def log_lambda(self) -> float:
        return float(np.log(self.lam))


def _power(matrix, start: np.ndarray, tol: float, max_iters: int, window: int = 8):
    """L¹ 정규화 거듭제곱 반복. 고유벡터는 마지막 window 개 반복의 Cesàro 평균"""
    v = start / np.abs(start).sum()
    vec_tol = 0.1 * np.sqrt(tol)
    lam_prev = np.nan
    avg_prev = None
    history = []
    for k in range(1, max_iters + 1):
        w = matrix @ v
        norm = np.abs(w).sum()
        if norm == 0:
            raise ConvergenceError("연산자가 벡터를 0 으로 보냄", residual=np.inf, iterations=k)
        lam = norm / np.abs(v).sum()
        v = w / norm
        history.append(v)
        if len(history) > window:
            history.pop(0)
        avg = np.mean(history, axis=0)
        if (avg_prev is not None and abs(lam - lam_prev) < tol * max(1.0, abs(lam))
                and np.abs(avg - avg_prev).sum() < vec_tol):
            break
        lam_prev, avg_prev = lam, avg
    else:
        residual = float(np.abs(matrix @ v - lam * v).sum())
        raise ConvergenceError(f"{max_iters}회 안에 수렴하지 않음", residual=residual, iterations=max_iters)
    return float(lam), avg / np.abs(avg).sum(), v, k


def _check_sign(vec: np.ndarray, tol: float, name: str) -> np.ndarray:
    if vec.sum() < 0:
        vec = -vec
    scale = np.abs(vec).max()
    if np.any(vec < -tol * scale):
        raise SpuriousEigenvectorError(f"{name} 에 음수 성분 (min {vec.min():.3g})")
    return np.clip(vec, 0.0, None)


def leading_triple(op: Operator, tol: float = 1e-10, max_iters: int = 20_000, cross_check: bool = False) -> LeadingTriple:
    """λ_t = e^{P(t)} 와 ν, ν̃ (Cesàro 평균 거듭제곱 반복)"""
    matrix, mass, _ = _unpack(op)
    n = matrix.shape[0]
    start = np.ones(n)
    lam, nu_avg, nu_plain, it_r = _power(matrix, start, tol, max_iters)
    lam_l, left_avg, _, it_l = _power(matrix.T.tocsr(), mass.copy(), tol, max_iters)
    nu = _check_sign(nu_avg, np.sqrt(tol), "ν")
    left = _check_sign(left_avg, np.sqrt(tol), "ν̃")
    nu = nu / np.sum(nu * mass)
    nu_tilde = left / mass
    nu_tilde = nu_tilde / np.sum(nu * nu_tilde * mass)
    if np.sum(nu * nu_tilde * mass) <= 0:
        raise SpuriousEigenvectorError("⟨ν, ν̃⟩ = 0")
    residual = float(np.abs(matrix @ nu - lam * nu).sum() / np.abs(nu).sum())
    plain_gap = float(np.abs(nu_plain / np.abs(nu_plain).sum() - nu_avg).sum())
    if abs(lam - lam_l) > 10 * tol * max(1.0, lam):
        logger.warning(f"⚠️ 좌/우 반복의 λ 불일치: {lam:.10g} vs {lam_l:.10g}")
    if cross_check and n > 2:
        ref = eigs(matrix, k=1, which="LM", return_eigenvectors=False)
        logger.debug(f"ARPACK 교차 확인: |λ| = {abs(ref[0]):.10g} (거듭제곱 {lam:.10g})")
    return LeadingTriple(
        lam=lam, nu=nu, nu_tilde=nu_tilde, left=left / left.sum(),
        iterations=max(it_r, it_l), residual=residual, plain_gap=plain_gap,
    )


@dataclass
class SecondEigenvalue:
    modulus: float
    gap_ratio: float
    deflation_residual: float
    reliable: bool = True


def second_eigenvalue(
    op: Operator, triple: LeadingTriple, max_iters: int = 2000, window: int = 20, seed: int = 0,
) -> SecondEigenvalue:
    """수축 연산자 L − λ·ν⊗ℓ/⟨ℓ,ν⟩ 의 거듭제곱 반복으로 |λ₂|/λ"""
    matrix, _, _ = _unpack(op)
    nu, left, lam = triple.nu, triple.left, triple.lam
    denom = float(left @ nu)
    rng = make_rng(seed, "deflation", matrix.shape[0])

    def project(v):
        return v - nu * (left @ v) / denom

    v = project(rng.standard_normal(matrix.shape[0]))
    if np.linalg.norm(v) == 0:
        return SecondEigenvalue(0.0, 0.0, 0.0)
    v = v / np.linalg.norm(v)
    log_norms = [0.0]
    total = 0.0
    for _ in range(max_iters):
        w = project(matrix @ v)
        norm = np.linalg.norm(w)
        if norm < 1e-300:
            return SecondEigenvalue(0.0, 0.0, 0.0)
        total += np.log(norm)
        log_norms.append(total)
        v = w / norm
    m = min(window, len(log_norms) - 1)
    modulus = float(np.exp((log_norms[-1] - log_norms[-1 - m]) / m))
    deflation_residual = float(abs(left @ v) / (np.linalg.norm(left) + 1e-300))
    reliable = deflation_residual < 1e-6 and modulus < lam
    if not reliable:
        logger.warning(f"⚠️ 스펙트럼 간격 신뢰 불가 (수축 잔차 {deflation_residual:.3g})")
    return SecondEigenvalue(
        modulus=modulus, gap_ratio=float(min(modulus / lam, 1.0)),
        deflation_residual=deflation_residual, reliable=reliable,
    )


@dataclass
class EquilibriumMeasure:
    t: float
    lam: float
    nu: np.ndarray = field(repr=False)
    nu_tilde: np.ndarray = field(repr=False)
    mu_cells: np.ndarray = field(repr=False)
    gap: float = float("nan")
    invariance_residual: float = float("nan")
    grid: Optional[UlamGrid] = field(default=None, repr=False)
    cell_log_js: Optional[np.ndarray] = field(default=None, repr=False)  # 셀별 μ_t 가중 평균 log JˢT

    @property
    def log_lambda(self) -> float:
        return float(np.log(self.lam))

    @property
    def min_density(self) -> float:
        """min μ_t(셀)/μ_SRB(셀) (완전 지지 확인)"""
        return float(np.min(self.mu_cells / self.grid.reference_mass)) if self.grid else float("nan")

    def integrate_cells(self, values: np.ndarray) -> float:
        return float(np.sum(self.mu_cells * values))


def invariance_residual(op: UlamOperator, mu_cells: np.ndarray) -> float:
    """‖T_*μ − μ‖_TV: 저장된 샘플 쌍 (x ∈ 셀 i, T⁻¹x ∈ 셀 j) 로 한 스텝 밀고 다시 셀에 모음"""
    srb = op.reweight(1.0).matrix
    mass = op.reference_mass
    pushed = mass * (srb @ (mu_cells / mass))
    return float(0.5 * np.abs(pushed - mu_cells).sum())


def cell_log_jacobians(op: UlamOperator, nu: np.ndarray) -> np.ndarray:
    """셀 i 안의 샘플 x 에 대해 log JˢT(T⁻¹x) 를 |JˢT|^{t−1}·ν(T⁻¹x) 로 가중 평균

    Σ_i μ_t(i)·값_i 가 이산 연산자의 d log λ/dt 와 정확히 같다.
    채택 샘플이 없는 셀은 0.
    """
    w = np.exp((op.t - 1.0) * op.log_js) * nu[op.cols]
    num = np.bincount(op.rows, weights=w * op.log_js, minlength=op.size)
    den = np.bincount(op.rows, weights=w, minlength=op.size)
    out = np.zeros(op.size)
    np.divide(num, den, out=out, where=den > 0)
    return out


def equilibrium_measure(
    op: Operator, triple: LeadingTriple, gap: Optional[SecondEigenvalue] = None,
) -> EquilibriumMeasure:
    matrix, mass, t = _unpack(op)
    weights = triple.nu * triple.nu_tilde * mass
    mu = weights / weights.sum()
    ulam = isinstance(op, UlamOperator)
    return EquilibriumMeasure(
        t=float(t) if t is not None else float("nan"), lam=triple.lam, nu=triple.nu,
        nu_tilde=triple.nu_tilde, mu_cells=mu, gap=gap.gap_ratio if gap else float("nan"),
        invariance_residual=invariance_residual(op, mu) if ulam else float("nan"),
        grid=op.grid if ulam else None,
        cell_log_js=cell_log_jacobians(op, triple.nu) if ulam else None,
    )
