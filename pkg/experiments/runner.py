"""실험 실행 엔진

suite 를 차례로 실행한다 (geometry → complexity → spectrum → statistics).
각 suite 는 독립적으로 실패할 수 있고, 실패는 manifest 에 표시한 뒤 다음 suite 로 넘어간다.
"""
import hashlib
import json
import logging
import os
import shutil
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.complexity.curves import (
    K0_SEARCH_MAX, StableCurve, evolution_frame, one_step_violations, short_piece_fraction, smallest_k0,
)
from src.complexity.estimator import (
    choose_theta, estimate_h_star, estimate_Qn, estimate_t_star, growth_diagnostics, pressure_curve,
    sample_classes, sparse_recurrence_statistic,
)
from src.complexity.sampling import SamplingPlan, sample_srb
from src.dynamics.billiard_map import PhasePoint
from src.dynamics.hyperbolicity import (
    cone_invariance_check, empirical_c1, expansion_along_cone, fit_distortion_constant, trajectory_frame,
)
from src.dynamics.identities import identity_residuals
from src.geometry.table import DEFAULT_HORIZON_BOUND, TableGeometry, load_table_config
from src.geometry.validation import validate_table
from src.report.evaluator import Evaluator
from src.report.recorder import CODE_VERSION, ResultRecorder
from src.singularity.curves import singularity_curves
from src.singularity.itinerary import itinerary_histogram
from src.spectrum.eigen import equilibrium_measure, leading_triple, second_eigenvalue
from src.spectrum.pressure import correlation, lambda_standard_error, pressure_derivatives
from src.spectrum.ulam import CACHE_VERSION, UlamOperator, assemble_ulam
from src.thermo.adaptedness import adaptedness_integral, neighborhood_scaling
from src.thermo.clt import affine_pressure_diagnostic, clt_check, observable_continuity
from src.thermo.entropy import bowen_ball_check, entropy_identities, local_entropy
from src.thermo.sampling import TRAJECTORY, birkhoff_histogram, phi_marginal_test, sample_measure
from src.utils.errors import BilliardThermoError, ConfigError
from src.utils.helpers import linspace_grid
from src.utils.parallel import set_thread_cap
from src.utils.rng import make_rng

logger = logging.getLogger("billiard_thermo")

SUITES = ("geometry", "complexity", "spectrum", "statistics")

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_CONFIG = 2
EXIT_INTERNAL = 3

# 희소 재귀 통계 (φ0, n0, 궤도 조각 수)
SPARSE_PHI0 = 1.4
SPARSE_N0 = 20
SPARSE_SEGMENTS = 10_000
# 한 스텝 확장 한계를 확인하는 t (첫 값 기준으로 최소 k0 를 찾는다)
ONE_STEP_T = (0.5, 1.0, 1.5)
# 짧은 조각 비율이 이 값 이하가 되는 첫 n 을 찾는다
SHORT_PIECE_TARGET = 0.25
SHORT_PIECE_MAX_N = 6

DEFAULT_STATISTICS = {
    "sample_count": 200_000,
    "curve_resolution": 2e-3,
    "epsilons": [0.01, 0.02, 0.05, 0.1, 0.2, 0.5],
    "bowen_trials": 200,
    "bowen_n": 8,
    "bowen_epsilon": 0.05,
    "bowen_sample_count": 400_000,
    "n_block": 400,
    "m_samples": 5_000,
    "local_entropy_n": 6,
}


def cache_key(inputs: Dict[str, Any]) -> str:
    """입력 내용 해시 (코드 버전 포함). 같은 입력이면 같은 키"""
    payload = json.dumps({"inputs": inputs, "code_version": CODE_VERSION}, sort_keys=True, default=repr)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _require(data: Dict, key: str):
    if key not in data or data[key] is None:
        raise ConfigError(key, "필수 항목 누락")
    return data[key]


@dataclass
class ExperimentConfig:
    seed: int
    table: str = "config/default_table.json"
    horizon_bound: float = DEFAULT_HORIZON_BOUND
    t_grid: List[float] = field(default_factory=lambda: linspace_grid(0.6, 1.4, 9))
    n_max: int = 8
    grid_ladder: List[Tuple[int, int]] = field(default_factory=lambda: [(16, 16), (32, 32)])
    samples_per_cell: int = 64
    output_dir: str = "./results"
    suites: List[str] = field(default_factory=lambda: list(SUITES))
    threads: int = 1
    direction_samples: int = 1000
    grid_r: int = 160
    grid_phi: int = 160
    tangent_samples: int = 4000
    K_trunc: int = 40
    derivative_samples: int = 20_000
    derivative_t: List[float] = field(default_factory=lambda: [0.9, 1.0, 1.1])
    fd_step: float = 0.05
    agreement_t: List[float] = field(default_factory=lambda: [0.8, 1.2])
    statistics: Dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_STATISTICS))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """검증 후 생성. 잘못된 항목은 ConfigError(field)"""
        data = dict(data or {})
        data.pop("logging", None)
        nested = data.pop("experiment", None) or {}
        data = {**nested, **data}
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(unknown[0], "알 수 없는 설정 항목")

        seed = _require(data, "seed")
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
            raise ConfigError("seed", f"0 이상 2^64 미만 정수여야 함 (받은 값 {seed!r})")

        kwargs = {k: v for k, v in data.items() if k in known}
        cfg = cls(**kwargs)

        if isinstance(cfg.suites, str):
            cfg.suites = list(SUITES) if cfg.suites == "all" else [cfg.suites]
        cfg.suites = list(SUITES) if "all" in cfg.suites else list(cfg.suites)
        for s in cfg.suites:
            if s not in SUITES:
                raise ConfigError("suites", f"알 수 없는 suite: {s}")
        try:
            cfg.t_grid = sorted(float(t) for t in cfg.t_grid)
        except (TypeError, ValueError):
            raise ConfigError("t_grid", "실수 목록이어야 함")
        if not cfg.t_grid or cfg.t_grid[0] <= 0:
            raise ConfigError("t_grid", "비어 있지 않고 모든 t > 0 이어야 함")
        if not isinstance(cfg.n_max, int) or cfg.n_max < 4:
            raise ConfigError("n_max", f"≥ 4 인 정수여야 함 (받은 값 {cfg.n_max!r})")
        try:
            cfg.grid_ladder = [(int(a), int(b)) for a, b in cfg.grid_ladder]
        except (TypeError, ValueError):
            raise ConfigError("grid_ladder", "[n_r, n_s] 쌍의 목록이어야 함")
        if len(cfg.grid_ladder) < 2 or any(a < 1 or b < 1 for a, b in cfg.grid_ladder):
            raise ConfigError("grid_ladder", "양의 격자 2단계 이상 필요")
        if not isinstance(cfg.samples_per_cell, int) or cfg.samples_per_cell < 16:
            raise ConfigError("samples_per_cell", f"≥ 16 필요 (받은 값 {cfg.samples_per_cell!r})")
        if not isinstance(cfg.threads, int) or cfg.threads < 1:
            raise ConfigError("threads", "≥ 1 정수여야 함")
        if cfg.K_trunc < 10:
            raise ConfigError("K_trunc", "≥ 10 필요")
        if cfg.direction_samples < 1000:
            raise ConfigError("direction_samples", "≥ 1000 필요")
        stats = dict(DEFAULT_STATISTICS)
        stats.update(cfg.statistics or {})
        cfg.statistics = stats
        return cfg

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["grid_ladder"] = [list(g) for g in self.grid_ladder]
        return out


class ExperimentRunner:
    """설정에 따라 suite 를 실행하고 아티팩트를 남긴다"""

    def __init__(self, config: ExperimentConfig, table: Optional[TableGeometry] = None):
        self.config = config
        self.table = table or load_table_config(config.table, horizon_bound=config.horizon_bound)
        self.recorder = ResultRecorder(config.output_dir)
        self.results: Dict[str, Dict] = {}
        self.seeds: Dict[str, Any] = {"root": config.seed}
        self._operators: Dict[Tuple[int, int], UlamOperator] = {}
        self._measures: Dict[float, Dict[str, Any]] = {}
        self._curve = None
        set_thread_cap(config.threads)

    def run(self) -> int:
        """suite 실행. 반환값은 종료 코드"""
        cfg = self.config
        logger.info(f"🚀 실험 시작: suites={cfg.suites}, seed={cfg.seed}, 산란체 {self.table.n_scatterers}개")
        exit_code = EXIT_OK
        handlers = {
            "geometry": self._run_geometry,
            "complexity": self._run_complexity,
            "spectrum": self._run_spectrum,
            "statistics": self._run_statistics,
        }
        for suite in SUITES:
            if suite not in cfg.suites:
                continue
            logger.info(f"\n{'=' * 60}")
            logger.info(f"📐 {suite} suite 실행 중...")
            logger.info(f"{'=' * 60}")
            started = time.perf_counter()
            try:
                result = handlers[suite]()
                self.results[suite] = result
                verdicts = Evaluator.evaluate_all({suite: result}).get(suite, {})
                passed = all(verdicts.values())
                self.recorder.record_suite(suite, "ok" if passed else "failed",
                                           time.perf_counter() - started, verdicts=verdicts)
                if not passed and exit_code == EXIT_OK:
                    exit_code = EXIT_VERDICT
            except ConfigError as e:
                logger.error(f"[{suite}] 설정 오류: {e}")
                self.recorder.record_suite(suite, "error", time.perf_counter() - started, error=str(e))
                exit_code = EXIT_CONFIG
            except Exception as e:
                logger.error(f"[{suite}] 실행 실패: {e}")
                self.recorder.record_suite(suite, "error", time.perf_counter() - started, error=repr(e))
                if exit_code in (EXIT_OK, EXIT_VERDICT):
                    exit_code = EXIT_INTERNAL
                continue

        verdicts = Evaluator.evaluate_all(self.results)
        if verdicts:
            Evaluator.print_report(verdicts)
        self.recorder.write_manifest(self.config.to_dict(), self.seeds, exit_code)
        logger.info(f"✅ 실험 종료 (exit {exit_code})")
        return exit_code

    # ── geometry ───────────────────────────

    def _run_geometry(self) -> Dict:
        cfg = self.config
        report = validate_table(self.table, cfg.direction_samples, cfg.horizon_bound)
        identities = identity_residuals(self.table, 10_000, cfg.seed)
        rng = make_rng(cfg.seed, "cones")
        ids, r, phi = sample_srb(self.table, 10_000, rng)
        cones = cone_invariance_check(self.table, ids, r, phi)
        expansion = []
        for n in range(1, 11):
            ratios = []
            for edge in self.table.unstable_slope_range:
                log_ratio, valid = expansion_along_cone(
                    self.table, ids[:2000], r[:2000], phi[:2000], n, np.full(2000, edge), adapted=True)
                ratios.append(log_ratio[valid])
            ok = np.concatenate(ratios)
            expansion.append({"n": n, "min_log_ratio": float(ok.min()) if ok.size else float("nan"),
                              "bound": n * float(np.log(self.table.Lambda))})
        c1 = {n: empirical_c1(self.table, ids[:2000], r[:2000], phi[:2000], n, rng) for n in (1, 5, 10)}
        start = PhasePoint(int(ids[0]), float(r[0]), float(phi[0]))
        self.recorder.save_frame("trajectory.csv", trajectory_frame(self.table, start, 200), diagnostics=True)
        result = {
            "validation": report.to_dict(),
            "identities": identities,
            "cones": cones,
            "adapted_expansion": expansion,
            "empirical_c1": c1,
        }
        self.seeds["geometry"] = cfg.seed
        self.recorder.save_json("validation_report.json", result)
        return result

    # ── complexity ─────────────────────────

    def _sampling_plan(self) -> SamplingPlan:
        cfg = self.config
        return SamplingPlan(grid_r=cfg.grid_r, grid_phi=cfg.grid_phi, tangent_samples=cfg.tangent_samples,
                            seed=cfg.seed)

    def _run_complexity(self) -> Dict:
        cfg = self.config
        plan = self._sampling_plan()
        classes = sample_classes(self.table, cfg.n_max, plan)
        curve = pressure_curve(self.table, cfg.t_grid, cfg.n_max, classes=classes)
        self._curve = curve
        self.recorder.save_frame("pressure_curve.csv", curve.to_frame())
        t_star = estimate_t_star(curve, self.table.Lambda)
        if cfg.t_grid[-1] >= t_star.t_star:
            logger.warning(f"⚠️ t 격자 상한 {cfg.t_grid[-1]} ≥ t̂_* = {t_star.t_star:.3f}")
        h_star = estimate_h_star(self.table, cfg.n_max, plan)
        refinement = self._refinement_check(plan, classes)
        one_step = self._one_step_checks()
        distortion = self._distortion(cfg.n_max)
        inflated = pressure_curve(self.table, cfg.t_grid, cfg.n_max, classes=classes,
                                  distortion_c=distortion["C_d"]) if np.isfinite(distortion["C_d"]) else None
        recurrence = sparse_recurrence_statistic(
            self.table, SPARSE_PHI0, SPARSE_N0, SPARSE_SEGMENTS, seed=cfg.seed, h_star=h_star.h_star)
        self.recorder.save_json("itineraries.json", itinerary_histogram(classes.codes[cfg.n_max], cfg.n_max),
                                diagnostics=True)
        result = {
            "Lambda": self.table.Lambda,
            "theta": choose_theta(self.table.Lambda),
            "pressure_curve": {"t": curve.t.tolist(), "P": curve.values.tolist(), "spread": curve.spreads.tolist()},
            "growth": [dict(t=p.t, **growth_diagnostics(p)) for p in curve.points],
            "t_star": asdict(t_star),
            "h_star": asdict(h_star),
            "one_step": one_step,
            "refinement": refinement,
            "short_pieces": self._short_pieces(),
            "distortion": distortion,
            "sparse_recurrence": asdict(recurrence),
        }
        if inflated is not None:
            result["pressure_curve_inflated"] = {"t": inflated.t.tolist(), "P": inflated.values.tolist()}
        if any(abs(t - 1.0) < 1e-12 for t in cfg.t_grid):
            result["P_at_one"] = curve.at(1.0).estimate
        self.seeds["complexity"] = plan.meta()
        self.recorder.save_json("complexity_report.json", result)
        return result

    def _one_step_checks(self, curves: int = 100) -> Dict:
        """|W| = δ₀/2 안정 곡선에서 t 별 Σ|J_{V_i}T|^t_* < θ^t 위반 수와, t=0.5 를 통과시키는 최소 k0"""
        cfg = self.config
        rng = make_rng(cfg.seed, "one-step")
        theta = choose_theta(self.table.Lambda)
        ids, r, phi = sample_srb(self.table, curves * 2, rng)
        segments = []
        for i in range(len(ids)):
            if len(segments) >= curves:
                break
            x = PhasePoint(int(ids[i]), float(r[i]), float(phi[i]))
            try:
                segments.append(StableCurve.segment(self.table, x, 0.5 * self.table.delta0))
            except BilliardThermoError:
                continue
        per_t = []
        for t in ONE_STEP_T:
            violations, worst = one_step_violations(self.table, segments, t, theta)
            per_t.append({"t": t, "violations": violations, "worst_ratio": worst})
        k0_required = smallest_k0(self.table, segments, ONE_STEP_T[0], theta)
        if k0_required is None:
            logger.warning(f"⚠️ k0 ≤ {K0_SEARCH_MAX} 에서 t={ONE_STEP_T[0]} 한 스텝 한계를 만족하지 못함")
        elif k0_required > self.table.k0:
            logger.info(f"한 스텝 한계: t={ONE_STEP_T[0]} 은 k0={k0_required} 필요 (설정 k0={self.table.k0})")
        return {
            "curves": len(segments), "theta": theta, "k0": self.table.k0, "per_t": per_t,
            "violations": sum(row["violations"] for row in per_t),
            "k0_required": k0_required,
            "passed": bool(k0_required is not None
                           and all(row["violations"] == 0 for row in per_t if row["t"] >= 1.0)),
        }

    def _refinement_check(self, plan: SamplingPlan, classes, n: int = 4) -> Dict:
        """격자를 두 배로 세분화해 Q̂_n(1) 과 클래스 수 변화 기록"""
        fine_plan = plan.refined()
        fine = sample_classes(self.table, n, fine_plan)
        coarse_q = estimate_Qn(self.table, 1.0, n, classes=classes)
        fine_q = estimate_Qn(self.table, 1.0, n, classes=fine)
        return {
            "n": n,
            "refinement_passes": fine_plan.refinement_passes,
            "log_Q": coarse_q.log_value,
            "log_Q_refined": fine_q.log_value,
            "classes": coarse_q.class_count,
            "classes_refined": fine_q.class_count,
        }

    def _distortion(self, n_max: int, points: int = 8) -> Dict:
        """몇 개 SRB 점에서 C_d 피팅. 최댓값을 왜곡 보정 상수로 쓴다"""
        rng = make_rng(self.config.seed, "distortion")
        ids, r, phi = sample_srb(self.table, points * 4, rng)
        n = min(n_max, 4)
        fits = []
        for i in range(len(ids)):
            if len(fits) >= points:
                break
            try:
                fits.append(fit_distortion_constant(self.table, PhasePoint(int(ids[i]), float(r[i]), float(phi[i])), n))
            except BilliardThermoError:
                continue
        finite = [f["C_d"] for f in fits if np.isfinite(f["C_d"])]
        return {
            "n": n,
            "points": len(fits),
            "C_d": float(max(finite)) if finite else float("nan"),
            "C_d_fine": float(max((f["C_d_fine"] for f in fits if np.isfinite(f["C_d_fine"])), default=float("nan"))),
        }

    def _short_pieces(self) -> Dict:
        """δ₁ = δ₀ 에서 짧은 조각 가중치 비율이 1/4 이하가 되는 n"""
        rng = make_rng(self.config.seed, "short-pieces")
        ids, r, phi = sample_srb(self.table, 50, rng)
        delta1 = self.table.delta0
        W = None
        for i in range(len(ids)):
            try:
                W = StableCurve.segment(self.table, PhasePoint(int(ids[i]), float(r[i]), float(phi[i])), 0.5 * delta1)
                break
            except BilliardThermoError:
                continue
        if W is None:
            logger.warning("⚠️ 짧은 조각 검사용 안정 곡선을 만들지 못함")
            return {"delta1": delta1, "found": {}}
        self.recorder.save_frame("evolution.csv", evolution_frame(self.table, W, 3, delta1), diagnostics=True)
        found, fractions = {}, []
        for t in (0.5, 1.0):
            found[str(t)] = None
            for n in range(1, SHORT_PIECE_MAX_N + 1):
                ratio = short_piece_fraction(self.table, W, n, delta1, t)
                fractions.append({"t": t, "n": n, "fraction": ratio})
                if ratio <= SHORT_PIECE_TARGET:
                    found[str(t)] = n
                    break
        return {"delta1": delta1, "found": found, "fractions": fractions}

    # ── spectrum ───────────────────────────

    def _operator(self, spec: Tuple[int, int]) -> UlamOperator:
        """t=1 샘플 집합 (다른 t 는 reweight). 캐시 키가 같으면 재사용"""
        if spec in self._operators:
            return self._operators[spec]
        cfg = self.config
        key = cache_key({
            "kind": "ulam", "table": self.table.to_dict(), "horizon_bound": self.table.horizon_bound,
            "grid": list(spec), "samples_per_cell": cfg.samples_per_cell, "seed": cfg.seed,
            "format": CACHE_VERSION,
        })
        path = os.path.join(self.recorder.cache_dir, f"ulam_{key[:20]}.npz")
        op = None
        if os.path.exists(path):
            try:
                op = UlamOperator.load(path)
                logger.info(f"♻️ 연산자 캐시 사용: {path}")
            except (BilliardThermoError, OSError, KeyError, ValueError) as e:
                logger.warning(f"⚠️ 캐시 불일치, 다시 계산: {e}")
                op = None
        if op is None:
            op = assemble_ulam(self.table, 1.0, spec, cfg.samples_per_cell, cfg.seed)
            op.save(path)
        self._operators[spec] = op
        return op

    def _spectral_point(self, t: float) -> Dict[str, Any]:
        """가장 고운 격자에서 t 의 고유 삼중쌍, 측도, 도함수"""
        if t in self._measures:
            return self._measures[t]
        cfg = self.config
        fine = self._operator(cfg.grid_ladder[-1]).reweight(t)
        triple = leading_triple(fine)
        gap = second_eigenvalue(fine, triple, seed=cfg.seed)
        measure = equilibrium_measure(fine, triple, gap)
        derivatives = pressure_derivatives(self.table, t, measure, cfg.K_trunc, cfg.derivative_samples, cfg.seed)
        coarse = leading_triple(self._operator(cfg.grid_ladder[-2]).reweight(t)).log_lambda
        se = lambda_standard_error(fine)
        trend = triple.log_lambda - coarse
        point = {
            "op": fine, "triple": triple, "gap": gap, "measure": measure, "derivatives": derivatives,
            "row": {
                "t": float(t), "lambda": triple.lam, "log_lambda": triple.log_lambda,
                "log_lambda_coarse": coarse, "trend": trend, "standard_error": se,
                "spread": abs(trend) + 3.0 * (se if np.isfinite(se) else 0.0),
                "gap": gap.gap_ratio, "gap_reliable": gap.reliable, "residual": triple.residual,
                "invariance_residual": measure.invariance_residual, "min_density": measure.min_density,
                "flagged_cells": int(fine.flagged_cells.size),
                "P1": derivatives.P1, "P1_error": derivatives.P1_error,
                "P2": derivatives.P2, "P2_error": derivatives.P2_error, "P2_one_sided": derivatives.P2_one_sided,
                "P2_tail_bound": derivatives.tail_bound, "heavy_tail": derivatives.heavy_tail,
            },
        }
        self._measures[t] = point
        return point

    def _run_spectrum(self) -> Dict:
        cfg = self.config
        rows = [self._spectral_point(t)["row"] for t in cfg.t_grid]
        fine = self._operator(cfg.grid_ladder[-1])

        finite_difference = []
        for t in cfg.derivative_t:
            h = cfg.fd_step
            up = leading_triple(fine.reweight(t + h)).log_lambda
            down = leading_triple(fine.reweight(t - h)).log_lambda
            P1 = self._spectral_point(t)["derivatives"].P1
            finite_difference.append({"t": t, "P1": P1, "central_difference": (up - down) / (2 * h)})

        agreement = []
        if self._curve is not None:
            for t in cfg.agreement_t:
                if not any(abs(t - s) < 1e-12 for s in self._curve.t):
                    continue
                point = self._curve.at(t)
                row = self._spectral_point(t)["row"]
                diff = abs(row["log_lambda"] - point.estimate)
                agreement.append({"t": t, "log_lambda": row["log_lambda"], "P_star": point.estimate,
                                  "difference": diff, "within": bool(diff <= row["spread"] + point.spread)})

        decay = self._correlation_decay()
        result = {
            "grid_ladder": [list(g) for g in cfg.grid_ladder],
            "samples_per_cell": cfg.samples_per_cell,
            "points": rows,
            "finite_difference": finite_difference,
            "agreement": agreement,
            "correlation": decay,
        }
        self.seeds["spectrum"] = cfg.seed
        self.recorder.save_json("spectrum_report.json", result)
        self.recorder.save_frame("spectrum_points.csv", pd.DataFrame(rows))
        return result

    def _correlation_decay(self) -> Dict:
        """t=1, f = h = 잘라낸 log JˢT 근사(log cos φ) 의 상관 감쇠율 vs υ̂₀"""
        point = self._spectral_point(1.0)

        def clipped(ids, r, phi):
            return np.clip(np.log(np.cos(phi)), -6.0, 0.0)

        curve = correlation(self.table, point["measure"], clipped, clipped, 12,
                            self.config.derivative_samples, self.config.seed)
        gap = point["gap"].gap_ratio
        return {
            "values": curve.values.tolist(), "errors": curve.errors.tolist(),
            "rate": curve.rate, "fit_ok": curve.fit_ok, "gap": gap,
            "discrepancy": float(curve.rate - gap) if curve.fit_ok else float("nan"),
        }

    # ── statistics ─────────────────────────

    def _off_srb_t(self) -> Optional[float]:
        """t=1 이외에 Bowen ball 과 CLT 를 다시 돌릴 격자 점: 거부 셀이 없는 것 중 1 에서 가장 먼 t"""
        candidates = [t for t in self.config.t_grid
                      if abs(t - 1.0) > 1e-12 and self._spectral_point(t)["row"]["flagged_cells"] == 0]
        return max(candidates, key=lambda t: abs(t - 1.0)) if candidates else None

    def _run_statistics(self) -> Dict:
        cfg = self.config
        st = cfg.statistics
        table = self.table
        one = self._spectral_point(1.0)
        measure1 = one["measure"]
        sample = sample_measure(measure1, st["sample_count"], cfg.seed)

        # 두 경로로 얻은 μ₁ 비교
        _, srb_phi = birkhoff_histogram(table, measure1.grid, seed=cfg.seed)
        trajectory_sample = sample_measure(measure1, min(st["sample_count"], 50_000), cfg.seed, TRAJECTORY, table)
        routes = {
            "ulam_vs_birkhoff": phi_marginal_test(sample, srb_phi),
            "trajectory_vs_birkhoff": phi_marginal_test(trajectory_sample, srb_phi),
        }

        resolution = st["curve_resolution"]
        s_plus = singularity_curves(table, 1, resolution)
        s_minus = singularity_curves(table, -1, resolution)
        s_zero = singularity_curves(table, 0, resolution)
        s_plus.save_csv(self.recorder.path("singularity_S1.csv", diagnostics=True))
        s_minus.save_csv(self.recorder.path("singularity_S-1.csv", diagnostics=True))
        adapted = adaptedness_integral(table, sample, [s_plus, s_minus])
        self.recorder.save_frame("adaptedness_shells.csv", adapted.shells, diagnostics=True)
        scaling = neighborhood_scaling(table, sample, s_zero, st["epsilons"])

        h_star = self.results.get("complexity", {}).get("h_star", {})
        entropy, measures = [], []
        for t in cfg.t_grid:
            point = self._spectral_point(t)
            measures.append(point["measure"])
            rep = entropy_identities(table, t, point["measure"], point["derivatives"],
                                     h_star.get("h_star"), h_star.get("spread", 0.0), seed=cfg.seed)
            entropy.append(rep.to_dict())

        bowen = bowen_ball_check(table, 1.0, measure1, st["bowen_trials"], st["bowen_n"], st["bowen_epsilon"],
                                 st["bowen_sample_count"], cfg.seed)
        clt = clt_check(table, 1.0, measure1, st["n_block"], st["m_samples"], one["derivatives"], cfg.seed)
        off_t = self._off_srb_t()
        if off_t is not None:
            off = self._spectral_point(off_t)
            bowen_off = bowen_ball_check(table, off_t, off["measure"], st["bowen_trials"], st["bowen_n"],
                                         st["bowen_epsilon"], st["bowen_sample_count"], cfg.seed)
            clt_off = clt_check(table, off_t, off["measure"], st["n_block"], st["m_samples"],
                                off["derivatives"], cfg.seed)
        local = local_entropy(table, measure1, st["local_entropy_n"], st["bowen_epsilon"], seed=cfg.seed)
        affine = [affine_pressure_diagnostic(a, b) for a, b in zip(measures[:-1], measures[1:])]

        def cos_phi(ids, r, phi):
            return np.cos(phi)

        continuity = observable_continuity(measures, cos_phi)
        trustworthy = [e["t"] for e, t in zip(entropy, cfg.t_grid)
                       if self._spectral_point(t)["row"]["flagged_cells"] == 0]
        result = {
            "routes": routes,
            "adaptedness": adapted.to_dict(),
            "neighborhood": scaling.to_dict(),
            "entropy": entropy,
            "bowen": asdict(bowen),
            "clt": clt.to_dict(),
            "local_entropy": local,
            "affine": affine,
            "continuity": continuity,
            "smallest_trustworthy_t": min(trustworthy) if trustworthy else None,
            "h_star_gap": (entropy[0]["entropy"] - h_star["h_star"]) if h_star else None,
        }
        if off_t is not None:
            result["bowen_off_srb"] = asdict(bowen_off)
            result["clt_off_srb"] = clt_off.to_dict()
        self.seeds["statistics"] = cfg.seed
        self.recorder.save_json("statistics_report.json", result)
        return result


def clean(config: ExperimentConfig) -> List[str]:
    """캐시와 진단 디렉토리 삭제"""
    removed = []
    for sub in ("cache", "diagnostics"):
        path = os.path.join(config.output_dir, sub)
        if os.path.isdir(path):
            shutil.rmtree(path)
            removed.append(path)
            logger.info(f"🧹 삭제: {path}")
    return removed
