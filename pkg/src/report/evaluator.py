"""수치 판정 모듈

각 suite 결과(dict)에서 pass/fail 판정을 만든다. 판정 실패는 종료 코드 1 로 이어진다.
"""
import logging
import math
from typing import Dict, List, Optional

import numpy as np

logger = logging.getLogger("billiard_thermo")

PRESSURE_AT_ONE_TOL = 0.05
GAP_CEILING = 0.98
DERIVATIVE_REL_TOL = 0.05
PESIN_REL_TOL = 0.05
INVARIANCE_TOL = 0.05


def _finite(x) -> bool:
    return x is not None and isinstance(x, (int, float)) and math.isfinite(x)


class Evaluator:
    """suite 별 판정 (P̂_*(1), 단조성/볼록성, 스펙트럼 간격, Pesin 잔차 등)"""

    @staticmethod
    def pressure_at_one(value: float, tol: float = PRESSURE_AT_ONE_TOL) -> bool:
        """|P̂(1)| ≤ tol"""
        return _finite(value) and abs(value) <= tol

    @staticmethod
    def decreasing(t: List[float], values: List[float], spreads: Optional[List[float]] = None,
                   Lambda: Optional[float] = None) -> bool:
        """값(t+Δ) ≤ 값(t) − Δ·log Λ + spread (Lambda 없으면 단순 감소)"""
        t, values = np.asarray(t, dtype=float), np.asarray(values, dtype=float)
        spreads = np.zeros_like(values) if spreads is None else np.asarray(spreads, dtype=float)
        slack = spreads[1:] + spreads[:-1]
        drop = np.diff(t) * math.log(Lambda) if Lambda else 0.0
        return bool(np.all(np.diff(values) <= -drop + slack + 1e-12))

    @staticmethod
    def convex(values: List[float], spreads: Optional[List[float]] = None) -> bool:
        """균일 격자 위 2차 차분 ≥ −spread"""
        values = np.asarray(values, dtype=float)
        if len(values) < 3:
            return True
        spreads = np.zeros_like(values) if spreads is None else np.asarray(spreads, dtype=float)
        second = values[2:] - 2 * values[1:-1] + values[:-2]
        return bool(np.all(second >= -(spreads[2:] + 2 * spreads[1:-1] + spreads[:-2]) - 1e-12))

    @staticmethod
    def non_increasing(values: List[float], errors: Optional[List[float]] = None) -> bool:
        values = np.asarray(values, dtype=float)
        errors = np.zeros_like(values) if errors is None else np.nan_to_num(np.asarray(errors, dtype=float))
        return bool(np.all(np.diff(values) <= 3 * (errors[1:] + errors[:-1]) + 1e-12))

    @staticmethod
    def relative_match(a: float, b: float, tol: float) -> bool:
        return _finite(a) and _finite(b) and abs(a - b) <= tol * max(abs(b), 1e-12)

    @staticmethod
    def evaluate_geometry(result: Dict) -> Dict[str, bool]:
        validation = result.get("validation", {})
        verdicts = {
            "lambda_above_one": validation.get("Lambda", 0.0) > 1.0,
            "identity_residuals": result.get("identities", {}).get("passed", True),
        }
        cones = result.get("cones")
        if cones:
            verdicts["cone_invariance"] = cones["unstable_violations"] == 0 and cones["stable_violations"] == 0
        expansion = result.get("adapted_expansion", [])
        if expansion:
            verdicts["adapted_expansion"] = all(
                row["min_log_ratio"] >= row["bound"] - 1e-9 for row in expansion if _finite(row["min_log_ratio"])
            )
        return verdicts

    @staticmethod
    def evaluate_complexity(result: Dict) -> Dict[str, bool]:
        curve = result.get("pressure_curve", {})
        t, P, spread = curve.get("t", []), curve.get("P", []), curve.get("spread", [])
        verdicts = {
            "decreasing": Evaluator.decreasing(t, P, spread, result.get("Lambda")),
            "convex": Evaluator.convex(P, spread),
        }
        if "P_at_one" in result:
            verdicts["pressure_at_one"] = Evaluator.pressure_at_one(result["P_at_one"])
        t_star = result.get("t_star") or {}
        if _finite(t_star.get("t_star")):
            verdicts["t_star_exceeds_one"] = t_star["t_star"] > 1.0
        one_step = result.get("one_step") or {}
        if "passed" in one_step:
            verdicts["one_step_bound"] = bool(one_step["passed"])
        recurrence = result.get("sparse_recurrence") or {}
        if recurrence.get("verdict") is not None:
            verdicts["sparse_recurrence"] = bool(recurrence["verdict"])
        return verdicts

    @staticmethod
    def evaluate_spectrum(result: Dict) -> Dict[str, bool]:
        rows = result.get("points", [])
        t = [r["t"] for r in rows]
        logs = [r["log_lambda"] for r in rows]
        spreads = [r.get("spread", 0.0) for r in rows]
        verdicts = {
            "decreasing": Evaluator.decreasing(t, logs, spreads),
            "convex": Evaluator.convex(logs, spreads),
            "gap_below_ceiling": all(r.get("gap", 0.0) < GAP_CEILING for r in rows if _finite(r.get("gap"))),
            "invariance": all(r.get("invariance_residual", 0.0) <= INVARIANCE_TOL
                              for r in rows if _finite(r.get("invariance_residual"))),
        }
        at_one = [r for r in rows if abs(r["t"] - 1.0) < 1e-12]
        if at_one:
            verdicts["pressure_at_one"] = Evaluator.pressure_at_one(at_one[0]["log_lambda"])
        fd = result.get("finite_difference", [])
        if fd:
            verdicts["derivative_match"] = all(
                Evaluator.relative_match(row["P1"], row["central_difference"], DERIVATIVE_REL_TOL) for row in fd
            )
        if rows and all("P2" in r for r in rows):
            verdicts["P2_nonnegative"] = all(r["P2"] >= -3 * np.nan_to_num(r.get("P2_error", 0.0)) for r in rows)
        agreement = result.get("agreement", [])
        if agreement:
            verdicts["complexity_agreement"] = all(a["within"] for a in agreement)
        return verdicts

    @staticmethod
    def evaluate_statistics(result: Dict) -> Dict[str, bool]:
        verdicts = {}
        entropy = result.get("entropy", [])
        if entropy:
            ordered = sorted(entropy, key=lambda e: e["t"])
            verdicts["entropy_non_increasing"] = Evaluator.non_increasing(
                [e["entropy"] for e in ordered], [e["entropy_error"] for e in ordered])
            verdicts["lyapunov_non_increasing"] = Evaluator.non_increasing(
                [e["lyapunov"] for e in ordered], [e["entropy_error"] for e in ordered])
            pesin = [e["pesin_residual"] for e in entropy if _finite(e.get("pesin_residual"))]
            if pesin:
                verdicts["pesin"] = all(p <= PESIN_REL_TOL for p in pesin)
        if "adaptedness" in result:
            verdicts["adapted"] = bool(result["adaptedness"]["decaying"])
        if "neighborhood" in result:
            verdicts["neighborhood_slope"] = bool(result["neighborhood"]["consistent"])
        if "bowen" in result:
            verdicts["bowen_bound"] = result["bowen"]["violation_rate"] == 0.0
        if "clt" in result and not result["clt"].get("skipped"):
            verdicts["clt"] = bool(result["clt"]["passed"])
        if "bowen_off_srb" in result:
            verdicts["bowen_bound_off_srb"] = result["bowen_off_srb"]["violation_rate"] == 0.0
        if "clt_off_srb" in result and not result["clt_off_srb"].get("skipped"):
            verdicts["clt_off_srb"] = bool(result["clt_off_srb"]["passed"])
        return verdicts

    @staticmethod
    def evaluate_all(results: Dict[str, Dict]) -> Dict[str, Dict[str, bool]]:
        """suite 이름 → 판정 dict"""
        handlers = {
            "geometry": Evaluator.evaluate_geometry,
            "complexity": Evaluator.evaluate_complexity,
            "spectrum": Evaluator.evaluate_spectrum,
            "statistics": Evaluator.evaluate_statistics,
        }
        return {name: handlers[name](res) for name, res in results.items() if name in handlers and res}

    @staticmethod
    def all_passed(verdicts: Dict[str, Dict[str, bool]]) -> bool:
        return all(all(v.values()) for v in verdicts.values())

    @staticmethod
    def print_report(verdicts: Dict[str, Dict[str, bool]]):
        """판정 리포트 출력"""
        logger.info("=" * 50)
        logger.info("📊 판정 리포트")
        logger.info("=" * 50)
        for suite, checks in verdicts.items():
            for name, ok in checks.items():
                logger.info(f"  [{suite}] {name:<28} {'✅' if ok else '❌'}")
        logger.info("=" * 50)
