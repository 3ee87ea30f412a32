"""복잡도 기반 압력 추정 테스트"""
import math
import os
import sys
from dataclasses import asdict, replace

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.complexity.curves import (
    StableCurve, evolution_frame, evolve_stable_curve, one_step_expansion_sum, one_step_violations,
    short_piece_fraction, smallest_k0,
)
from src.complexity.estimator import (
    PressureCurve, PressurePoint, choose_theta, estimate_h_star, estimate_pressure, estimate_Qn,
    estimate_t_star, growth_diagnostics, sample_classes, sparse_recurrence_statistic,
)
from src.complexity.sampling import SamplingPlan, sample_srb
from src.dynamics.billiard_map import PhasePoint
from src.report.evaluator import Evaluator
from src.utils.errors import BilliardThermoError, DomainError

SMALL_PLAN = SamplingPlan(grid_r=40, grid_phi=40, tangent_samples=0, seed=5)


def _point(t, p, spread=0.0, n_max=6):
    log_q = [p * n for n in range(1, n_max + 1)]
    return PressurePoint(t=t, P_inf=p, P_fit=p, P_last=p, spread=spread, n_max=n_max, log_Q=log_q, classes=1)


@pytest.fixture(scope="module")
def classes(finite_table):
    return sample_classes(finite_table, 4, SMALL_PLAN)


class TestTheta:
    def test_theta_between_bounds(self, finite_table):
        lam = finite_table.Lambda
        theta = choose_theta(lam)
        assert 1.0 / lam < theta < 1.0 / math.sqrt(lam)


class TestQn:
    """Q̂_n(t) 와 클래스 표본"""

    def test_plan_is_deterministic(self, finite_table):
        a = SMALL_PLAN.draw(finite_table)
        b = SMALL_PLAN.draw(finite_table)
        for x, y in zip(a, b):
            assert np.array_equal(x, y)

    def test_refined_plan(self):
        fine = SMALL_PLAN.refined()
        assert (fine.grid_r, fine.grid_phi) == (80, 80)
        assert fine.seed == SMALL_PLAN.seed
        assert fine.meta()["refinement_passes"] == 1

    def test_value_is_sum_of_class_sups(self, finite_table, classes):
        est = estimate_Qn(finite_table, 1.0, 3, classes=classes)
        assert est.class_count == est.class_log_sup.size
        assert est.value == pytest.approx(np.exp(est.class_log_sup).sum(), rel=1e-10)

    def test_refinement_adds_classes(self, finite_table, classes):
        counts = [estimate_Qn(finite_table, 1.0, n, classes=classes).class_count for n in range(1, 5)]
        assert all(b >= a for a, b in zip(counts, counts[1:]))

    def test_monotone_in_t_for_contracting_classes(self, finite_table, classes):
        # n = 4 에서는 모든 클래스의 sup log Jˢ 가 음수
        a = estimate_Qn(finite_table, 0.8, 4, classes=classes)
        b = estimate_Qn(finite_table, 1.2, 4, classes=classes)
        if np.all(a.class_log_sup < 0):
            assert b.log_value < a.log_value

    def test_invalid_arguments(self, finite_table, classes):
        with pytest.raises(DomainError):
            estimate_Qn(finite_table, 1.0, 0, classes=classes)
        with pytest.raises(DomainError):
            estimate_Qn(finite_table, 0.0, 2, classes=classes)

    def test_constant_potential_shifts_log_q(self, finite_table, classes):
        def g(ids, r, phi):
            return np.full(len(ids), 0.005)

        plain = estimate_Qn(finite_table, 1.0, 3, classes=classes)
        shifted = estimate_Qn(finite_table, 1.0, 3, g=g, classes=classes)
        assert shifted.log_value == pytest.approx(plain.log_value + 3 * 0.005, rel=1e-9)

    def test_large_potential_rejected(self, finite_table, classes):
        def g(ids, r, phi):
            return np.full(len(ids), 10.0)

        with pytest.raises(DomainError):
            estimate_Qn(finite_table, 1.0, 3, g=g, classes=classes)

    def test_pressure_needs_depth(self, finite_table, classes):
        with pytest.raises(DomainError):
            estimate_pressure(finite_table, 1.0, 3, classes=classes)

    def test_pressure_point(self, finite_table, classes):
        point = estimate_pressure(finite_table, 1.0, 4, classes=classes)
        assert point.n_max == 4
        assert len(point.log_Q) == 4
        assert point.P_inf == pytest.approx(min(q / n for n, q in enumerate(point.log_Q, start=1)))
        assert point.spread >= 0

    def test_h_star_positive(self, finite_table):
        h = estimate_h_star(finite_table, 4, SMALL_PLAN)
        assert h.h_star > 0
        assert len(h.counts) == 4

    def test_growth_on_estimated_point(self, finite_table, classes):
        diag = growth_diagnostics(estimate_pressure(finite_table, 1.0, 4, classes=classes))
        assert all(math.isfinite(v) for v in diag.values())
        assert diag["supermultiplicative_c2"] <= math.exp(diag["submultiplicative_log_excess"]) * (1 + 1e-12)
        assert diag["growth_band_factor"] >= 1.0


class TestSyntheticCurves:
    """합성 압력 곡선 위의 t_* 와 성장 진단"""

    def test_growth_exact_exponential(self):
        diag = growth_diagnostics(_point(1.0, 0.5))
        assert diag["submultiplicative_log_excess"] == pytest.approx(0.0, abs=1e-12)
        assert diag["supermultiplicative_c2"] == pytest.approx(1.0)
        assert diag["growth_band_factor"] == pytest.approx(1.0)

    def test_t_star_inside_grid(self):
        lam = 2.0
        ts = np.linspace(0.5, 2.5, 9)
        curve = PressureCurve([_point(t, 1.0 - t * (math.log(lam) + 0.5)) for t in ts])
        est = estimate_t_star(curve, lam)
        assert est.bounded
        assert not est.extrapolated
        assert est.t_star == pytest.approx(2.0, abs=1e-9)
        assert est.exceeds_one

    def test_t_star_extrapolated(self):
        lam = 2.0
        ts = np.linspace(0.5, 1.5, 5)
        curve = PressureCurve([_point(t, 1.0 - t * (math.log(lam) + 0.5)) for t in ts])
        est = estimate_t_star(curve, lam)
        assert est.extrapolated
        assert est.t_star == pytest.approx(2.0, abs=1e-9)

    def test_t_star_unbounded(self):
        curve = PressureCurve([_point(t, 1.0) for t in (0.5, 1.0, 1.5)])
        est = estimate_t_star(curve, 2.0)
        assert not est.bounded
        assert est.high == math.inf

    def test_t_star_below_one_fails_verdict(self):
        lam = 2.0
        ts = np.linspace(0.5, 1.5, 5)
        # P + t·log Λ = 1 − 1.5t
        curve = PressureCurve([_point(t, 1.0 - t * (math.log(lam) + 1.5)) for t in ts])
        est = estimate_t_star(curve, lam)
        assert est.t_star == pytest.approx(2.0 / 3.0, abs=1e-9)
        assert not est.exceeds_one
        result = {"pressure_curve": {"t": ts.tolist(), "P": [p.estimate for p in curve.points],
                                     "spread": [0.0] * len(ts)},
                  "Lambda": lam, "t_star": asdict(est)}
        assert Evaluator.evaluate_complexity(result)["t_star_exceeds_one"] is False

    def test_t_star_above_one_passes_verdict(self):
        lam = 2.0
        ts = np.linspace(0.5, 2.5, 9)
        curve = PressureCurve([_point(t, 1.0 - t * (math.log(lam) + 0.5)) for t in ts])
        verdicts = Evaluator.evaluate_complexity({"t_star": asdict(estimate_t_star(curve, lam))})
        assert verdicts["t_star_exceeds_one"] is True

    def test_curve_defects(self):
        lam = 2.0
        curve = PressureCurve([_point(t, -t * (math.log(lam) + 0.5) + 0.1 * t * t) for t in np.linspace(0.5, 1.5, 5)])
        assert curve.convexity_defect() <= 1e-12
        assert curve.monotonicity_defect(lam) < 0


class TestStableCurves:
    """𝒢_n(W) 역방향 전개"""

    @pytest.fixture
    def W(self, finite_table):
        return StableCurve.segment(finite_table, PhasePoint(0, 1.0, 0.2), 0.01)

    def test_segment_in_core_strip(self, W):
        assert W.homogeneous
        assert W.length == pytest.approx(0.01)

    def test_slope_outside_cone(self, finite_table):
        with pytest.raises(DomainError):
            StableCurve.segment(finite_table, PhasePoint(0, 1.0, 0.2), 0.01, slope=1.0)

    def test_pieces_cover_at_most_w(self, finite_table, W):
        evo = evolve_stable_curve(finite_table, W, 2, finite_table.delta0)
        assert evo.pieces
        assert sum(p.image_length for p in evo.pieces) <= W.length * (1 + 1e-9)

    def test_adapted_contraction(self, finite_table, W):
        n = 2
        evo = evolve_stable_curve(finite_table, W, n, finite_table.delta0)
        bound = -n * math.log(finite_table.Lambda) + 1e-6
        assert all(p.sup_log_j_adapted <= bound for p in evo.pieces)

    def test_one_step_sum(self, finite_table, W):
        res = one_step_expansion_sum(finite_table, W, 1.0)
        assert res.components >= 1
        assert 0 < res.total

    @pytest.fixture(scope="class")
    def short_curves(self, finite_table):
        """μ_SRB 점을 중심으로 한 길이 δ₀/2 안정 곡선들"""
        ids, r, phi = sample_srb(finite_table, 40, np.random.default_rng(3))
        out = []
        for i in range(len(ids)):
            try:
                out.append(StableCurve.segment(
                    finite_table, PhasePoint(int(ids[i]), float(r[i]), float(phi[i])), 0.5 * finite_table.delta0))
            except BilliardThermoError:
                continue
            if len(out) == 20:
                break
        return out

    @pytest.mark.parametrize("t", [1.0, 1.5])
    def test_one_step_bound(self, finite_table, short_curves, t):
        theta = choose_theta(finite_table.Lambda)
        assert short_curves
        for W in short_curves:
            assert one_step_expansion_sum(finite_table, W, t).total < theta ** t
        violations, worst = one_step_violations(finite_table, short_curves, t, theta)
        assert violations == 0
        assert worst < 1.0

    def test_one_step_sum_decreasing_in_t(self, finite_table, short_curves):
        W = short_curves[0]
        totals = [one_step_expansion_sum(finite_table, W, t).total for t in (0.5, 1.0, 1.5)]
        assert totals[0] > totals[1] > totals[2]

    def test_smallest_k0(self, finite_table, short_curves):
        theta = choose_theta(finite_table.Lambda)
        assert smallest_k0(finite_table, short_curves, 1.0, theta) == finite_table.k0
        k0 = smallest_k0(finite_table, short_curves, 0.5, theta)
        if k0 is not None:
            assert k0 >= finite_table.k0
            assert one_step_violations(replace(finite_table, k0=k0), short_curves, 0.5, theta)[0] == 0

    def test_smallest_k0_gives_up(self, finite_table, short_curves):
        # θ → 0 이면 어떤 k0 도 한계를 만족하지 못한다
        assert smallest_k0(finite_table, short_curves, 1.0, 1e-9, k0_max=finite_table.k0 + 1) is None

    def test_one_step_sum_rejects_long_curve(self, finite_table):
        long_w = StableCurve.segment(finite_table, PhasePoint(0, 1.0, 0.0), 0.1)
        with pytest.raises(DomainError):
            one_step_expansion_sum(finite_table, long_w, 1.0)

    def test_evolution_frame(self, finite_table, W):
        frame = evolution_frame(finite_table, W, 2, finite_table.delta0)
        assert list(frame.columns) == ["generation", "piece_id", "length", "sup_logJs"]
        assert set(frame["generation"]) <= {1, 2}
        assert (frame["length"] > 0).all()

    def test_short_piece_fraction(self, finite_table, W):
        ratio = short_piece_fraction(finite_table, W, 2, 0.02, 1.0)
        assert 0.0 <= ratio <= 1.0

    def test_short_piece_fraction_needs_long_curve(self, finite_table, W):
        with pytest.raises(DomainError):
            short_piece_fraction(finite_table, W, 2, finite_table.delta0, 1.0)


class TestSparseRecurrence:
    """ŝ₀ 와 h_* > ŝ₀ log 2 판정"""

    def test_zero_threshold_hits_everything(self, finite_table):
        res = sparse_recurrence_statistic(finite_table, 0.0, 5, 200, seed=3)
        assert res.s0 == pytest.approx(1.0)
        assert res.segments > 0
        assert res.verdict is None

    def test_verdict(self, finite_table):
        assert sparse_recurrence_statistic(finite_table, 0.0, 5, 200, seed=3, h_star=10.0).verdict
        assert not sparse_recurrence_statistic(finite_table, 0.0, 5, 200, seed=3, h_star=0.1).verdict

    def test_threshold_range(self, finite_table):
        with pytest.raises(DomainError):
            sparse_recurrence_statistic(finite_table, 2.0, 5, 200)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
