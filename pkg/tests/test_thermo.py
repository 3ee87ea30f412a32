"""평형 측도 통계 검증 테스트"""
import math
import os
import sys
from dataclasses import replace

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.dynamics.billiard_map import PhasePoint
from src.singularity.curves import singularity_curves
from src.spectrum.eigen import equilibrium_measure, leading_triple
from src.spectrum.pressure import Derivatives, pressure_derivatives
from src.thermo.adaptedness import adaptedness_integral, neighborhood_scaling
from src.thermo.clt import affine_pressure_diagnostic, clt_check, observable_continuity
from src.thermo.entropy import BowenBall, bowen_ball_check, bowen_ball_hits, entropy_identities
from src.thermo.sampling import TRAJECTORY, histogram_test, sample_measure
from src.utils.errors import DomainError, InsufficientRangeError


def _derivatives(t=1.0, P1=-1.2, P2=0.0, P2_error=0.0):
    return Derivatives(t=t, P1=P1, P1_error=0.01, P2=P2, P2_error=P2_error, P2_one_sided=P2)


@pytest.fixture(scope="module")
def half_measure(srb_measure):
    """짝수 셀에만 질량이 있는 측도"""
    mu = srb_measure.mu_cells.copy()
    mu[1::2] = 0.0
    return replace(srb_measure, mu_cells=mu / mu.sum())


@pytest.fixture(scope="module")
def measure_14(ulam_operator):
    """t=1.4 평형 측도 (μ_SRB 와 다른 가중)"""
    op = ulam_operator.reweight(1.4)
    return equilibrium_measure(op, leading_triple(op))


class TestMeasureSampling:
    """μ̂_t 샘플러"""

    def test_zero_cells_never_hit(self, half_measure):
        sample = sample_measure(half_measure, 2000, seed=1)
        assert np.all(half_measure.mu_cells[sample.cells] > 0)
        assert histogram_test(sample, half_measure)["empty_weight_hits"] == 0

    def test_trajectory_route_respects_support(self, finite_table, half_measure):
        sample = sample_measure(half_measure, 1000, seed=1, source=TRAJECTORY, table=finite_table)
        assert sample.count == 1000
        assert np.all(half_measure.mu_cells[sample.cells] > 0)

    def test_deterministic(self, srb_measure):
        a = sample_measure(srb_measure, 100, seed=9)
        b = sample_measure(srb_measure, 100, seed=9)
        assert np.array_equal(a.r, b.r)

    def test_unknown_source(self, srb_measure):
        with pytest.raises(DomainError):
            sample_measure(srb_measure, 10, seed=0, source="nope")

    def test_trajectory_needs_table(self, srb_measure):
        with pytest.raises(DomainError):
            sample_measure(srb_measure, 10, seed=0, source=TRAJECTORY)

    def test_histogram_matches_own_measure(self, srb_measure):
        sample = sample_measure(srb_measure, 20000, seed=4)
        assert histogram_test(sample, srb_measure)["p_value"] > 1e-4


class TestNeighborhoods:
    """특이 곡선 근방 질량"""

    def test_range_too_small(self, finite_table, srb_measure):
        curves = singularity_curves(finite_table, 0, resolution=0.05)
        sample = sample_measure(srb_measure, 500, seed=2)
        with pytest.raises(InsufficientRangeError):
            neighborhood_scaling(finite_table, sample, curves, [0.01, 0.02, 0.1])

    def test_s0_scaling(self, finite_table, srb_measure):
        curves = singularity_curves(finite_table, 0, resolution=0.01)
        sample = sample_measure(srb_measure, 20000, seed=3)
        res = neighborhood_scaling(finite_table, sample, curves, [0.05, 0.1, 0.2, 0.4])
        assert res.monotone
        assert res.consistent

    def test_adaptedness_finite(self, finite_table, srb_measure):
        curves = [singularity_curves(finite_table, 1, resolution=0.01),
                  singularity_curves(finite_table, -1, resolution=0.01)]
        sample = sample_measure(srb_measure, 5000, seed=5)
        report = adaptedness_integral(finite_table, sample, curves)
        assert math.isfinite(report.estimate)
        assert report.estimate > 0
        assert np.all(np.diff(report.shells["partial_sum"]) >= 0)


class TestBowenBalls:
    """B_n(x, ε)"""

    def test_nested(self, finite_table, srb_measure):
        sample = sample_measure(srb_measure, 5000, seed=6)
        x = PhasePoint(int(sample.ids[0]), float(sample.r[0]), float(sample.phi[0]))
        b2 = BowenBall(x, 2, 0.3).contains(finite_table, sample.ids, sample.r, sample.phi)
        b3 = BowenBall(x, 3, 0.3).contains(finite_table, sample.ids, sample.r, sample.phi)
        assert b2[0] and b3[0]
        assert np.all(b2[b3])

    def test_hits_match_direct_count(self, finite_table, srb_measure):
        sample = sample_measure(srb_measure, 5000, seed=7)
        centers = sample_measure(srb_measure, 4, seed=8)
        hits = bowen_ball_hits(finite_table, sample, centers, 2, 0.3)
        assert np.all(np.diff(hits, axis=0) <= 0)
        for c in range(centers.count):
            x = PhasePoint(int(centers.ids[c]), float(centers.r[c]), float(centers.phi[c]))
            inside = BowenBall(x, 2, 0.3).contains(finite_table, sample.ids, sample.r, sample.phi)
            assert hits[2, c] == int(inside.sum())

    def test_epsilon_too_large(self, finite_table, srb_measure):
        with pytest.raises(DomainError):
            bowen_ball_check(finite_table, 1.0, srb_measure, epsilon=finite_table.tau_min)

    def test_check_runs(self, finite_table, srb_measure):
        res = bowen_ball_check(finite_table, 1.0, srb_measure, trials=20, n_max=3, epsilon=0.03,
                               sample_count=100_000, seed=1)
        assert res.nested
        assert res.pairs > 0
        assert 0.0 <= res.violation_rate <= 1.0

    def test_check_runs_off_srb(self, finite_table, measure_14):
        res = bowen_ball_check(finite_table, 1.4, measure_14, trials=20, n_max=3, epsilon=0.03,
                               sample_count=100_000, seed=1)
        assert res.t == 1.4
        assert res.nested
        assert res.pairs > 0
        assert 0.0 <= res.violation_rate <= 1.0


class TestIdentitiesAndClt:
    """엔트로피 항등식, CLT, t-격자 진단"""

    def test_entropy_identity(self, finite_table, srb_measure):
        d = _derivatives(t=0.8)
        res = entropy_identities(finite_table, 0.8, srb_measure, d, h_star=5.0)
        assert res.entropy == pytest.approx(srb_measure.log_lambda + 0.8 * 1.2)
        assert res.lyapunov == pytest.approx(1.2)
        assert math.isnan(res.pesin_residual)
        assert res.below_h_star

    def test_clt_skipped_for_degenerate_variance(self, finite_table, srb_measure):
        res = clt_check(finite_table, 1.0, srb_measure, derivatives=_derivatives(P2=0.0))
        assert res.skipped
        assert not res.passed

    def test_clt_off_srb(self, finite_table, measure_14):
        d = pressure_derivatives(finite_table, 1.4, measure_14, K_trunc=10, samples=500, seed=2)
        res = clt_check(finite_table, 1.4, measure_14, n_block=40, m_samples=400, derivatives=d, seed=3)
        assert res.t == 1.4
        if not res.skipped:
            assert res.block_variance > 0
            assert 0.0 <= res.p_value <= 1.0
            assert math.isfinite(res.variance_ratio)

    def test_affine_diagnostic(self, srb_measure, half_measure):
        same = affine_pressure_diagnostic(srb_measure, srb_measure)
        assert same["tv"] == 0.0 and same["indistinct"]
        other = affine_pressure_diagnostic(srb_measure, half_measure)
        assert other["tv"] > 0.1 and not other["indistinct"]

    def test_continuity_constant_observable(self, srb_measure):
        a = replace(srb_measure, t=0.9)
        b = replace(srb_measure, t=1.1)
        res = observable_continuity([a, b], lambda ids, r, phi: np.ones(len(ids)))
        assert res["max_difference_quotient"] == pytest.approx(0.0, abs=1e-12)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
