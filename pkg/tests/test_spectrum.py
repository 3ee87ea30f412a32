"""Ulam 연산자와 고유 삼중쌍 테스트"""
import math
import os
import sys

import numpy as np
import pytest
import scipy.sparse as sp

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.spectrum.eigen import equilibrium_measure, leading_triple, second_eigenvalue
from src.report.evaluator import DERIVATIVE_REL_TOL, Evaluator
from src.spectrum.pressure import (
    _autocorrelation, lambda_standard_error, measure_orbits, pressure_derivatives, pressure_from_spectrum,
)
from src.spectrum.ulam import UlamGrid, UlamOperator, assemble_ulam, draw_from_cells
from src.utils.errors import ConfigError, DomainError


class TestLeadingTriple:
    """거듭제곱 반복 (작은 행렬)"""

    def test_identity(self):
        triple = leading_triple(sp.identity(3, format="csr"))
        assert triple.lam == pytest.approx(1.0)
        assert np.allclose(triple.nu, 1.0)

    def test_two_state_chain(self):
        m = np.array([[0.9, 0.1], [0.2, 0.8]])
        triple = leading_triple(m)
        assert triple.lam == pytest.approx(1.0, abs=1e-8)
        assert triple.left == pytest.approx([2 / 3, 1 / 3], abs=1e-4)
        assert triple.nu[0] == pytest.approx(triple.nu[1], rel=1e-4)

    def test_pairing_normalized(self):
        m = np.array([[0.5, 0.3, 0.2], [0.1, 0.6, 0.3], [0.3, 0.3, 0.4]]) * 1.7
        triple = leading_triple(m)
        mass = np.full(3, 1 / 3)
        assert triple.lam == pytest.approx(1.7, rel=1e-8)
        assert np.sum(triple.nu * mass) == pytest.approx(1.0)
        assert np.sum(triple.nu * triple.nu_tilde * mass) == pytest.approx(1.0)

    def test_second_eigenvalue_diagonal(self):
        m = np.diag([1.0, 0.5])
        triple = leading_triple(m)
        second = second_eigenvalue(m, triple)
        assert second.gap_ratio == pytest.approx(0.5, abs=1e-3)


class TestUlamOperator:
    """셀 격자와 몬테카를로 조립"""

    def test_grid_mass(self, finite_table):
        grid = UlamGrid.for_table(finite_table, 8, 6)
        assert grid.size == 2 * 48
        assert grid.reference_mass.sum() == pytest.approx(1.0)

    def test_cell_of_matches_sampling(self, finite_table, rng):
        grid = UlamGrid.for_table(finite_table, 8, 6)
        weights = np.ones(grid.size)
        cells, ids, r, phi = draw_from_cells(grid, weights, 500, rng)
        assert np.array_equal(grid.cell_of(ids, r, phi), cells)

    def test_bad_grid(self, finite_table):
        with pytest.raises(ConfigError):
            UlamGrid.for_table(finite_table, 0, 4)

    def test_too_few_samples(self, finite_table):
        with pytest.raises(ConfigError):
            assemble_ulam(finite_table, 1.0, (4, 4), 8, seed=1)

    def test_stochastic_at_one(self, ulam_operator):
        rows = np.asarray(ulam_operator.matrix.sum(axis=1)).ravel()
        assert np.allclose(rows[ulam_operator.accepted > 0], 1.0)
        assert leading_triple(ulam_operator).log_lambda == pytest.approx(0.0, abs=1e-8)

    def test_reweight_keeps_pattern(self, ulam_operator):
        other = ulam_operator.reweight(1.3)
        a, b = ulam_operator.matrix.tocsr(), other.matrix.tocsr()
        assert np.array_equal(a.indptr, b.indptr)
        assert np.array_equal(a.indices, b.indices)
        assert other.t == 1.3

    def test_pressure_decreases(self, ulam_operator):
        logs = [leading_triple(ulam_operator.reweight(t)).log_lambda for t in (0.8, 1.0, 1.2)]
        assert logs[0] > logs[1] > logs[2]

    def test_same_seed_same_operator(self, finite_table, ulam_operator):
        again = assemble_ulam(finite_table, 1.7, (4, 4), 16, seed=7)
        assert np.array_equal(again.rows, ulam_operator.rows)
        assert np.allclose(again.log_js, ulam_operator.log_js)

    def test_cache_round_trip(self, ulam_operator, tmp_path):
        path = str(tmp_path / "op.npz")
        ulam_operator.save(path)
        loaded = UlamOperator.load(path)
        assert loaded.grid == ulam_operator.grid
        assert abs(loaded.matrix - ulam_operator.matrix).max() == 0

    def test_standard_error_finite(self, ulam_operator):
        se = lambda_standard_error(ulam_operator)
        assert math.isfinite(se) and se >= 0


class TestEquilibrium:
    """μ̂_t 와 도함수"""

    def test_measure_is_probability(self, srb_measure):
        assert srb_measure.mu_cells.sum() == pytest.approx(1.0)
        assert np.all(srb_measure.mu_cells >= 0)

    def test_invariance_residual_bounded(self, srb_measure):
        assert 0.0 <= srb_measure.invariance_residual < 0.5

    def test_ladder_at_one(self, finite_table, ulam_operator):
        res = pressure_from_spectrum(finite_table, 1.0, [(3, 3), (4, 4)], 16, seed=7,
                                     operators={(4, 4): ulam_operator})
        assert res.cells == [3 * 3 * finite_table.n_scatterers, ulam_operator.size]
        assert res.estimate == pytest.approx(0.0, abs=1e-8)
        assert abs(res.trend) < 1e-6
        assert res.spread >= 0

    def test_ladder_needs_two_grids(self, finite_table):
        with pytest.raises(DomainError):
            pressure_from_spectrum(finite_table, 1.0, [(4, 4)], 16, seed=1)

    def test_autocorrelation_of_constant(self):
        series = np.full((50, 10), 2.5)
        assert np.allclose(_autocorrelation(series, 5), 0.0)

    def test_autocorrelation_lag_zero_is_variance(self, rng):
        series = rng.standard_normal((200, 50))
        corr = _autocorrelation(series, 3)
        assert corr[0] == pytest.approx(series[0].var())

    def test_orbits_start_on_measure(self, finite_table, srb_measure):
        """기본 궤도는 μ_t 에서 뽑은 점에서 바로 시작"""
        _, ids, r, _ = draw_from_cells(srb_measure.grid, srb_measure.mu_cells, 64, np.random.default_rng(9))
        o_ids, o_r, _, log_js, _ = measure_orbits(finite_table, srb_measure, 64, 5, np.random.default_rng(9))
        assert np.array_equal(o_ids[0], ids)
        assert np.allclose(o_r[0], r)
        assert log_js.shape == (5, 64)

    @pytest.mark.parametrize("t", [0.6, 1.4])
    def test_first_derivative_matches_central_difference(self, finite_table, ulam_operator, t):
        h = 0.02
        op = ulam_operator.reweight(t)
        measure = equilibrium_measure(op, leading_triple(op))
        d = pressure_derivatives(finite_table, t, measure, K_trunc=10, samples=200, seed=4)
        up = leading_triple(ulam_operator.reweight(t + h)).log_lambda
        down = leading_triple(ulam_operator.reweight(t - h)).log_lambda
        central = (up - down) / (2 * h)
        assert Evaluator.relative_match(d.P1, central, DERIVATIVE_REL_TOL)

    def test_first_derivative_moves_with_t(self, finite_table, ulam_operator):
        p1 = []
        for t in (0.6, 1.4):
            op = ulam_operator.reweight(t)
            measure = equilibrium_measure(op, leading_triple(op))
            p1.append(pressure_derivatives(finite_table, t, measure, K_trunc=10, samples=200, seed=4).P1)
        # log λ_t 가 볼록이므로 P′ 은 증가
        assert p1[0] < p1[1]

    def test_derivatives_need_truncation(self, finite_table, srb_measure):
        with pytest.raises(DomainError):
            pressure_derivatives(finite_table, 1.0, srb_measure, K_trunc=5)

    def test_first_derivative_negative(self, finite_table, srb_measure):
        d = pressure_derivatives(finite_table, 1.0, srb_measure, K_trunc=10, samples=500, seed=2)
        assert d.P1 < 0
        assert d.P1_error > 0
        assert len(d.autocorrelation) == 11


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
