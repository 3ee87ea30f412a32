"""안정/불안정 방향, Jacobian, 콘 테스트"""
import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.dynamics.billiard_map import PhasePoint, step
from src.dynamics.hyperbolicity import (
    angle_factor, cone_invariance_check, empirical_c1, expansion_along_cone, fit_distortion_constant,
    stable_direction, stable_jacobian, trajectory_frame, unstable_direction, unstable_jacobian,
)
from src.utils.errors import NearTangentialError

POINTS = [PhasePoint(0, 0.3, 0.2), PhasePoint(1, 0.9, -0.5), PhasePoint(0, 2.0, 0.7)]


class TestDirections:
    """Eˢ, Eᵘ 는 각각의 콘 안에 있다"""

    @pytest.mark.parametrize("x", POINTS)
    def test_stable_in_cone(self, finite_table, x):
        lo, hi = finite_table.stable_slope_range
        v = stable_direction(finite_table, x)
        assert lo <= v.slope <= hi

    @pytest.mark.parametrize("x", POINTS)
    def test_unstable_in_cone(self, finite_table, x):
        lo, hi = finite_table.unstable_slope_range
        v = unstable_direction(finite_table, x)
        assert lo <= v.slope <= hi

    def test_tangent_point(self, finite_table):
        with pytest.raises(NearTangentialError):
            stable_direction(finite_table, PhasePoint(0, 0.1, math.pi / 2))


class TestJacobians:
    """JˢTⁿ, JᵘTⁿ"""

    @pytest.mark.parametrize("x", POINTS)
    def test_stable_cocycle(self, finite_table, x):
        two = stable_jacobian(finite_table, x, 2)
        one = stable_jacobian(finite_table, x, 1)
        nxt = stable_jacobian(finite_table, step(finite_table, x).to, 1)
        assert two == pytest.approx(one * nxt, rel=1e-8)

    @pytest.mark.parametrize("x", POINTS)
    def test_adapted_contraction(self, finite_table, x):
        for n in (1, 3):
            js = stable_jacobian(finite_table, x, n, adapted=True)
            assert js <= finite_table.Lambda ** (-n) * (1 + 1e-9)

    @pytest.mark.parametrize("x", POINTS)
    def test_adapted_expansion(self, finite_table, x):
        ju = unstable_jacobian(finite_table, x, 2, adapted=True)
        assert ju >= finite_table.Lambda ** 2 * (1 - 1e-9)


class TestCones:
    """콘 불변성과 적응 계량 팽창"""

    def test_cone_invariance(self, finite_table, phase_points):
        report = cone_invariance_check(finite_table, *phase_points)
        assert report["points"] > 0
        assert report["unstable_violations"] == 0
        assert report["stable_violations"] == 0

    @pytest.mark.parametrize("n", [1, 4])
    def test_expansion_bound(self, finite_table, phase_points, n):
        ids, r, phi = phase_points
        for edge in finite_table.unstable_slope_range:
            values, valid = expansion_along_cone(finite_table, ids, r, phi, n, np.full(len(ids), edge))
            assert valid.any()
            assert np.min(values[valid]) >= n * math.log(finite_table.Lambda) - 1e-9

    def test_empirical_c1_positive(self, finite_table, phase_points):
        ids, r, phi = phase_points
        c1 = empirical_c1(finite_table, ids, r, phi, 3, np.random.default_rng(0))
        assert 0 < c1 < math.inf


class TestDiagnostics:
    """각도 인자, 왜곡 상수, 궤도 덤프"""

    @pytest.mark.parametrize("x", POINTS)
    def test_angle_factor(self, finite_table, x):
        e = angle_factor(finite_table, x)
        assert 0 < e <= 1 + 1e-12

    @pytest.mark.parametrize("x", POINTS)
    def test_lebesgue_jacobian_identity(self, finite_table, x):
        # cos φ(x)/cos φ(Tx) = JᵘT·JˢT·E(Tx)/E(x)
        y = step(finite_table, x).to
        lhs = math.cos(x.phi) / math.cos(y.phi)
        rhs = (unstable_jacobian(finite_table, x, 1) * stable_jacobian(finite_table, x, 1)
               * angle_factor(finite_table, y) / angle_factor(finite_table, x))
        assert rhs == pytest.approx(lhs, rel=1e-6)

    def test_distortion_fit(self, finite_table):
        fit = fit_distortion_constant(finite_table, POINTS[0], 2)
        assert set(fit) == {"C_d", "C_d_fine", "pairs"}
        assert fit["pairs"] > 0
        assert 0 <= fit["C_d_fine"] <= fit["C_d"]

    def test_trajectory_frame(self, finite_table):
        frame = trajectory_frame(finite_table, POINTS[0], 20)
        assert list(frame.columns) == ["step", "scatterer_id", "r", "phi", "tau", "log_Js", "log_Ju"]
        assert 0 < len(frame) <= 20
        assert (frame["tau"] >= finite_table.tau_min - 1e-12).all()
        assert np.isfinite(frame[["log_Js", "log_Ju"]].to_numpy()).all()


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
