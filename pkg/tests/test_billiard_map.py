"""충돌 사상 T, T⁻¹, DT 테스트"""
import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.dynamics.billiard_map import (
    PhasePoint, advance, advance_inverse, phase_distance, step, step_inverse,
)
from src.dynamics.identities import finite_difference_dT, identity_residuals
from src.utils.errors import DomainError, HorizonViolationError, NearTangentialError


class TestStep:
    """한 스텝 충돌"""

    def test_head_on_along_axis(self, table):
        # (0.25, 0) 에서 +x 방향 → 이웃 lift 의 (0.75, 0) 에 정면 충돌
        res = step(table, PhasePoint(0, 0.0, 0.0))
        assert res.to.scatterer_id == 0
        assert res.tau == pytest.approx(0.5)
        assert res.to.r == pytest.approx(table.perimeters[0] / 2)
        assert res.to.phi == pytest.approx(0.0, abs=1e-12)

    def test_det_dT(self, finite_table):
        x = PhasePoint(0, 0.3, 0.4)
        res = step(finite_table, x)
        assert np.linalg.det(res.dT) == pytest.approx(math.cos(x.phi) / math.cos(res.to.phi), rel=1e-10)

    def test_inverse_round_trip(self, finite_table, rng):
        for _ in range(20):
            sid = int(rng.integers(0, 2))
            x = PhasePoint(sid, float(rng.random() * finite_table.perimeters[sid]), float(rng.uniform(-1.0, 1.0)))
            y = step(finite_table, x).to
            if math.cos(y.phi) < 0.05:
                continue
            back = step_inverse(finite_table, y).to
            assert phase_distance(finite_table, back, x) < 1e-10

    def test_inverse_is_time_reversal(self, finite_table):
        x = PhasePoint(1, 0.5, 0.3)
        a = step_inverse(finite_table, x).to
        b = step(finite_table, x.reversed()).to.reversed()
        assert phase_distance(finite_table, a, b) < 1e-14

    def test_inverse_differential(self, finite_table):
        x = PhasePoint(0, 1.0, -0.2)
        fwd = step(finite_table, x)
        back = step_inverse(finite_table, fwd.to)
        assert np.allclose(back.dT @ fwd.dT, np.eye(2), atol=1e-9)

    def test_near_tangent(self, finite_table):
        with pytest.raises(NearTangentialError):
            step(finite_table, PhasePoint(0, 0.1, math.pi / 2 - 1e-12))

    def test_invalid_scatterer(self, finite_table):
        with pytest.raises(DomainError):
            step(finite_table, PhasePoint(7, 0.1, 0.0))

    def test_phi_out_of_range(self):
        with pytest.raises(DomainError):
            PhasePoint(0, 0.0, 2.0)

    def test_horizon_violation(self, table):
        short = table.with_horizon(0.1)
        with pytest.raises(HorizonViolationError):
            step(short, PhasePoint(0, 0.0, 0.0))


class TestBatch:
    """배치 advance"""

    def test_matches_single_step(self, finite_table, phase_points):
        ids, r, phi = phase_points
        res = advance(finite_table, ids, r, phi)
        for k in np.nonzero(res.ok)[0][:25]:
            single = step(finite_table, PhasePoint(int(ids[k]), float(r[k]), float(phi[k])))
            assert single.to.scatterer_id == res.ids[k]
            assert single.to.r == pytest.approx(res.r[k], abs=1e-12)
            assert single.tau == pytest.approx(res.tau[k], abs=1e-12)

    def test_finite_horizon_never_escapes(self, finite_table, phase_points):
        res = advance(finite_table, *phase_points)
        assert np.all(res.ok)
        assert np.all(res.tau >= finite_table.tau_min - 1e-12)

    def test_inverse_batch(self, finite_table, phase_points):
        ids, r, phi = phase_points
        fwd = advance(finite_table, ids, r, phi)
        back = advance_inverse(finite_table, fwd.ids, fwd.r, fwd.phi)
        good = back.ok & (np.cos(fwd.phi) > 0.05)
        assert np.all(back.ids[good] == ids[good])
        assert np.allclose(back.phi[good], phi[good], atol=1e-10)

    def test_finite_difference(self, finite_table):
        ids = np.array([0, 1])
        r = np.array([0.7, 0.2])
        phi = np.array([0.1, -0.3])
        fd = finite_difference_dT(finite_table, ids, r, phi)
        for k in range(2):
            exact = step(finite_table, PhasePoint(int(ids[k]), float(r[k]), float(phi[k]))).dT
            assert np.allclose(fd[k], exact, rtol=1e-5, atol=1e-6)


class TestIdentities:
    """항등식 잔차 리포트"""

    def test_residuals_pass(self, finite_table):
        report = identity_residuals(finite_table, count=2000, seed=3)
        assert report["points"] > 1000
        assert report["round_trip"] < 1e-10
        assert report["det_dT"] < 1e-9
        assert report["passed"]


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
