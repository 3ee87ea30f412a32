"""당구대 기하와 유한 지평 검증 테스트"""
import json
import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.geometry.table import TableGeometry, boundary_point, load_table_config, pairwise_gaps
from src.geometry.validation import validate_table
from src.utils.errors import ConfigError, DomainError, InvalidTableError


class TestBoundaryPoint:
    """경계 좌표 → 위치/법선/곡률"""

    def test_origin_of_arclength(self, table):
        bp = boundary_point(table, 0, 0.0)
        assert bp.position[0] == pytest.approx(0.25)
        assert bp.position[1] == pytest.approx(0.0)
        assert bp.inward_normal == pytest.approx((1.0, 0.0))
        assert bp.curvature == pytest.approx(4.0)

    def test_quarter_perimeter(self, table):
        bp = boundary_point(table, 0, table.perimeters[0] / 4)
        assert bp.position[0] == pytest.approx(0.0, abs=1e-12)
        assert bp.position[1] == pytest.approx(0.25)

    def test_periodic_in_r(self, table):
        a = boundary_point(table, 1, 0.3)
        b = boundary_point(table, 1, 0.3 + 2 * table.perimeters[1])
        assert a.r == pytest.approx(b.r)
        assert a.position == pytest.approx(b.position)

    def test_point_lies_on_circle(self, finite_table, rng):
        for sid, s in enumerate(finite_table.scatterers):
            for r in rng.random(20) * s.perimeter:
                bp = boundary_point(finite_table, sid, float(r))
                d = (np.asarray(bp.position) - np.asarray(s.center) + 0.5) % 1.0 - 0.5
                assert np.hypot(*d) == pytest.approx(s.radius, abs=1e-12)

    def test_invalid_id(self, table):
        with pytest.raises(DomainError):
            boundary_point(table, 5, 0.0)

    def test_non_finite_r(self, table):
        with pytest.raises(DomainError):
            boundary_point(table, 0, float("nan"))


class TestTableConstants:
    """τ_min, K, Λ"""

    def test_tau_min_default(self, table):
        assert table.tau_min == pytest.approx(math.sqrt(0.5) - 0.5, abs=1e-12)

    def test_lambda_formula(self, finite_table):
        expected = 1.0 + 2.0 * finite_table.tau_min * finite_table.K_min
        assert finite_table.Lambda == pytest.approx(expected)
        assert finite_table.Lambda > 1.0

    def test_cone_ranges(self, finite_table):
        lo_u, hi_u = finite_table.unstable_slope_range
        lo_s, hi_s = finite_table.stable_slope_range
        assert lo_u == pytest.approx(finite_table.K_min)
        assert hi_u == pytest.approx(finite_table.K_max + 1.0 / finite_table.tau_min)
        assert (lo_s, hi_s) == pytest.approx((-hi_u, -lo_u))

    def test_gap_matrix_symmetric(self, finite_table):
        gaps = pairwise_gaps(finite_table, finite_table.horizon_bound)
        assert np.allclose(gaps, gaps.T)
        assert gaps[0, 0] == pytest.approx(1.0 - 0.8)

    def test_missing_disks(self):
        with pytest.raises(ConfigError) as exc:
            TableGeometry.from_dict({"q": 3})
        assert exc.value.field == "disks"

    def test_dict_round_trip(self, finite_table, tmp_path):
        path = tmp_path / "table.json"
        path.write_text(json.dumps(finite_table.to_dict()))
        loaded = load_table_config(str(path))
        assert loaded.radii.tolist() == finite_table.radii.tolist()
        assert loaded.tau_min == pytest.approx(finite_table.tau_min)


class TestValidation:
    """겹침 검사와 광선 격자 유한 지평 판정"""

    def test_overlap_rejected(self):
        t = TableGeometry.from_dict({"disks": [
            {"center": [0.0, 0.0], "radius": 0.4},
            {"center": [0.5, 0.5], "radius": 0.4},
        ]})
        with pytest.raises(InvalidTableError):
            validate_table(t)

    def test_single_disk_infinite_horizon(self):
        t = TableGeometry.from_dict({"disks": [{"center": [0.0, 0.0], "radius": 0.25}]})
        report = validate_table(t, direction_samples=1000, boundary_samples=16)
        assert not report.finite_horizon
        assert report.escaped_rays > 0

    def test_finite_table(self, finite_table):
        report = validate_table(finite_table, direction_samples=1000, boundary_samples=32)
        assert report.finite_horizon
        assert report.escaped_rays == 0
        assert report.tau_min <= report.tau_max < finite_table.horizon_bound
        assert report.Lambda == pytest.approx(finite_table.Lambda)
        assert report.table.finite_horizon

    def test_deterministic(self, finite_table):
        a = validate_table(finite_table, boundary_samples=16).to_dict()
        b = validate_table(finite_table, boundary_samples=16).to_dict()
        assert a == b

    def test_too_few_directions(self, finite_table):
        with pytest.raises(DomainError):
            validate_table(finite_table, direction_samples=100)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
