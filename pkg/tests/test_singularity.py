"""동질성 띠, itinerary, 특이 곡선 테스트"""
import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.dynamics.billiard_map import PhasePoint
from src.singularity.curves import distance_to_singularity, distances_to_singularity, singularity_curves
from src.singularity.itinerary import BACKWARD, itinerary, itinerary_codes, itinerary_histogram
from src.singularity.strips import TANGENT_STRIP, strip_index, strip_indices, strip_of_margin
from src.utils.errors import DomainError, TruncatedItineraryError


class TestStrips:
    """H_k = {(k+1)^{-q} ≤ π/2 − |φ| < k^{-q}}"""

    def test_core(self):
        assert strip_of_margin(0.5, 3.0, 3) == 0
        assert strip_of_margin(3 ** -3, 3.0, 3) == 0

    def test_interior(self):
        assert strip_of_margin(0.01, 3.0, 3) == 4

    def test_left_edge_belongs_to_strip(self):
        assert strip_of_margin(4 ** -3, 3.0, 3) == 3
        assert strip_of_margin(5 ** -3, 3.0, 3) == 4

    def test_tangent(self):
        assert strip_of_margin(0.0, 3.0, 3) == TANGENT_STRIP

    def test_sign_follows_phi(self, table):
        assert strip_index(table, -(math.pi / 2 - 0.01)).k == -4
        assert strip_index(table, math.pi / 2 - 0.01).k == 4

    def test_batch_agrees(self, rng):
        u = 10 ** rng.uniform(-7, 0, 500)
        phi = (math.pi / 2 - u) * rng.choice([-1, 1], 500)
        batch = strip_indices(phi, 3.0, 3)
        single = [int(math.copysign(strip_of_margin(math.pi / 2 - abs(p), 3.0, 3), p)) for p in phi]
        assert batch.tolist() == single


class TestItinerary:
    """itinerary 와 배치 클래스 번호"""

    def test_length_and_symbols(self, finite_table):
        it = itinerary(finite_table, PhasePoint(0, 0.4, 0.3), 6)
        assert len(it) == 6
        assert all(sid in (0, 1) for sid, _ in it.symbols)
        assert it.symbols[0][0] == 0

    def test_prefix_property(self, finite_table):
        x = PhasePoint(0, 0.4, 0.3)
        short = itinerary(finite_table, x, 4)
        longer = itinerary(finite_table, x, 5)
        assert longer.prefix(4) == short.symbols

    def test_histogram(self):
        summary = itinerary_histogram(np.array([3, 3, 5, -1]), 4)
        assert summary["count"] == 2
        assert summary["samples"] == 3
        assert summary["top_classes"][0] == {"code": 3, "size": 2}

    def test_backward(self, finite_table):
        it = itinerary(finite_table, PhasePoint(1, 0.4, -0.3), 4, direction=BACKWARD)
        assert len(it) == 4
        assert it.direction == BACKWARD

    def test_deterministic(self, finite_table):
        x = PhasePoint(1, 0.77, 0.12)
        assert itinerary(finite_table, x, 5) == itinerary(finite_table, x, 5)

    def test_truncated(self, finite_table):
        with pytest.raises(TruncatedItineraryError) as exc:
            itinerary(finite_table, PhasePoint(0, 0.4, math.pi / 2), 3)
        assert exc.value.achieved_length == 0

    def test_invalid_length(self, finite_table):
        with pytest.raises(DomainError):
            itinerary(finite_table, PhasePoint(0, 0.4, 0.0), 0)

    def test_codes_equal_for_equal_points(self, finite_table):
        ids = np.array([0, 0, 1])
        r = np.array([0.4, 0.4, 0.9])
        phi = np.array([0.3, 0.3, -0.2])
        codes, valid = itinerary_codes(finite_table, ids, r, phi, 3)
        assert valid.all()
        assert codes[0] == codes[1]
        assert codes[0] != codes[2]


class TestSingularCurves:
    """S₀, S_{±1}"""

    def test_s0_only(self, finite_table):
        curves = singularity_curves(finite_table, 0, resolution=0.05)
        assert curves.powers() == [0]
        assert len(curves.polylines) == 2 * finite_table.n_scatterers

    def test_forward_curves_are_decreasing(self, finite_table):
        curves = singularity_curves(finite_table, 1, resolution=0.01)
        assert curves.powers() == [-1, 0]
        slopes = curves.tangent_slopes(-1)
        slopes = slopes[np.isfinite(slopes)]
        assert slopes.size > 0
        assert np.median(slopes) < 0

    def test_backward_curves_are_increasing(self, finite_table):
        curves = singularity_curves(finite_table, -1, resolution=0.01)
        assert curves.powers() == [0, 1]
        slopes = curves.tangent_slopes(1)
        slopes = slopes[np.isfinite(slopes)]
        assert np.median(slopes) > 0

    def test_distance_bounded_by_s0(self, finite_table, phase_points):
        curves = singularity_curves(finite_table, 1, resolution=0.01)
        ids, r, phi = phase_points
        d = distances_to_singularity(finite_table, curves, ids, r, phi)
        assert np.all(d >= 0)
        assert np.all(d <= math.pi / 2 - np.abs(phi) + 1e-12)

    def test_single_point_distance(self, finite_table):
        curves = singularity_curves(finite_table, 1, resolution=0.01)
        x = PhasePoint(0, 1.0, 0.2)
        d = distance_to_singularity(finite_table, x, curves=curves)
        batch = distances_to_singularity(finite_table, curves, [0], [1.0], [0.2])
        assert d == pytest.approx(float(batch[0]))
        assert 0 <= d <= math.pi / 2 - 0.2

    def test_single_point_level(self, finite_table):
        with pytest.raises(DomainError):
            distance_to_singularity(finite_table, PhasePoint(0, 1.0, 0.2), level=2)

    def test_level_too_deep(self, finite_table):
        with pytest.raises(DomainError):
            singularity_curves(finite_table, 99)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
