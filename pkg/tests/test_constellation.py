import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from noma_isac.constellation import (
    GRAY_LABELS,
    build_combined,
    decision_geometry,
    default_constellation,
    distance_sets,
    nearest_indices,
    nearest_symbol,
)
from noma_isac.errors import AmbiguityError, GeometryError

C = default_constellation()


def point(n):
    return C.points[n - 1]


class TestBuildCombined:
    def test_first_point(self):
        s1 = point(1)
        assert abs(s1.real - 0.70711) < 1e-5 and abs(s1.imag - 1.70711) < 1e-5
        assert abs(s1 - (complex(math.cos(math.pi / 4), math.sin(math.pi / 4)) + 1j)) < 1e-15

    def test_label_of_s8(self):
        assert C.labels[7] == "0110"

    def test_as_printed_is_ambiguous(self):
        with pytest.raises(AmbiguityError) as info:
            build_combined(math.pi / 4, math.pi / 2, "as_printed")
        assert 2 in info.value.indices
        assert "s_2" in str(info.value)

    def test_as_printed_s2_at_origin(self):
        # the as_printed phases put the second point exactly at zero
        t1 = np.exp(1j * (math.ceil(2 / 4) * math.pi / 2 - math.pi / 4))
        t2 = np.exp(1j * ((2 * 2 - 1) * math.pi / 4 + math.pi / 2))
        assert abs(t1 + t2) < 1e-15

    def test_unknown_convention(self):
        with pytest.raises(ValueError):
            build_combined(convention="absolute")

    def test_sixteen_distinct_points(self):
        assert len(C) == 16
        d = np.abs(C.points[:, None] - C.points[None, :])
        assert d[~np.eye(16, dtype=bool)].min() > 0.5

    def test_mean_energy(self):
        assert abs(np.mean(np.abs(C.points) ** 2) - 2.0) < 1e-12

    def test_msb_split(self):
        assert all(C.labels[n][0] == "0" for n in range(8))
        assert all(C.labels[n][0] == "1" for n in range(8, 16))

    def test_labels_are_gray_per_period(self):
        for lab in C.labels:
            assert lab[:2] in GRAY_LABELS and lab[2:] in GRAY_LABELS
        assert len(set(C.labels)) == 16

    def test_points_are_sum_of_periods(self):
        assert np.allclose(C.points, C.t1 + C.t2, atol=0)
        assert np.allclose(np.abs(C.t1), 1) and np.allclose(np.abs(C.t2), 1)

    def test_immutable(self):
        with pytest.raises(ValueError):
            C.points[0] = 0

    def test_reflection_symmetry(self):
        pts = C.points
        for reflected in (np.conj(pts), -np.conj(pts), -pts):
            d = np.abs(reflected[:, None] - pts[None, :]).min(axis=1)
            assert d.max() < 1e-12

    @given(st.floats(0.05, 1.5))
    def test_other_rotations_build(self, theta_r):
        try:
            c = build_combined(math.pi / 4, math.pi / 4 + theta_r)
        except AmbiguityError:
            return
        assert abs(np.mean(np.abs(c.points) ** 2) - 2.0) < 1e-12


class TestDistanceSets:
    def test_first_cross_distance(self):
        ds = distance_sets(C, 1)
        assert abs(point(9) - complex(-0.70711, 0.29289)) < 1e-5
        assert abs(ds.distances[0, 0] - 2.0) < 1e-12

    @pytest.mark.parametrize("bit", [1, 2, 3, 4])
    def test_set_sizes(self, bit):
        ds = distance_sets(C, bit)
        assert len(ds.correct) == len(ds.wrong) == 8
        assert ds.distances.shape == (8, 8)
        assert np.all(ds.distances > 0)

    def test_bit_one_sets(self):
        ds = distance_sets(C, 1)
        assert ds.correct == tuple(range(1, 9)) and ds.wrong == tuple(range(9, 17))

    def test_multiset_same_for_all_bits(self):
        ref = distance_sets(C, 1).sorted_multiset()
        for bit in (2, 3, 4):
            assert np.max(np.abs(distance_sets(C, bit).sorted_multiset() - ref)) < 1e-12

    def test_invalid_bit(self):
        with pytest.raises(ValueError):
            distance_sets(C, 5)


class TestNearestSymbol:
    def test_identity(self):
        assert [nearest_symbol(C, p) for p in C.points] == list(range(1, 17))

    def test_fifth_point(self):
        assert nearest_symbol(C, point(5)) == 5

    def test_origin_tie_break(self):
        d = np.abs(C.points) ** 2
        ties = np.flatnonzero(np.isclose(d, d.min(), rtol=0, atol=1e-12)) + 1
        assert len(ties) > 1
        assert nearest_symbol(C, 0j) == ties.min()

    @given(st.floats(0, 2 * math.pi), st.floats(0, 0.29))
    def test_voronoi_membership(self, phase, r):
        # half the minimum distance is about 0.293
        assert nearest_symbol(C, point(1) + r * complex(math.cos(phase), math.sin(phase))) == 1

    def test_vectorised_matches_scalar(self):
        rng = np.random.default_rng(4)
        z = rng.normal(size=50) + 1j * rng.normal(size=50)
        vec = nearest_indices(C, z) + 1
        assert list(vec) == [nearest_symbol(C, p) for p in z]


class TestDecisionGeometry:
    g = decision_geometry(C)

    def test_slope_ob(self):
        assert abs(self.g.k_OB - 1.0) < 1e-12

    def test_d_mirror_of_c(self):
        assert abs(self.g.a_D + self.g.a_C) < 1e-12

    def test_symmetry_relations(self):
        g = self.g
        v = g.vertices
        A, B, E, F = (np.array(v[k]) for k in "ABEF")
        assert np.allclose(B, [-A[0], A[1]], atol=1e-12)
        assert np.allclose(B, [F[0], -F[1]], atol=1e-12)
        assert np.allclose(B, [-E[0], -E[1]], atol=1e-12)
        assert abs(g.a_B - g.a_H) < 1e-12 and abs(g.a_B + g.a_G) < 1e-12
        s = g.slopes
        assert abs(s["AC"] - s["DF"]) < 1e-12
        assert abs(s["AC"] + s["BD"]) < 1e-12 and abs(s["AC"] + s["CE"]) < 1e-12
        for key, sign in (("OB", 1), ("OE", 1), ("OA", -1), ("OF", -1)):
            assert abs(s[key] - sign) < 1e-12

    def test_origin(self):
        assert self.g.vertices["O"] == (0.0, 0.0)

    def test_vertices_on_bisectors(self):
        pts = C.points
        for name, (i, j) in self.g.defining.items():
            z = complex(*self.g.vertices[name])
            assert abs(abs(z - pts[i - 1]) - abs(z - pts[j - 1])) < 1e-12
            assert C.labels[i - 1][0] != C.labels[j - 1][0]

    def test_k_ac_value(self):
        assert abs(self.g.k_AC - 1 / (math.sqrt(2) - 1)) < 1e-12

    def test_region_table(self):
        assert [r[0] for r in self.g.regions] == [f"U{i}" for i in range(1, 10)]

    def test_unsupported_configuration(self):
        other = build_combined(math.pi / 4, math.pi / 3)
        with pytest.raises(GeometryError):
            decision_geometry(other)

    def test_boundary_matches_voronoi(self):
        # a small circle around each boundary vertex meets both MSB values
        for name in "ABCDEF":
            z = complex(*self.g.vertices[name])
            msbs = set()
            for ang in np.linspace(0, 2 * math.pi, 24, endpoint=False):
                n = nearest_symbol(C, z + 1e-6 * complex(math.cos(ang), math.sin(ang)))
                msbs.add(C.labels[n - 1][0])
            assert msbs == {"0", "1"}, name
