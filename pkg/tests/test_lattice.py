import math
from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from critreg.lattice import (
    Box,
    LatticePath,
    MultiIndex,
    Segment,
    SymmetricGeometricAxis,
    TableFamily,
    UnsupportedRegionError,
    geometric_family,
    log2_fraction,
    path_cost,
    region_mass,
    sphere_constant,
    sphere_points,
    sphere_size,
    symmetric_geometric_family,
    uniform_box_family,
)


def brute_sphere(d, n):
    return sum(1 for p in product(range(n + 1), repeat=d) if sum(p) == n)


class TestSphere:
    def test_single_direction(self):
        assert sphere_size(1, 5) == 1

    def test_examples_against_enumeration(self):
        assert sphere_size(2, 3) == brute_sphere(2, 3) == 4
        assert sphere_size(3, 2) == brute_sphere(3, 2) == 6

    def test_matches_enumeration_all_small(self):
        for d in range(1, 5):
            for n in range(13):
                assert sphere_size(d, n) == brute_sphere(d, n)

    def test_lower_bound_constant(self):
        for d in range(1, 5):
            a_d = sphere_constant(d)
            for n in range(201):
                assert sphere_size(d, n) >= a_d * (n + 1) ** (d - 1)

    def test_points_enumeration(self):
        pts = list(sphere_points(3, 2))
        assert len(pts) == 6
        assert all(sum(p) == 2 for p in pts)


class TestRegionMass:
    def test_full_cone_total(self):
        fam = geometric_family(2)
        mass, mean = region_mass(fam, None)
        assert mass == 1 and mean is None

    def test_sphere_one(self):
        fam = geometric_family(2)
        mass, mean = region_mass(fam, [(1, 0), (0, 1)])
        assert mass == Fraction(1, 4)
        assert mean == Fraction(1, 8)

    def test_constant_box(self):
        box = Box(((0, 2), (0, 3)))
        fam = uniform_box_family(box, total=Fraction(3))
        mass, mean = region_mass(fam, box)
        assert mass == 3
        assert mean == Fraction(3, 12)

    def test_symmetric_total(self):
        fam = symmetric_geometric_family(3)
        assert fam.total_mass == 1

    def test_empty_region_rejected(self):
        with pytest.raises(UnsupportedRegionError):
            region_mass(geometric_family(2), [])

    @given(
        st.integers(0, 6), st.integers(0, 6), st.integers(0, 6), st.integers(0, 6)
    )
    @settings(max_examples=40, deadline=None)
    def test_additive_over_disjoint_boxes(self, a, w, b, h):
        fam = geometric_family(2)
        left = Box(((a, a + w), (0, 3)))
        right = Box(((a + w + 1, a + w + 1 + b), (0, 3)))
        both = Box(((a, a + w + 1 + b), (0, 3)))
        assert fam.box_mass(left) + fam.box_mass(right) == fam.box_mass(both)


class TestAxisClosedForms:
    @given(st.integers(-8, 8), st.integers(0, 10), st.integers(1, 4))
    @settings(max_examples=60, deadline=None)
    def test_symmetric_range_mass(self, lo, width, stride):
        ax = SymmetricGeometricAxis()
        hi = lo + width
        expected = sum(
            (ax.weight(i) for i in range(lo, hi + 1) if (i - lo) % stride == 0),
            Fraction(0),
        )
        assert ax.range_mass(lo, hi, stride) == expected

    @given(st.integers(-8, 8))
    @settings(max_examples=30, deadline=None)
    def test_symmetric_prefix(self, t):
        ax = SymmetricGeometricAxis()
        expected = sum((ax.weight(i) for i in range(-40, t)), Fraction(0))
        # the tail below -40 is 2^-41/3-small; compare after adding it back
        tail = Fraction(1, 3 * 2 ** 40)
        assert ax.prefix(t) - expected == tail

    @given(st.integers(-6, 6), st.integers(0, 8), st.integers(1, 3))
    @settings(max_examples=50, deadline=None)
    def test_power_sum_log2_matches_brute(self, lo, width, stride):
        ax = SymmetricGeometricAxis()
        hi = lo + width
        alpha = 0.5
        brute = sum(
            float(ax.weight(i)) ** alpha
            for i in range(lo, hi + 1)
            if (i - lo) % stride == 0
        )
        got = 2.0 ** ax.range_power_log2(lo, hi, stride, alpha)
        assert math.isclose(got, brute, rel_tol=1e-12)


class TestPathCost:
    def test_worked_example(self):
        fam = geometric_family(2)
        cost = path_cost([(0, 0), (1, 0), (1, 1)], fam, (0.5, 0.5))
        assert math.isclose(cost, 0.8535533905932737, rel_tol=1e-12)

    def test_unit_weights_count_steps(self):
        box = Box(((0, 9), (0, 9)))
        fam = uniform_box_family(box, total=Fraction(100))
        path = [(0, 0), (1, 0), (2, 0), (2, 1)]
        assert path_cost(path, fam, 1) == 3 * fam.weight((0, 0))

    def test_single_step_exponent_one(self):
        fam = geometric_family(3)
        assert path_cost([(0, 0, 0), (1, 0, 0)], fam, 1) == fam.weight((0, 0, 0))

    def test_monotone_path_cost_below_box_mass(self):
        fam = geometric_family(2)
        box = Box(((0, 4), (0, 4)))
        path = [(0, 0), (1, 0), (1, 1), (2, 1), (2, 2), (3, 2)]
        assert path_cost(path, fam, 1) <= fam.box_mass(box)


class TestTypes:
    def test_multi_index_cone_flag(self):
        with pytest.raises(ValueError):
            MultiIndex((1, -1), nonnegative=True)
        assert MultiIndex((1, 2, 3)).d == 3

    def test_path_adjacency(self):
        with pytest.raises(ValueError):
            LatticePath(((0, 0), (1, 1)))
        p = LatticePath(((0, 0), (0, 1), (1, 1)))
        assert p.geodesic and len(p) == 2

    def test_nonmonotone_not_geodesic(self):
        p = LatticePath(((1, 1), (0, 1)))
        assert not p.geodesic

    def test_segment_points_and_lookup(self):
        s = Segment((3, 5), axis=1, count=4, stride=2)
        assert list(s.points()) == [(3, 5), (3, 7), (3, 9), (3, 11)]
        assert s.index_of((3, 9)) == 2
        assert s.index_of((3, 8)) is None
        assert s.index_of((4, 9)) is None

    def test_segment_ambient_guard(self):
        with pytest.raises(ValueError):
            Segment((0, 0), 0, 5, ambient=Box(((0, 2), (0, 2))))

    def test_table_family(self):
        fam = TableFamily({(0, 0): Fraction(1, 2), (1, 0): Fraction(1, 2)})
        assert fam.total_mass == 1
        with pytest.raises(ValueError):
            fam.weight((2, 2))


def test_log2_fraction_huge_values():
    q = Fraction(1, 2 ** 100_000)
    assert math.isclose(log2_fraction(q), -100_000.0, rel_tol=1e-12)
