import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from extremalkit.cones import (DEFAULT_BUDGET, PolyCone, PolyConeUnion, angular_hausdorff, as_polycone,
                               circle_samples, contingent_estimate, frechet_normal_cone_poly, frechet_normal_test,
                               limiting_normal_estimate, polar, weak_contingent_estimate)
from extremalkit.core import EmptyFan, NotConvex, UnsupportedKind
from extremalkit.sets import (Ball, Epigraph, GeneratedCone, Halfspace, PolyhedralCone, UnionOfConvexPieces,
                              WholeSpace)

S2 = math.sqrt(2) / 2


def minus_abs():
    return UnionOfConvexPieces([Halfspace([-1, -1]), Halfspace([1, -1])])


class TestContingent:
    def test_oscillating_epigraph(self):
        fan = contingent_estimate(Epigraph("xsin1x"), [0, 0])
        assert fan.replay(Epigraph("xsin1x"))
        ref = circle_samples(lambda u: u[1] >= -abs(u[0]) - 1e-12)
        assert angular_hausdorff(fan.directions, ref) <= 0.05

    def test_concave_parabola_gives_upper_halfplane(self):
        fan = contingent_estimate(Epigraph("square", {"coef": -1}), [0, 0])
        ref = circle_samples(lambda u: u[1] >= -1e-12)
        assert angular_hausdorff(fan.directions, ref) <= 0.05

    def test_isolated_point(self):
        with pytest.raises(EmptyFan):
            contingent_estimate(Ball([0, 0], 0), [0, 0])

    def test_base_point_outside(self):
        with pytest.raises(ValueError):
            contingent_estimate(Halfspace([0, 1]), [0, 1])

    def test_weak_alias(self):
        assert weak_contingent_estimate is contingent_estimate

    def test_unit_directions_and_csv(self):
        fan = contingent_estimate(Halfspace([0, 1]), [0, 0])
        np.testing.assert_allclose(np.linalg.norm(fan.directions, axis=1), 1, atol=1e-9)
        lines = fan.to_csv().splitlines()
        assert lines[0] == "t,v1,v2" and len(lines) == len(fan.samples) + 1

    def test_seed_determinism(self):
        b = dataclasses.replace(DEFAULT_BUDGET, seed=7)
        a1 = contingent_estimate(minus_abs(), [0, 0], b).directions
        a2 = contingent_estimate(minus_abs(), [0, 0], b).directions
        assert np.array_equal(a1, a2)

    @pytest.mark.parametrize("s", [minus_abs(), Halfspace([1, 2]), Epigraph("xsin1x")], ids=lambda s: s.kind)
    def test_finer_grid_covers_coarser(self, s):
        coarse = dataclasses.replace(DEFAULT_BUDGET, scales=tuple(2.0 ** -k for k in range(1, 21)))
        fine = dataclasses.replace(DEFAULT_BUDGET, scales=tuple(2.0 ** (-k / 2) for k in range(2, 41)))
        A = contingent_estimate(s, [0, 0], coarse).directions
        B = contingent_estimate(s, [0, 0], fine).directions
        cos = np.max(A @ B.T, axis=1)
        assert np.all(cos >= math.cos(1e-3) - 1e-12)


class TestPolar:
    def test_ray_up(self):
        P = polar(PolyCone.from_generators([[0, 1]]))
        assert P.contains([5, -1]) and not P.contains([0, 1])
        np.testing.assert_allclose(P.facet_normals, [[0, 1]])

    def test_trivial_cone(self):
        assert polar(PolyCone.trivial(2)).is_whole

    @pytest.mark.parametrize("i", [2, 5, 20])
    def test_halfplane_graph(self, i):
        P = polar(PolyCone.from_setspec(Halfspace([-1 / i, 1])))
        d = np.array([-1.0, i]) / math.hypot(1, i)
        assert P.equals(PolyCone.from_generators([d]))

    def test_nonconvex_rejected(self):
        with pytest.raises(NotConvex):
            polar(as_polycone(minus_abs()))

    @given(seed=st.integers(0, 10_000), n=st.integers(2, 4), k=st.integers(1, 6))
    def test_double_polar(self, seed, n, k):
        G = np.random.default_rng(seed).normal(size=(k, n))
        C = PolyCone.from_generators(G)
        assert polar(polar(C)).equals(C)


class TestFrechet:
    def test_minus_abs_is_trivial(self):
        assert frechet_normal_cone_poly(minus_abs(), [0, 0]).is_trivial

    def test_lower_halfplane(self):
        N = frechet_normal_cone_poly(Halfspace([0, 1]), [0, 0])
        assert N.equals(PolyCone.from_generators([[0, 1]]))

    def test_non_polyhedral(self):
        with pytest.raises(UnsupportedKind):
            frechet_normal_cone_poly(Epigraph("xsin1x"), [0, 0])

    @given(seed=st.integers(0, 10_000))
    def test_normals_at_cone_points_lie_in_normal_at_origin(self, seed):
        rng = np.random.default_rng(seed)
        s = PolyhedralCone(rng.normal(size=(3, 2)))
        N0 = frechet_normal_cone_poly(s, np.zeros(2))
        w = s.project(rng.normal(size=2) * 3).point
        assert N0.includes(frechet_normal_cone_poly(s, w))

    def test_epsilon_normal_test(self):
        v = frechet_normal_test(minus_abs(), [0, 0], [0, -1], 0.0)
        assert v.is_violated
        assert minus_abs().contains(v.witness)
        assert frechet_normal_test(Epigraph("xsin1x"), [0, 0], [0, 0], 0.0).is_holds
        assert frechet_normal_test(Halfspace([0, 1]), [0, 0], [0, 1], 0.0).is_holds


class TestLimitingNormals:
    def test_minus_abs(self):
        fan = limiting_normal_estimate(minus_abs(), [0, 0])
        got = fan.rays / np.linalg.norm(fan.rays, axis=1)[:, None]
        for target in ([S2, -S2], [-S2, -S2]):
            assert fan.contains(target, 1e-2) is not None
        # every ray satisfies u2 = -|u1|
        assert np.all(np.abs(got[:, 1] + np.abs(got[:, 0])) <= 1e-2)

    def test_lower_halfplane(self):
        fan = limiting_normal_estimate(Halfspace([0, 1]), [0, 0])
        assert len(fan.rays) == 1
        np.testing.assert_allclose(fan.rays[0], [0, 1], atol=1e-9)

    def test_whole_space(self):
        with pytest.raises(EmptyFan):
            limiting_normal_estimate(WholeSpace(2), [0, 0])

    def test_provenance_replays(self):
        s = minus_abs()
        fan = limiting_normal_estimate(s, [0, 0])
        for ray, (x, w, a) in zip(fan.rays, fan.provenance):
            np.testing.assert_allclose(s.project(x).point, w, atol=1e-12)
            np.testing.assert_allclose(a * (x - w), ray, atol=1e-12)

    @pytest.mark.parametrize("seed", range(4))
    def test_rays_in_polar_of_convex_cone(self, seed):
        C = PolyhedralCone(np.random.default_rng(seed).normal(size=(3, 3)))
        fan = limiting_normal_estimate(C, np.zeros(3))
        P = polar(PolyCone.from_setspec(C))
        assert all(P.contains_generated(r, 1e-7) for r in fan.rays)


def test_polycone_union_round_trip():
    U = as_polycone(minus_abs())
    assert isinstance(U, PolyConeUnion)
    assert len(U.pieces) == 2
    d = U.to_dict()
    assert d["pieces"][0] == U.pieces[0].to_dict()


def test_generated_cone_as_polycone():
    C = as_polycone(GeneratedCone([[1, 0], [1, 1]]))
    assert C.contains([2, 1]) and not C.contains([0, 1])
