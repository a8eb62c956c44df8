import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import minimize

from extremalkit.cones import PolyCone
from extremalkit.core import QCViolated, StrictNegativityFails
from extremalkit.intersection import (Decomposition, LiftedHypograph, check_normal_qualification,
                                      check_strict_negativity, decomposition_lp, fuzzy_decompose,
                                      interior_inclusion_check, interior_sample_excluded, lifted_system,
                                      normal_cone_at_origin, qualification_for, refined_decompose,
                                      regular_equality_check)
from extremalkit.sets import Halfspace, PolyhedralCone, UnionOfConvexPieces

LOWER, UPPER, LEFT = Halfspace([0, 1]), Halfspace([0, -1]), Halfspace([1, 0])
QUADRANT = [LOWER, LEFT]


def gens(*rows):
    return PolyCone.from_generators(np.array(rows, dtype=float))


def weighted_sum(terms):
    return sum(0.5 ** (i + 1) * v for i, v in enumerate(terms))


def in_normal_cone(cone, v, tol=1e-7):
    return any(N.contains_generated(v, tol) for N in normal_cone_at_origin(cone))


class TestQualification:
    def test_example_family_holds(self):
        N = [gens([0, -1])] + [gens([-1, i]) for i in range(2, 11)]
        assert check_normal_qualification(N).outcome.is_holds

    def test_opposite_halfplanes(self):
        rep = check_normal_qualification([gens([0, 1]), gens([0, -1])])
        assert rep.outcome.is_violated
        lam = [np.asarray(l) for l in rep.witness_lambdas]
        np.testing.assert_allclose(lam[0], lam[1])
        assert rep.lp_value > 0

    def test_independent_rays(self):
        assert check_normal_qualification([gens([1, 0]), gens([0, 1])]).outcome.is_holds

    def test_from_cones(self):
        assert qualification_for([LOWER, UPPER]).outcome.is_violated
        assert qualification_for(QUADRANT).outcome.is_holds

    def test_union_normal_cone(self):
        union = UnionOfConvexPieces([Halfspace([-1, -1]), Halfspace([1, -1])])
        pieces = normal_cone_at_origin(union)
        s = np.sqrt(0.5)
        assert any(p.contains_generated([s, -s]) for p in pieces)
        assert any(p.contains_generated([-s, -s]) for p in pieces)
        assert not any(p.contains_generated([0, 1]) for p in pieces)


class TestFuzzy:
    @pytest.mark.parametrize("eps", [0.1, 0.01])
    def test_quadrant(self, eps):
        D = fuzzy_decompose([1, 1], eps, QUADRANT)
        assert D.residual <= eps
        assert D.lift_residual <= eps
        assert np.linalg.norm(weighted_sum(D.terms) - [1, 1]) <= eps
        for c, v in zip(QUADRANT, D.terms):
            assert in_normal_cone(c, v)

    def test_zero(self):
        D = fuzzy_decompose([0, 0], 0.1, QUADRANT)
        assert D.residual == 0 and all(not np.any(v) for v in D.terms)

    def test_qc_violation(self):
        with pytest.raises(QCViolated) as e:
            fuzzy_decompose([0, 1], 0.1, [LOWER, UPPER])
        assert e.value.report.outcome.is_violated

    def test_not_a_normal(self):
        with pytest.raises(ValueError):
            fuzzy_decompose([-1, 0], 0.1, QUADRANT)

    @pytest.mark.parametrize("seed", range(6))
    @pytest.mark.parametrize("eps", [0.1, 0.01])
    def test_random_pairs_against_lp(self, seed, eps):
        rng = np.random.default_rng(seed)
        while True:
            cones = [PolyhedralCone(rng.normal(size=(2, 2))) for _ in range(2)]
            if qualification_for(cones).outcome.is_holds:
                break
        # a normal of the intersection: combination of the cones' normal generators
        G = np.vstack([normal_cone_at_origin(c)[0].generators for c in cones])
        x_star = G.T @ rng.uniform(0.2, 1.0, len(G))
        assert decomposition_lp(x_star, cones) is not None
        D = fuzzy_decompose(x_star, eps, cones)
        assert D.residual <= eps
        for c, v in zip(cones, D.terms):
            assert in_normal_cone(c, v)


class TestRefined:
    def test_quadrant_exact(self):
        D = refined_decompose([1, 1], QUADRANT)
        assert D.residual <= 1e-7
        np.testing.assert_allclose(D.terms[0], [0, 2], atol=1e-7)
        np.testing.assert_allclose(D.terms[1], [4, 0], atol=1e-7)

    def test_strict_negativity_fails(self):
        with pytest.raises(StrictNegativityFails) as e:
            refined_decompose([1, 0], QUADRANT)
        np.testing.assert_allclose(e.value.witness, [0, -1], atol=1e-12)

    def test_single_cone(self):
        C = PolyhedralCone([[1, 0], [0, 1]])  # third quadrant; polar is the first quadrant
        D = refined_decompose([0.3, 0.7], [C])
        np.testing.assert_allclose(D.terms[0], [0.6, 1.4], atol=1e-7)
        assert D.residual <= 1e-7

    def test_strict_negativity_check(self):
        assert check_strict_negativity(QUADRANT, [1, 1]).is_holds
        assert check_strict_negativity(QUADRANT, [1, 0]).is_violated

    @pytest.mark.parametrize("eps", [0.5, 0.1, 0.01])
    def test_fuzzy_within_refined(self, eps):
        R = refined_decompose([1, 1], QUADRANT)
        F = fuzzy_decompose([1, 1], eps, QUADRANT)
        assert F.residual <= min(eps, R.residual + 1e-7)

    def test_json_round_trip(self):
        D = refined_decompose([1, 1], QUADRANT)
        d = D.to_dict()
        assert [t["index"] for t in d["terms"]] == [1, 2]
        assert Decomposition.from_dict(d).to_dict() == d


class TestInterior:
    def test_quadrant_samples_decompose(self):
        assert interior_inclusion_check(QUADRANT).is_holds

    def test_boundary_excluded(self):
        assert interior_sample_excluded(QUADRANT, [1, 0])
        assert not interior_sample_excluded(QUADRANT, [1, 1])

    def test_regular_equality(self):
        assert regular_equality_check(QUADRANT).is_holds
        assert regular_equality_check([PolyhedralCone([[1, 0], [0, 1]]), Halfspace([1, 1])]).is_holds


class TestLift:
    @pytest.mark.parametrize("eps", [0.0, 0.3])
    def test_membership_matches_inequality(self, eps):
        rng = np.random.default_rng(1)
        xs = np.array([1.0, 2.0])
        O1 = LiftedHypograph(LOWER, xs, eps)
        Z = rng.normal(size=(10_000, 3)) * 2
        X, a = Z[:, :2], Z[:, 2]
        exact = (X[:, 1] <= 0) & (a <= X @ xs - eps * np.linalg.norm(X, axis=1))
        got = O1.contains_batch(Z, tol=0.0)
        assert np.array_equal(got, exact)

    @given(seed=st.integers(0, 10_000), eps=st.floats(0.0, 0.9))
    def test_projection_against_slsqp(self, seed, eps):
        rng = np.random.default_rng(seed)
        xs = rng.normal(size=2)
        base = Halfspace(rng.normal(size=2))
        O1 = LiftedHypograph(base, xs, eps)
        z = rng.normal(size=3) * 2
        p = O1.project(z).point
        assert O1.contains(p, 1e-8)
        a = base.normal if hasattr(base, "normal") else None
        cons = [{"type": "ineq", "fun": lambda q: -(a @ q[:2])},
                {"type": "ineq", "fun": lambda q: xs @ q[:2] - eps * np.sqrt(q[:2] @ q[:2] + 1e-300) - q[2]}]
        best = np.inf
        for start in (np.zeros(3), p, base.project(z[:2]).point.tolist() + [-10.0]):
            r = minimize(lambda q: np.sum((q - z) ** 2), np.asarray(start, float), method="SLSQP",
                         constraints=cons, options={"ftol": 1e-15, "maxiter": 1000})
            if O1.contains(r.x, 1e-7):
                best = min(best, np.linalg.norm(r.x - z))
        assert np.linalg.norm(p - z) <= best + 1e-6

    def test_lifted_system_shape(self):
        sys_ = lifted_system(QUADRANT, [1, 1], 0.05)
        assert sys_.dim == 3 and sys_.m == 3
        np.testing.assert_allclose(sys_.shifts[0], [0, 0, 1])
