"""Acceptance criteria 1-9, each at its stated tolerance and runtime.

Every criterion records a PASS/FAIL line, printed in the terminal summary.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest
from scipy.optimize import minimize

from extremalkit.cones import (DEFAULT_BUDGET, PolyCone, angular_hausdorff, circle_samples, contingent_estimate,
                               frechet_normal_cone_poly, limiting_normal_estimate, polar)
from extremalkit.corpus import load_example
from extremalkit.intersection import fuzzy_decompose, qualification_for, refined_decompose
from extremalkit.io import Problem
from extremalkit.sets import (Ball, Epigraph, GeneratedCone, Halfspace, PolyhedralCone, Shifted,
                              UnionOfConvexPieces)
from extremalkit.solver import (ConeSystem, Status, check_conic_extremality, check_nonoverlapping, minimize_phi,
                                solve)
from extremalkit.tangency import contingent_extremal_pipeline, limiting_euler_check, tne_check

TRIALS = 1000
R6 = math.sqrt(6)
S2 = math.sqrt(2) / 2


@contextmanager
def criterion(records, n, title, budget=None, note=""):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException:
        records.setdefault(n, []).append((False, title, time.perf_counter() - t0, note))
        raise
    dt = time.perf_counter() - t0
    ok = budget is None or dt < budget
    records.setdefault(n, []).append((ok, title, dt, note + ("" if ok else f" took {dt:.2f}s > {budget}s")))
    assert ok, f"criterion {n} ran {dt:.2f}s, budget {budget}s"


def example(example_id):
    doc, _ = load_example(example_id)
    return Problem.from_dict(doc)


def ex43_cones(m):
    return [Halfspace([0, -1])] + [Halfspace([-1 / i, 1]) for i in range(2, m + 1)]


def ex45(n):
    E = np.eye(n)
    cones = [Halfspace(E[0])] + [Halfspace(E[i] - E[i - 1]) for i in range(1, n)]
    shifts = np.zeros((n, n))
    shifts[0] = E[0]
    return ConeSystem.build(cones, shifts)


# -- 1 ---------------------------------------------------------------------------------------


def test_1_walkthrough(acceptance):
    with criterion(acceptance, 1, "two-cone walkthrough certificate", budget=1.0):
        cert = solve(example("walkthrough2cone").system()).certificate
        assert cert.status is Status.EXTREMAL
        assert cert.euler_residual <= 1e-8 and cert.norm_residual <= 1e-8
        np.testing.assert_allclose(cert.x_tilde, [0, -1 / 3], atol=1e-6)
        np.testing.assert_allclose(cert.x_star[0], [0, -R6 / 3], atol=1e-6)
        np.testing.assert_allclose(cert.x_star[1], [0, 2 * R6 / 3], atol=1e-6)


# -- 2 ---------------------------------------------------------------------------------------


@pytest.mark.parametrize("m", [5, 10, 20])
def test_2_ex43_truncations(acceptance, m):
    with criterion(acceptance, 2, "y<=x/i family: overlap witness and zero Euler", budget=1.0, note=f"m={m}"):
        cones = ex43_cones(m)
        tail = PolyhedralCone([[0, 1], [-1 / (m + 1), 1]])
        v = check_nonoverlapping(ConeSystem.build(cones, tail=tail))
        assert v.is_violated
        u = np.asarray(v.witness, dtype=float)
        u = u / np.linalg.norm(u)
        assert abs(u[1]) <= 1e-9 and u[0] > 0
        # normals (0,-1) and (-1,i): only the zero combination sums to zero
        e = limiting_euler_check([PolyCone.from_setspec(c) for c in cones])
        assert e.is_violated and e.detail["lp_value"] <= 1e-9


# -- 3 ---------------------------------------------------------------------------------------


def test_3_ex44_pipeline(acceptance):
    with criterion(acceptance, 3, "parabola plus halfplanes: extremal, conditions fail", budget=5.0):
        p = example("ex4.4")
        rep = contingent_extremal_pipeline(p.sets, p.point)
        assert rep.set_extremality.is_holds
        assert rep.extremality_conditions.is_violated


# -- 4 ---------------------------------------------------------------------------------------


@pytest.mark.parametrize("n", [4, 8, 16])
def test_4_ex45_truncations(acceptance, n):
    with criterion(acceptance, 4, "Hilbert-space example truncations: NotExtremal", budget=2.0, note=f"n={n}"):
        system = ex45(n)
        cert = solve(system).certificate
        assert cert.status is Status.NOT_EXTREMAL
        x = cert.feasible_point
        assert all(c.contains(x + a, 1e-9) for c, a in zip(system.cones, system.shifts))


# -- 5 ---------------------------------------------------------------------------------------


def test_5_contingent_fans_and_labels(acceptance):
    with criterion(acceptance, 5, "contingent fans and the local/contingent contrast"):
        fan = contingent_estimate(Epigraph("xsin1x"), [0, 0], DEFAULT_BUDGET)
        ref = circle_samples(lambda u: u[1] >= -abs(u[0]) - 1e-12)
        assert angular_hausdorff(fan.directions, ref) <= 0.05
        fan = contingent_estimate(Epigraph("square", {"coef": -1}), [0, 0], DEFAULT_BUDGET)
        ref = circle_samples(lambda u: u[1] >= -1e-12)
        assert angular_hausdorff(fan.directions, ref) <= 0.05

        p = example("ex3.3i")
        rep = contingent_extremal_pipeline(p.sets, p.point, local=True)
        assert rep.local_extremality.is_holds
        assert not rep.contingent_extremality.is_holds
        p = example("ex3.3ii")
        rep = contingent_extremal_pipeline(p.sets, p.point, local=True)
        assert rep.local_extremality.is_violated
        assert rep.contingent_extremality.is_holds


# -- 6 ---------------------------------------------------------------------------------------


def test_6_limiting_normals_minus_abs(acceptance):
    with criterion(acceptance, 6, "normals of y >= -|x| at the origin"):
        s = UnionOfConvexPieces([Halfspace([-1, -1]), Halfspace([1, -1])])
        fan = limiting_normal_estimate(s, [0, 0])
        targets = np.array([[S2, -S2], [-S2, -S2]])
        for r in fan.rays:
            r = r / np.linalg.norm(r)
            assert min(math.acos(min(1.0, r @ t)) for t in targets) <= 1e-2
        for t in targets:
            assert fan.contains(t, 1e-2) is not None
        assert frechet_normal_cone_poly(s, [0, 0]).is_trivial


# -- 7: property suites -----------------------------------------------------------------------


CONVEX = [Halfspace([0, 1]), PolyhedralCone([[1, 0], [-1, 0], [0, -1]]), GeneratedCone([[1, 0], [1, 1]]),
          PolyhedralCone([[1, 1], [-2, 1]])]
LIPSCHITZ_SETS = CONVEX + [UnionOfConvexPieces([Halfspace([-1, -1]), Halfspace([1, -1])]), Ball([1, 0], 0.5),
                           Epigraph("square", {"coef": -1}), Shifted(Halfspace([1, 1]), [0.5, 0]),
                           Epigraph("xsin1x")]


def test_7a_double_polar(acceptance):
    rng = np.random.default_rng(701)
    with criterion(acceptance, 7, "property suites", note="double polar"):
        for _ in range(TRIALS):
            n = int(rng.integers(2, 4))
            C = PolyCone.from_generators(rng.normal(size=(int(rng.integers(1, 6)), n)))
            assert polar(polar(C)).equals(C)


def test_7b_moreau(acceptance):
    rng = np.random.default_rng(702)
    with criterion(acceptance, 7, "property suites", note="Moreau"):
        for _ in range(TRIALS):
            C = PolyhedralCone(rng.normal(size=(int(rng.integers(1, 4)), 3)))
            x = rng.normal(size=3) * 3
            p = C.project(x).point
            assert abs((x - p) @ p) <= 1e-8 * max(1.0, x @ x)
            assert C.contains(p, 1e-9)


def test_7c_projection_lipschitz(acceptance):
    rng = np.random.default_rng(703)
    with criterion(acceptance, 7, "property suites", note="Lipschitz"):
        for k in range(TRIALS):
            s = LIPSCHITZ_SETS[k % len(LIPSCHITZ_SETS)]
            x, y = rng.normal(size=(2, 2)) * 2
            assert abs(s.dist(x) - s.dist(y)) <= np.linalg.norm(x - y) + 1e-8
            if s.is_convex:
                px, py = s.project(x).point, s.project(y).point
                assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-8


def test_7d_mm_descent(acceptance):
    rng = np.random.default_rng(704)
    with criterion(acceptance, 7, "property suites", note="MM descent"):
        for _ in range(TRIALS):
            m = int(rng.integers(2, 5))
            system = ConeSystem.build([Halfspace(a) for a in rng.normal(size=(m, 2))], rng.normal(size=(m, 2)))
            h = minimize_phi(system, max_iter=300, diverge_radius=1e12).history
            assert all(b <= a + 1e-12 * max(1.0, a) for a, b in zip(h, h[1:]))


def test_7e_frechet_inclusion(acceptance):
    rng = np.random.default_rng(705)
    with criterion(acceptance, 7, "property suites", note="normals at cone points"):
        for _ in range(TRIALS):
            s = PolyhedralCone(rng.normal(size=(3, 2)))
            N0 = frechet_normal_cone_poly(s, np.zeros(2))
            w = s.project(rng.normal(size=2) * 3).point
            assert N0.includes(frechet_normal_cone_poly(s, w))


def test_7f_scaling_invariance(acceptance):
    rng = np.random.default_rng(706)
    etas = (1e-2, 1.0, 1e2)
    with criterion(acceptance, 7, "property suites", note="scaling invariance"):
        for _ in range(TRIALS):
            cones = [Halfspace(a) for a in rng.normal(size=(3, 2))]
            S = rng.normal(size=(3, 2))
            verdicts = {check_conic_extremality(ConeSystem.build(cones, eta * S), search=False).outcome
                        for eta in etas}
            assert len(verdicts) == 1


def corpus_sets():
    out = []
    for eid in ("ex4.4", "ex3.3i", "ex3.3ii"):
        p = example(eid)
        out += [(f"{eid}/{i + 1}", s, p.point) for i, s in enumerate(p.sets)]
    return out


def test_7g_tne_on_corpus(acceptance):
    with criterion(acceptance, 7, "property suites", note="TNE on corpus sets"):
        rays = 0
        for name, s, xbar in corpus_sets():
            rep = tne_check(s, xbar)
            assert not rep.outcome.is_violated, name
            rays += rep.trials
        assert rays > 0


def test_7z_total_runtime(acceptance):
    total = sum(p[2] for p in acceptance.get(7, []))
    ok = total < 60.0
    acceptance.setdefault(7, []).append((ok, "property suites", 0.0, f"total {total:.1f}s < 60s"))
    assert ok, f"property suites took {total:.1f}s"


# -- 8 ---------------------------------------------------------------------------------------


def test_8_decomposition(acceptance):
    with criterion(acceptance, 8, "quadrant decomposition and QC", budget=1.0):
        p = example("decomp-quadrant")
        cones = p.cones
        for eps in (0.1, 0.01):
            assert fuzzy_decompose([1, 1], eps, cones).residual <= eps
        D = refined_decompose([1, 1], cones)
        assert D.residual <= 1e-7
        np.testing.assert_allclose(D.terms[0], [0, 2], atol=1e-7)
        np.testing.assert_allclose(D.terms[1], [4, 0], atol=1e-7)
        assert qualification_for(cones).outcome.is_holds
        assert qualification_for([Halfspace([0, 1]), Halfspace([0, -1])]).outcome.is_violated


# -- 9 ---------------------------------------------------------------------------------------


def cone_dist2(c):
    """Squared distance to a planar convex cone, from its facets and generators only."""
    C = PolyCone.from_setspec(c)
    A = np.asarray(C.facet_normals, dtype=float).reshape(-1, 2)
    G = np.asarray(C.generators, dtype=float).reshape(-1, 2)
    if len(G):
        G = G / np.linalg.norm(G, axis=1)[:, None]

    def d2(Z):
        inside = np.all(Z @ A.T <= 1e-12, axis=1) if len(A) else np.ones(len(Z), dtype=bool)
        zz = np.einsum("ij,ij->i", Z, Z)
        if len(G):
            # outside the cone the nearest point lies on an extreme ray
            zz = np.min(zz[:, None] - np.maximum(Z @ G.T, 0.0) ** 2, axis=1)
        return np.where(inside, 0.0, np.maximum(zz, 0.0))

    return d2


def grid_minimizer(system, half, n=400):
    dists = [cone_dist2(c) for c in system.cones]

    def phi2(Z):
        return sum(w * d(Z + a) for d, a, w in zip(dists, system.shifts, system.weights))

    g = np.linspace(-half, half, n)
    X, Y = np.meshgrid(g, g, indexing="ij")
    P = np.column_stack([X.ravel(), Y.ravel()])
    vals = phi2(P)
    k = int(np.argmin(vals))
    ref = minimize(lambda z: float(phi2(z[None])[0]), P[k], method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 20_000})
    return ref.x, float(ref.fun), P[vals <= vals[k] + 1e-12]


@pytest.mark.parametrize("example_id", ["walkthrough2cone", "ex4.3", "qc-pair", "decomp-quadrant"])
def test_9_grid_oracle(acceptance, example_id):
    with criterion(acceptance, 9, "grid minimizer agreement on 2-D cone instances", note=example_id):
        system = example(example_id).system()
        x = minimize_phi(system).x
        half = 2.0 * max(1.0, float(np.max(np.abs(x))))
        xg, fg, near = grid_minimizer(system, half)
        assert abs(system.phi2(x) - fg) <= 1e-3
        if len(near) == 1:
            assert np.linalg.norm(x - xg) <= 1e-3
        else:
            # flat minimum (a feasible region): the solver point must lie in it
            assert system.phi2(x) <= fg + 1e-3
