"""Fréchet normals to intersections of cones via lifted extremal systems.

Given cones ``L_1..L_m`` in R^n and a Fréchet normal ``x*`` to their
intersection at the origin, the cones

    O_1 = {(x, a) : x in L_1, a <= <x*, x> - eps |x|},    O_i = L_i x R_+

form an extremal system in R^(n+1) (shift ``(0, gamma)`` on ``O_1``). The
conic solver's certificate ``(x*_i, lambda_i)`` maps back to a
decomposition ``x* ~ sum 2^-i x~*_i`` with ``x~*_i = 2 x*_i / lambda_1``.

Members past the truncation are the whole space, so all lifted tail members
equal ``R^n x R_+``; they are merged into one extra cone of weight ``2^-m``,
which reproduces their contribution to the distance series exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import brentq

from . import polyhedra as ph
from .cones import PolyCone, PolyConeUnion, as_polycone, frechet_normal_cone_poly, intersect, polar
from .core import (
    DEFAULT_TOL,
    LiftProjectionFailure,
    QCViolated,
    StrictNegativityFails,
    Tolerances,
    UnsupportedKind,
    Verdict,
    as_vec,
    frozen,
    to_jsonable,
)
from .sets import ProjectionResult, Product, SetSpec, UnionOfConvexPieces, WholeSpace
from .solver import ConeSystem, Status, common_directions, solve


# -- the lifted first member ------------------------------------------------------------


class LiftedHypograph(SetSpec):
    """``{(x, a) : x in base, a <= <x*, x> - eps |x|}``; convex whenever ``base`` is."""

    kind = "lifted_hypograph"
    cheap_projection = False

    def __init__(self, base: SetSpec, x_star, epsilon: float):
        if epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        self.base = base
        self.x_star = frozen(as_vec(x_star, base.dim))
        self.epsilon = float(epsilon)
        self.dim = base.dim + 1
        if self.epsilon == 0 and base.pieces() is not None:
            self.cheap_projection = base.cheap_projection

    def g(self, x: np.ndarray) -> float:
        return float(self.x_star @ x) - self.epsilon * float(np.linalg.norm(x))

    def contains(self, z, tol=None):
        tol = DEFAULT_TOL.membership if tol is None else tol
        z = as_vec(z, self.dim)
        return self.base.contains(z[:-1], tol) and z[-1] <= self.g(z[:-1]) + tol

    def contains_batch(self, Z, tol=None):
        tol = DEFAULT_TOL.membership if tol is None else tol
        Z = np.atleast_2d(Z)
        X, a = Z[:, :-1], Z[:, -1]
        g = X @ self.x_star - self.epsilon * np.linalg.norm(X, axis=1)
        return self.base.contains_batch(X, tol) & (a <= g + tol)

    is_cone = property(lambda self: self.base.is_cone)
    is_convex = property(lambda self: self.base.is_convex)

    def pieces(self):
        if self.epsilon != 0:
            return None
        pcs = self.base.pieces()
        if pcs is None:
            return None
        n = self.base.dim
        out = []
        for A, b in pcs:
            top = np.hstack([A, np.zeros((len(A), 1))])
            row = np.append(-self.x_star, 1.0)[None, :]
            out.append((np.vstack([top, row]), np.append(b, 0.0)))
        return out

    def _project(self, z):
        pcs = self.pieces()
        if pcs is not None:
            return _project_pieces(pcs, z)
        members = self.base.members if isinstance(self.base, UnionOfConvexPieces) else (self.base,)
        if not all(m.is_convex for m in members):
            raise LiftProjectionFailure("lifted projection needs a base made of convex pieces")
        best = None
        for m in members:
            p = _project_lift_convex(m, self.x_star, self.epsilon, z[:-1], float(z[-1]))
            d = float(np.linalg.norm(z - p))
            if best is None or d < best[1] - 1e-12:
                best = (p, d)
        return ProjectionResult(best[0], best[1])

    def to_dict(self):
        return {"kind": self.kind, "base": self.base.to_dict(), "x_star": self.x_star.tolist(),
                "epsilon": self.epsilon}


def _project_pieces(pcs, z) -> ProjectionResult:
    best = None
    for A, b in pcs:
        if np.any(b):
            raise LiftProjectionFailure("lifted pieces must be cones")
        p, ok = ph.dykstra_polycone(A, z)
        if not ok:
            raise LiftProjectionFailure("Dykstra did not converge on a lifted piece")
        d = float(np.linalg.norm(z - p))
        if best is None or d < best[1] - 1e-12:
            best = (p, d)
    return ProjectionResult(best[0], best[1])


def _project_hypo_cone(y: np.ndarray, beta: float, xs: np.ndarray, eps: float) -> tuple[np.ndarray, float]:
    """Nearest point of ``K = {(x, a) : eps |x| + a <= <xs, x>}`` to ``(y, beta)``.

    For a multiplier ``mu`` the Lagrangian minimizer is ``a = beta - mu`` and
    ``x = q max(0, 1 - mu eps / |q|)`` with ``q = y + mu xs`` (soft threshold).
    The constraint residual along it is the dual derivative, hence
    nonincreasing in ``mu``; its root gives the projection.
    """
    if eps * float(np.linalg.norm(y)) + beta <= float(xs @ y):
        return y.copy(), beta

    def primal(mu):
        q = y + mu * xs
        nq = float(np.linalg.norm(q))
        shrink = max(0.0, 1.0 - mu * eps / nq) if nq > 0 else 0.0
        return q * shrink, beta - mu

    def F(mu):
        x, a = primal(mu)
        return eps * float(np.linalg.norm(x)) + a - float(xs @ x)

    hi = max(1.0, abs(beta))
    while F(hi) > 0:
        hi *= 2.0
        if hi > 1e300:
            raise LiftProjectionFailure("no multiplier bracket for the lifted projection")
    mu = brentq(F, 0.0, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps, maxiter=500)
    return primal(mu)


def _project_lift_convex(P: SetSpec, xs: np.ndarray, eps: float, y: np.ndarray, beta: float) -> np.ndarray:
    """Nearest point of ``{(x, a) : x in P, a <= <xs, x> - eps |x|}`` to ``(y, beta)``.

    ``P`` is a convex polyhedral cone ``{A x <= 0}``. The active rows at the
    answer pin ``x`` to a subspace; restricted to it the set is again of the
    form handled by ``_project_hypo_cone``. Every row subset is tried and the
    closest feasible candidate wins, which is exact.
    """
    pcs = P.pieces()
    if pcs is None or len(pcs) != 1:
        raise LiftProjectionFailure("lifted projection needs a convex polyhedral base")
    A = pcs[0][0]
    n = len(y)
    An = ph.normalize_rows(A) if len(A) else A
    best = None
    scale = max(1.0, float(np.linalg.norm(y)), abs(beta))
    for k in range(0, min(len(An), n) + 1):
        for S in itertools.combinations(range(len(An)), k):
            Q = null_space(An[list(S)]) if S else np.eye(n)
            if Q.shape[1] == 0:
                x, a = np.zeros(n), min(beta, 0.0)
            else:
                u, a = _project_hypo_cone(Q.T @ y, beta, Q.T @ xs, eps)
                x = Q @ u
            if len(An) and float(np.max(An @ x)) > 1e-10 * scale:
                continue
            d = float(np.linalg.norm(x - y) ** 2 + (a - beta) ** 2)
            if best is None or d < best[1]:
                best = (np.append(x, a), d)
    if best is None:
        raise LiftProjectionFailure("no feasible active set")
    return best[0]


# -- limiting normal cones of polyhedral cones ------------------------------------------------


def normal_cone_at_origin(c) -> list[PolyCone]:
    """Limiting normal cone ``N(0; L)`` of a polyhedral cone or union, as convex pieces.

    For convex ``L`` it is the polar. For a union it is the union of the
    Fréchet cones at face representatives: the apex, each generator ray and
    each sum of two generators of each piece.
    """
    if isinstance(c, PolyCone):
        return [polar(c)]
    pc = as_polycone(c) if not isinstance(c, PolyConeUnion) else c
    if isinstance(pc, PolyCone):
        return [polar(pc)]
    spec = pc.to_setspec()
    reps = [np.zeros(pc.dim)]
    for p in pc.pieces:
        G = p.generators
        reps.extend(G)
        for a, b in itertools.combinations(range(len(G)), 2):
            reps.append(G[a] + G[b])
        if len(G):
            reps.append(G.sum(axis=0))
    out: list[PolyCone] = []
    for w in reps:
        if not spec.contains(w, 1e-10):
            continue
        N = frechet_normal_cone_poly(spec, w)
        if N.is_trivial:
            continue
        if not any(N.equals(M) for M in out):
            out.append(N)
    return out or [PolyCone.trivial(pc.dim)]


# -- qualification condition ------------------------------------------------------------------


@dataclass
class QCReport:
    outcome: Verdict
    lp_value: float
    witness_lambdas: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return to_jsonable({"outcome": self.outcome.to_dict(), "lp_value": self.lp_value,
                            "witness_lambdas": self.witness_lambdas})


def check_normal_qualification(normal_cones: list, tol: float = 1e-9) -> QCReport:
    """LP test: only the trivial nonnegative combination of normal generators sums to zero.

    ``normal_cones[i]`` is a PolyCone or a list of PolyCone pieces (a union);
    unions are enumerated piecewise.
    """
    options = []
    for N in normal_cones:
        if isinstance(N, PolyCone):
            options.append([N])
        elif isinstance(N, (list, tuple)) and all(isinstance(p, PolyCone) for p in N):
            options.append(list(N))
        else:
            raise UnsupportedKind("normal cones must be finitely generated")
    best = (0.0, None)
    for combo in itertools.product(*options):
        blocks = [p.generators for p in combo]
        value, lams = ph.nontrivial_zero_combination(blocks)
        if value > best[0]:
            best = (value, lams, blocks)
    if best[0] <= tol:
        return QCReport(Verdict.holds(lp_value=best[0]), best[0], [])
    value, lams, blocks = best
    total = sum(B.T @ l for B, l in zip(blocks, lams) if len(B))
    assert np.linalg.norm(total) <= 1e-9, "QC witness does not sum to zero"
    return QCReport(Verdict.violated([l.tolist() for l in lams], lp_value=value), value, lams)


def qualification_for(cones: list) -> QCReport:
    return check_normal_qualification([normal_cone_at_origin(c) for c in cones])


# -- decompositions ----------------------------------------------------------------------------


@dataclass
class Decomposition:
    x_star: np.ndarray
    terms: list
    residual: float
    epsilon: float
    mode: str
    lambda_1: float = 0.0
    proof_bound: float = 0.0
    certificate_status: str = ""
    lift_residual: float | None = None

    def reconstruct(self) -> np.ndarray:
        return sum((0.5 ** (i + 1)) * v for i, v in enumerate(self.terms))

    def to_dict(self) -> dict:
        return to_jsonable({
            "x_star": self.x_star,
            "terms": [{"index": i + 1, "vector": v} for i, v in enumerate(self.terms)],
            "residual": self.residual,
            "epsilon": self.epsilon,
            "mode": self.mode,
            "lambda_1": self.lambda_1,
            "proof_bound": self.proof_bound,
            "lift_residual": self.lift_residual,
        })

    @classmethod
    def from_dict(cls, d: dict) -> "Decomposition":
        terms = [np.asarray(t["vector"], dtype=float) for t in sorted(d["terms"], key=lambda t: t["index"])]
        return cls(np.asarray(d["x_star"], dtype=float), terms, d["residual"], d["epsilon"], d["mode"],
                   d.get("lambda_1", 0.0), d.get("proof_bound", 0.0), lift_residual=d.get("lift_residual"))


def _intersection_generators(cones: list) -> np.ndarray:
    return common_directions(list(cones))


def is_frechet_normal_of_intersection(cones: list, x_star, tol: float = 1e-9) -> bool:
    x_star = as_vec(x_star)
    G = _intersection_generators(cones)
    return all(float(x_star @ g) <= tol * np.linalg.norm(g) for g in G)


def check_strict_negativity(cones: list, x_star, tol: float = 1e-12) -> Verdict:
    """Exact test of ``<x*, x> < 0`` on the intersection minus the origin (ray enumeration)."""
    x_star = as_vec(x_star)
    for g in _intersection_generators(cones):
        u = g / np.linalg.norm(g)
        if float(x_star @ u) >= -tol:
            return Verdict.violated(u, inner=float(x_star @ u))
    return Verdict.holds()


def lifted_system(cones: list, x_star, eps: float, gamma: float = 1.0) -> ConeSystem:
    cones = list(cones)
    n = cones[0].dim
    m = len(cones)
    lifted = [LiftedHypograph(cones[0], x_star, eps)]
    lifted += [Product(c, 1) for c in cones[1:]]
    lifted.append(Product(WholeSpace(n), 1))
    W = np.append(0.5 ** np.arange(1, m + 1), 0.5 ** m)
    S = np.zeros((m + 1, n + 1))
    S[0, -1] = gamma
    return ConeSystem.build(lifted, S, W)


def _map_back(cones, x_star, cert, tol: Tolerances, mode: str, eps: float) -> Decomposition:
    n = len(x_star)
    m = len(cones)
    lam1 = float(cert.x_star[0][-1])
    if lam1 <= 1e-9:
        raise QCViolated(f"lifted certificate has lambda_1 = {lam1:.3e}; the qualification condition fails")
    terms = [None] * m
    for i in range(1, m):
        terms[i] = 2.0 * cert.x_star[i][:n] / lam1
    rest = sum((0.5 ** (i + 1)) * terms[i] for i in range(1, m)) if m > 1 else np.zeros(n)
    r = x_star - rest
    # best first term: project 2r onto N(0; L_1)
    best = None
    for N in normal_cone_at_origin(cones[0]):
        if N.is_trivial:
            cand = np.zeros(n)
        else:
            lam, _ = ph.nnls_bb(N.generators, 2.0 * r)
            cand = N.generators.T @ lam
        d = float(np.linalg.norm(r - 0.5 * cand))
        if best is None or d < best[1]:
            best = (cand, d)
    terms[0] = best[0]
    D = Decomposition(x_star, terms, 0.0, eps, mode, lam1, 2 * eps, cert.status.value)
    D.residual = float(np.linalg.norm(x_star - D.reconstruct()))
    return D


def _polish(cones, D: Decomposition) -> None:
    """Replace the lifted terms by the NNLS-best combination of normal generators when it is closer.

    Only for convex polyhedral families, where each ``N(0; L_i)`` is one
    finitely generated cone; the lifted residual stays on record.
    """
    blocks = [normal_cone_at_origin(c) for c in cones]
    if any(len(b) != 1 for b in blocks):
        return
    Gs = [b[0].generators for b in blocks]
    W = 0.5 ** np.arange(1, len(cones) + 1)
    rows = [w * G for w, G in zip(W, Gs) if len(G)]
    if not rows:
        return
    lam, res = ph.nnls_bb(np.vstack(rows), D.x_star)
    if res >= D.residual:
        return
    terms, k = [], 0
    for G in Gs:
        terms.append(G.T @ lam[k:k + len(G)] if len(G) else np.zeros(len(D.x_star)))
        k += len(G)
    D.terms = terms
    D.residual = float(np.linalg.norm(D.x_star - D.reconstruct()))


def _zero_decomposition(cones, x_star, eps, mode) -> Decomposition:
    n = len(x_star)
    return Decomposition(x_star, [np.zeros(n) for _ in cones], 0.0, eps, mode)


def fuzzy_decompose(x_star, eps: float, cones: list, tol: Tolerances = DEFAULT_TOL,
                    seed: int = 0) -> Decomposition:
    """``x* in sum 2^-i x*_i + eps B`` with ``x*_i in N(0; L_i)``.

    The lifted system is built with ``eps / 2`` so the proof's ``2 eps`` bound
    lands on the requested ``eps``; the report records both.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x_star = as_vec(x_star, cones[0].dim)
    if not np.any(x_star):
        return _zero_decomposition(cones, x_star, eps, "fuzzy")
    qc = qualification_for(cones)
    if qc.outcome.is_violated:
        raise QCViolated("normal qualification condition fails", qc)
    if not is_frechet_normal_of_intersection(cones, x_star):
        raise ValueError("x* is not a Fréchet normal to the intersection at the origin")
    system = lifted_system(cones, x_star, eps / 2)
    cert = solve(system, seed=seed, tol=tol, multistart=False).certificate
    if cert.status is not Status.EXTREMAL:
        raise LiftProjectionFailure(f"lifted solve ended with status {cert.status.value}: {cert.reason}")
    D = _map_back(cones, x_star, cert, tol, "fuzzy", eps)
    D.proof_bound = eps
    D.lift_residual = D.residual
    _polish(cones, D)
    return D


def refined_decompose(x_star, cones: list, tol: Tolerances = DEFAULT_TOL, seed: int = 0) -> Decomposition:
    """Exact representation ``x* = sum 2^-i x*_i`` under strict negativity on the intersection."""
    x_star = as_vec(x_star, cones[0].dim)
    if not np.any(x_star):
        return _zero_decomposition(cones, x_star, 0.0, "refined")
    neg = check_strict_negativity(cones, x_star)
    if neg.is_violated:
        raise StrictNegativityFails(np.asarray(neg.witness))
    qc = qualification_for(cones)
    if qc.outcome.is_violated:
        raise QCViolated("normal qualification condition fails", qc)
    system = lifted_system(cones, x_star, 0.0)
    cert = solve(system, seed=seed, tol=tol, multistart=False).certificate
    if cert.status is not Status.EXTREMAL:
        raise LiftProjectionFailure(f"lifted solve ended with status {cert.status.value}: {cert.reason}")
    return _map_back(cones, x_star, cert, tol, "refined", 0.0)


def decomposition_lp(x_star, cones: list) -> np.ndarray | None:
    """Reference decomposition by LP over normal generators (convex cones only)."""
    x_star = as_vec(x_star)
    blocks = [normal_cone_at_origin(c) for c in cones]
    if any(len(b) != 1 for b in blocks):
        raise UnsupportedKind("reference LP needs convex cones")
    Gs = [b[0].generators for b in blocks]
    W = 0.5 ** np.arange(1, len(cones) + 1)
    cols = np.vstack([w * G for w, G in zip(W, Gs) if len(G)]) if any(len(G) for G in Gs) else np.zeros((0, len(x_star)))
    if len(cols) == 0:
        return None if np.any(x_star) else np.zeros(0)
    A = np.vstack([cols.T, -cols.T, -np.eye(len(cols))])
    b = np.concatenate([x_star, -x_star, np.zeros(len(cols))])
    lam, _ = ph.lp_feasible(A, b + 1e-12)
    return lam


# -- interior inclusion and regular equality ----------------------------------------------------


def interior_inclusion_check(cones: list, samples: int = 64, seed: int = 0) -> Verdict:
    """Interior points of ``N^(0; ∩ L_i)`` decompose over the normal generators.

    Samples are strictly positive combinations of the polar's generators
    (these lie in the interior when it is nonempty).
    """
    pcs = [as_polycone(c) for c in cones]
    if any(isinstance(p, PolyConeUnion) for p in pcs):
        raise UnsupportedKind("interior inclusion needs convex polyhedral cones")
    dim = pcs[0].dim
    inter = intersect(pcs)
    Np = polar(inter)
    G = Np.generators
    if len(G) == 0 or np.linalg.matrix_rank(G) < dim:
        return Verdict.holds(interior_empty=True, samples=0)
    sums = np.vstack([polar(p).generators for p in pcs if len(polar(p).generators)])
    rng = np.random.default_rng(seed)
    for k in range(samples):
        lam = rng.uniform(0.05, 1.0, len(G))
        x = G.T @ lam
        mu, res = ph.nnls_bb(sums, x)
        if res > 1e-9 * max(1.0, float(np.linalg.norm(x))):
            return Verdict.violated(x, residual=res)
    return Verdict.holds(interior_empty=False, samples=samples)


def interior_sample_excluded(cones: list, x, tol: float = 1e-12) -> bool:
    """True when ``x`` is not an interior point of ``N^(0; ∩ L_i)``."""
    inter = intersect([as_polycone(c) for c in cones])
    G = inter.generators
    x = as_vec(x)
    return any(float(x @ g) >= -tol * np.linalg.norm(g) for g in G)


def regular_equality_check(cones: list, tol: float = 1e-6) -> Verdict:
    """Closure of finite sums of ``N(0; L_i)`` equals ``N^(0; ∩ L_i)`` (normally regular family).

    Two-sided Hausdorff check on unit-ball slices via unit generators.
    """
    pcs = [as_polycone(c) for c in cones]
    if any(isinstance(p, PolyConeUnion) for p in pcs):
        raise UnsupportedKind("regular equality needs convex polyhedral cones")
    dim = pcs[0].dim
    target = polar(intersect(pcs))
    gens = [polar(p).generators for p in pcs]
    gens = [g for g in gens if len(g)]
    S = PolyCone(dim, generators=np.vstack(gens)) if gens else PolyCone.trivial(dim)
    worst = 0.0
    for A, B in ((S, target), (target, S)):
        for g in A.generators:
            u = g / np.linalg.norm(g)
            d = ph.cone_residual(B.generators, u) if len(B.generators) else 1.0
            worst = max(worst, d)
    if worst <= tol:
        return Verdict.holds(hausdorff=worst)
    return Verdict.violated({"hausdorff": worst}, hausdorff=worst)
