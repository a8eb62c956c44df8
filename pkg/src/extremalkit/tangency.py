"""Tangential normal enclosedness (TNE), tangential approximate normality (TAN),
and the contingent extremal principle pipeline.

Both property checks are falsification tests: a Holds verdict is evidence
gathered on finitely many samples, while a Violated verdict carries replay
data (direction, normal, witness point, scale) that reproduces the failure.
In finite dimensions both properties hold for every closed set, so a
Violated outcome here points at an estimator defect.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .cones import (
    DEFAULT_BUDGET,
    PolyCone,
    PolyConeUnion,
    SamplingParams,
    angle_between,
    arc_cone,
    arcs_from_directions,
    as_polycone,
    contingent_estimate,
    dedup_directions,
    frechet_normal_cone_poly,
    limiting_normal_estimate,
    sphere_directions,
)
from .core import (
    DEFAULT_TOL,
    Diverged,
    FitFailure,
    NotTangentiallyExtremal,
    Tolerances,
    UnsupportedKind,
    Verdict,
    as_vec,
    to_jsonable,
)
from .intersection import normal_cone_at_origin
from .sets import SetSpec
from . import polyhedra as ph
from .solver import (
    ConeSystem,
    NormalCertificate,
    Status,
    _feasible_point,
    check_conic_extremality,
    check_nonoverlapping,
    minimize_phi,
    solve,
)

TNE_ANGULAR_TOL = 1e-2


@dataclass
class TangencyReport:
    property: str
    outcome: Verdict
    trials: int
    worst_margin: float

    def to_dict(self) -> dict:
        return {
            "property": self.property,
            "outcome": self.outcome.to_dict(),
            "trials": self.trials,
            "worst_margin": to_jsonable(self.worst_margin),
        }


# -- fitting a polyhedral cone to a direction fan ------------------------------------------------


def _unit_angle(th: float) -> np.ndarray:
    return np.array([math.cos(th), math.sin(th)])


def _certified(s: SetSpec, xbar: np.ndarray, u: np.ndarray, budget: SamplingParams, rho: float) -> bool:
    fine = sorted(budget.scales)[: budget.persistence]
    return all(s.dist(xbar + t * u) <= rho * t for t in fine)


def _refine_edge(s, xbar, inside: float, step: float, budget, rho: float, iters: int = 24) -> float:
    """Bisect the angle where certification stops, walking outward from ``inside``."""
    outside = inside + step
    for _ in range(8):
        if not _certified(s, xbar, _unit_angle(outside), budget, rho):
            break
        inside, outside = outside, outside + step
    else:
        return outside
    for _ in range(iters):
        mid = 0.5 * (inside + outside)
        if _certified(s, xbar, _unit_angle(mid), budget, rho):
            inside = mid
        else:
            outside = mid
    return inside


def _fit_planar(fan, s: SetSpec | None, budget: SamplingParams) -> list[PolyCone]:
    spacing = 2 * math.pi / budget.n_dirs
    arcs = arcs_from_directions(fan.directions, 2.5 * spacing)
    if arcs == [(0.0, 2 * math.pi)]:
        return [PolyCone.whole(2)]
    rho = budget.rho * 1e-2
    # certified directions overshoot a flat boundary by about asin(rho)
    back = math.asin(rho)
    out = []
    for a, b in arcs:
        if s is not None:
            b = _refine_edge(s, fan.base_point, b, spacing, budget, rho) - back
            a = -_refine_edge(_Mirror(s, fan.base_point), fan.base_point, -a, spacing, budget, rho) + back
        width = b - a
        if width <= 0:
            mid = 0.5 * (a + b)
            out.append(PolyCone(2, generators=_unit_angle(mid)[None, :]))
            continue
        if width >= 2 * math.pi - 1e-3:
            return [PolyCone.whole(2)]
        if abs(width - math.pi) <= 1e-3:
            mid = 0.5 * (a + b)
            a, b = mid - 0.5 * math.pi, mid + 0.5 * math.pi
            out.append(arc_cone(a, b))
        elif width < math.pi:
            out.append(arc_cone(a, b))
        else:
            mid = 0.5 * (a + b)
            out.extend([arc_cone(a, mid), arc_cone(mid, b)])
    return out


class _Mirror:
    """Reflect the plane through the line ``y = 0`` about ``xbar``, so the
    start edge of an arc can be refined with the same outward walk."""

    def __init__(self, s: SetSpec, xbar: np.ndarray):
        self.s, self.xbar = s, xbar

    def dist(self, x):
        v = x - self.xbar
        return self.s.dist(self.xbar + np.array([v[0], -v[1]]))


def _fit_general(fan, budget: SamplingParams) -> list[PolyCone]:
    V = fan.directions
    dim = V.shape[1]
    if dim == 1:
        return [PolyCone(1, generators=np.array([[float(np.sign(v[0]))]])) for v in ph.unique_rows(np.sign(V))]
    C = V @ V.T
    nn = np.sort(np.arccos(np.clip(C, -1, 1)), axis=1)[:, 1] if len(V) > 1 else np.zeros(1)
    gap = 2.5 * float(np.max(nn)) if len(V) > 1 else 0.0
    # connected components of the angular proximity graph
    label = -np.ones(len(V), dtype=int)
    ncomp = 0
    for i in range(len(V)):
        if label[i] >= 0:
            continue
        stack, label[i] = [i], ncomp
        while stack:
            j = stack.pop()
            near = np.where((np.arccos(np.clip(C[j], -1, 1)) <= gap) & (label < 0))[0]
            label[near] = ncomp
            stack.extend(near.tolist())
        ncomp += 1
    if ncomp == 1 and len(V) >= 0.98 * budget.n_dirs:
        return [PolyCone.whole(dim)]
    return [PolyCone(dim, generators=V[label == k]) for k in range(ncomp)]


def fit_fan(fan, s: SetSpec | None = None, budget: SamplingParams = DEFAULT_BUDGET) -> PolyCone | PolyConeUnion:
    """Smallest polyhedral cone (or union) containing the fan's directions.

    In the plane the fan is split into angular arcs; with the set ``s`` at
    hand each arc edge is sharpened by bisection on the certification test.
    Arcs wider than a halfplane become unions of two convex pieces. Every
    fitted piece is then checked: sampled directions inside it must
    themselves be certified, otherwise ``FitFailure`` is raised.
    """
    dim = len(fan.base_point)
    pieces = _fit_planar(fan, s, budget) if dim == 2 else _fit_general(fan, budget)
    if s is not None:
        _verify_fit(pieces, s, fan.base_point, budget)
    return pieces[0] if len(pieces) == 1 else PolyConeUnion(pieces)


def _verify_fit(pieces: list[PolyCone], s: SetSpec, xbar: np.ndarray, budget: SamplingParams) -> None:
    rng = np.random.default_rng(budget.seed)
    for p in pieces:
        G = p.generators
        if len(G) == 0:
            continue
        G = G / np.linalg.norm(G, axis=1)[:, None]
        W = rng.dirichlet(np.ones(len(G)), size=8) if len(G) > 1 else np.ones((1, 1))
        for w in W:
            u = w @ G
            n = float(np.linalg.norm(u))
            if n < 1e-9:
                continue
            if not _certified(s, xbar, u / n, budget, budget.rho):
                raise FitFailure(f"fitted direction {np.round(u / n, 6).tolist()} is not certified")


def tangent_cone_of(s: SetSpec, xbar, budget: SamplingParams = DEFAULT_BUDGET):
    """``(cone, source)``: the exact contingent cone when the set kind knows it, else a fan fit."""
    xbar = as_vec(xbar, s.dim)
    T = s.tangent_cone(xbar)
    if T is not None:
        try:
            return as_polycone(T), "exact"
        except UnsupportedKind:  # structured but not polyhedral: fall back to the fit
            pass
    return fit_fan(contingent_estimate(s, xbar, budget), s, budget), "fit"


# -- TNE ---------------------------------------------------------------------------------


def _unit_rows(G: np.ndarray) -> list[np.ndarray]:
    out = []
    for g in G:
        n = float(np.linalg.norm(g))
        if n > 1e-12:
            out.append(g / n)
    return out


def normal_rays(cone) -> np.ndarray:
    """Unit sample rays of ``N(0; cone)``: piece generators and pairwise bisectors."""
    rays = []
    for piece in normal_cone_at_origin(cone):
        G = _unit_rows(piece.generators)
        rays.extend(G)
        for a, b in itertools.combinations(G, 2):
            rays.extend(_unit_rows((a + b)[None, :]))
    if not rays:
        return np.zeros((0, cone.dim))
    R = np.array(rays)
    return R[dedup_directions(R, 1e-9)]


def _targeted_normal(s: SetSpec, xbar: np.ndarray, d: np.ndarray, budget: SamplingParams, tol: float):
    """Probe ``xbar + r d`` on the shells; the ray must persist on consecutive shells."""
    run, prov = 0, None
    for r in sorted(budget.shells, reverse=True):
        x = xbar + r * d
        p = s.project(x)
        if p.distance <= 1e-12 * r:
            run = 0
            continue
        ray = (x - p.point) / p.distance
        if angle_between(ray, d) <= tol:
            run += 1
            prov = (x, p.point, 1.0 / p.distance)
            if run >= budget.persistence:
                return prov
        else:
            run = 0
    return None


def tne_check(s: SetSpec, xbar, budget: SamplingParams = DEFAULT_BUDGET, cone=None,
              tol: float = TNE_ANGULAR_TOL) -> TangencyReport:
    """Test ``N(0; L) ⊂ N(xbar; s)`` with ``L`` the (fitted) contingent cone.

    Each sampled ray of ``N(0; L)`` must match, within ``tol`` radians, a
    limiting normal ray realized by the projector near ``xbar``. For
    convex polyhedral sets the reverse inclusion is checked as well and
    reported under ``detail["equality"]``.
    """
    xbar = as_vec(xbar, s.dim)
    if not s.contains(xbar):
        raise ValueError("base point does not lie in the set")
    lam = cone if cone is not None else fit_fan(contingent_estimate(s, xbar, budget), s, budget)
    rays = normal_rays(lam)
    if len(rays) == 0:
        return TangencyReport("TNE", Verdict.holds(reason="N(0;L) is trivial"), 0, 0.0)
    nfan = limiting_normal_estimate(s, xbar, budget)
    worst = 0.0
    matches = []
    for d in rays:
        angles = [angle_between(r, d) for r in nfan.rays]
        k = int(np.argmin(angles))
        if angles[k] <= tol:
            matches.append(nfan.provenance[k])
            worst = max(worst, angles[k])
            continue
        prov = _targeted_normal(s, xbar, d, budget, tol)
        if prov is None:
            witness = {"ray": d, "nearest_normal": nfan.rays[k], "angle": angles[k],
                       "source_x": nfan.provenance[k][0], "source_w": nfan.provenance[k][1]}
            return TangencyReport("TNE", Verdict.violated(witness), len(rays), angles[k])
        matches.append(prov)
        ang = angle_between(prov[0] - prov[1], d)
        worst = max(worst, ang)
    detail = {"rays": rays, "provenance": [(x, w) for x, w, _ in matches]}
    if s.is_convex and s.pieces() is not None:
        pieces = normal_cone_at_origin(lam)
        detail["equality"] = all(
            any(p.contains_generated(r, tol) for p in pieces) for r in nfan.rays
        )
    return TangencyReport("TNE", Verdict.holds(**detail), len(rays), worst)


# -- TAN ---------------------------------------------------------------------------------


def _tan_margin(s: SetSpec, xk: np.ndarray, t: float, xstar: np.ndarray, delta: float,
                n_rings: int, n_angles: int):
    """Sampled ``sup <x*, z - x_k> / t`` over ``z`` in ``s ∩ (x_k + t delta B)``."""
    r = t * delta
    U = sphere_directions(s.dim, n_angles)
    radii = r * np.arange(1, n_rings + 1) / n_rings
    Z = (xk[None, None, :] + radii[:, None, None] * U[None, :, :]).reshape(-1, s.dim)
    # membership tolerance must scale with the ball, not stay absolute
    cands = [xk[None, :], Z[s.contains_batch(Z, 1e-9 * r)]]
    # projections of the outer ring catch thin pieces the grid misses
    ring = np.array([s.project(xk + r * u).point for u in U])
    cands.append(ring[np.linalg.norm(ring - xk, axis=1) <= r * (1 + 1e-12)])
    C = np.vstack(cands)
    vals = (C - xk) @ xstar / t
    j = int(np.argmax(vals))
    return float(vals[j]), C[j]


def _tan_pairs(lam) -> list[tuple[np.ndarray, np.ndarray]]:
    pieces = lam.pieces if isinstance(lam, PolyConeUnion) else [lam]
    ds = []
    for p in pieces:
        G = _unit_rows(p.generators)
        ds.extend(G)
        for a, b in itertools.combinations(G, 2):
            ds.extend(_unit_rows((a + b)[None, :]))
    if not ds:
        return []
    D = np.array(ds)
    D = D[dedup_directions(D, 1e-9)]
    pairs = []
    for d in D:
        try:
            N = frechet_normal_cone_poly(lam, d)
        except ValueError:
            continue
        G = _unit_rows(N.generators)
        xs = list(G)
        if len(G) > 1:
            xs.extend(_unit_rows(np.sum(G, axis=0)[None, :]))
        pairs.extend((d, x) for x in xs)
    return pairs


def tan_check(s: SetSpec, xbar, budget: SamplingParams = DEFAULT_BUDGET, cone=None,
              eps_grid=(1e-1, 1e-2), n_rings: int = 6, n_angles: int = 16) -> TangencyReport:
    """Falsification test of the TAN inequality ``limsup sup <x*, z - x_k>/t_k <= 2 eps delta``.

    Directions ``d`` are generators and bisectors of the contingent cone, ``x*``
    runs over the generators of ``N̂(d; L)``; the realizing sequence is
    ``x_k = P(xbar + t_k d)`` on the finest scales, and delta is searched in
    ``{eps/2, eps/4, eps/8}``. The limsup is replaced by the maximum over
    those scales, which is conservative.
    """
    xbar = as_vec(xbar, s.dim)
    if not s.contains(xbar):
        raise ValueError("base point does not lie in the set")
    # fitted edges sit slightly inside the true cone, which biases the
    # margin by the fit error; prefer the exact cone whenever it is known
    lam = cone if cone is not None else tangent_cone_of(s, xbar, budget)[0]
    pairs = _tan_pairs(lam)
    scales = sorted(budget.scales)[: budget.persistence]
    worst = -math.inf
    for d, xstar in pairs:
        slack = budget.slack * float(np.linalg.norm(xstar))
        for eps in eps_grid:
            best = None
            for delta in (eps / 2, eps / 4, eps / 8):
                margin, wit = -math.inf, None
                for t in scales:
                    xk = s.project(xbar + t * d).point
                    m, z = _tan_margin(s, xk, t, xstar, delta, n_rings, n_angles)
                    if m > margin:
                        margin, wit = m, (z, t)
                excess = margin - 2 * eps * delta
                if best is None or excess < best[0]:
                    best = (excess, delta, wit)
                if excess <= slack:
                    break
            worst = max(worst, best[0])
            if best[0] > slack:
                z, t = best[2]
                witness = {"d": d, "x_star": xstar, "z": z, "t": t, "eps": eps, "delta": best[1]}
                return TangencyReport("TAN", Verdict.violated(witness, margin=best[0]), len(pairs), best[0])
    if not pairs:
        worst = 0.0
    return TangencyReport("TAN", Verdict.holds(), len(pairs), worst)


# -- extremality of the sets themselves ------------------------------------------------


def set_extremality_check(sets: list, nus=(1.0, 0.1), max_iter: int = 5000,
                          gap: float = 1e-6) -> Verdict:
    """Search a bounded shift with ``∩ (Ω_i - a_i) = ∅``, one set moved along a signed axis.

    Polyhedral families are decided by LP. Convex families use the
    averaged-projection iteration: it drives the distance function to zero
    whenever the shifted sets meet, so a converged positive value certifies
    emptiness. Other families are reported Unknown.
    """
    dim = sets[0].dim
    system = ConeSystem.build(sets)
    polyhedral = all(s.pieces() is not None for s in sets)
    if not polyhedral and not all(s.is_convex for s in sets):
        return Verdict.unknown(reason="global emptiness needs polyhedral or convex sets")
    dirs = list(np.eye(dim)) + list(-np.eye(dim))
    for nu in nus:
        for i in range(len(sets)):
            for e in dirs:
                S = np.zeros((len(sets), dim))
                S[i] = nu * e
                if polyhedral:
                    x, certs = _feasible_point(system, S)
                    if x is None:
                        return Verdict.holds(shifts=S, method="lp", farkas=certs)
                    continue
                try:
                    st = minimize_phi(system.with_shifts(S), np.zeros(dim), 1e-13, max_iter,
                                      diverge_radius=1e6)
                except Diverged:
                    continue
                if st.converged and math.sqrt(st.phi2) > gap:
                    return Verdict.holds(shifts=S, method="averaged_projections",
                                         phi=math.sqrt(st.phi2), point=st.x)
    return Verdict.unknown(reason="no separating shift among the candidates", nus=list(nus))


# -- local extremality by shrinking shifts ------------------------------------------------


def local_extremality_check(sets: list, xbar, radius: float = 0.5, nus=(1e-1, 1e-2, 1e-3),
                            grid: int = 201, tol: float = DEFAULT_TOL.membership) -> Verdict:
    """Grid test of ``∩ (Ω_i - ν a_i) ∩ U = ∅`` along shrinking shifts.

    Shift patterns move one set along a signed coordinate axis. A pattern
    certifies local extremality when no grid point of the box ``U`` around
    ``xbar`` lies in every shifted set for every ``ν``. This is a labeling
    tool for the corpus, not a proof: thin intersections can slip between
    grid points.
    """
    dim = sets[0].dim
    xbar = as_vec(xbar, dim)
    per_axis = grid if dim <= 2 else max(11, int(round(40_000 ** (1.0 / dim))))
    axes = [np.linspace(-radius, radius, per_axis) for _ in range(dim)]
    Z = xbar + np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    dirs = list(np.eye(dim)) + list(-np.eye(dim))
    for i in range(len(sets)):
        for e in dirs:
            ok = True
            for nu in nus:
                alive = np.ones(len(Z), dtype=bool)
                for j, s in enumerate(sets):
                    a = nu * e if j == i else np.zeros(dim)
                    alive[alive] = s.contains_batch(Z[alive] + a, tol)
                    if not alive.any():
                        break
                if alive.any():
                    ok = False
                    break
            if ok:
                return Verdict.holds(index=i, direction=e, nus=list(nus), radius=radius)
    return Verdict.violated({"reason": "every shift pattern leaves a common grid point"},
                            nus=list(nus), radius=radius)


# -- the pipeline ---------------------------------------------------------------------------


CERTIFIED = "certified"
OVERLAPPING = "overlapping_cones"
NOT_TANGENTIALLY_EXTREMAL = "not_tangentially_extremal"


@dataclass
class ExtremalPipelineReport:
    status: str
    contingent_cones: list
    cone_sources: list
    nonoverlap: Verdict
    contingent_extremality: Verdict
    certificate: NormalCertificate | None = None
    normal_memberships: list = field(default_factory=list)
    extremality_conditions: Verdict | None = None
    set_extremality: Verdict | None = None
    local_extremality: Verdict | None = None

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "contingent_cones": [c.to_dict() for c in self.contingent_cones],
            "cone_sources": list(self.cone_sources),
            "nonoverlap": self.nonoverlap.to_dict(),
            "contingent_extremality": self.contingent_extremality.to_dict(),
            "certificate": self.certificate.to_dict() if self.certificate is not None else None,
            "normal_memberships": [v.to_dict() for v in self.normal_memberships],
            "extremality_conditions": (
                self.extremality_conditions.to_dict() if self.extremality_conditions is not None else None
            ),
            "set_extremality": self.set_extremality.to_dict() if self.set_extremality is not None else None,
            "local_extremality": self.local_extremality.to_dict() if self.local_extremality is not None else None,
        }


def _pieces_of(c) -> list[PolyCone]:
    return c.pieces if isinstance(c, PolyConeUnion) else [c]


def limiting_euler_check(cones: list, weights=None, tol: float = 1e-9) -> Verdict:
    """Nonzero solutions of ``sum w_i x*_i = 0`` with ``x*_i`` in ``N(0; L_i)``.

    ``N(0; L_i)`` of a union is a union of convex pieces; every piece
    combination is tried, and Holds carries the first nonzero solution.
    """
    normals = [normal_cone_at_origin(c) for c in cones]
    m = len(cones)
    W = np.asarray(weights, dtype=float) if weights is not None else 0.5 ** np.arange(1, m + 1)
    best_value = 0.0
    for combo in itertools.product(*normals):
        blocks = [p.generators for p in combo]
        value, lams = ph.nontrivial_zero_combination(blocks)
        best_value = max(best_value, value)
        if value > tol:
            dim = cones[0].dim
            xs = [B.T @ lam / w if len(B) else np.zeros(dim) for B, lam, w in zip(blocks, lams, W)]
            scale = math.sqrt(sum(w * (v @ v) for w, v in zip(W, xs)))
            return Verdict.holds(x_star=[v / scale for v in xs], lp_value=value)
    return Verdict.violated({"lp_value": best_value}, lp_value=best_value)


def _membership(s: SetSpec, xbar: np.ndarray, cone, xstar: np.ndarray, budget: SamplingParams) -> Verdict:
    n = float(np.linalg.norm(xstar))
    if n <= 1e-12:
        return Verdict.holds(method="zero")
    tol = 1e-7 * max(1.0, n)
    if not any(p.contains_generated(xstar, tol) for p in normal_cone_at_origin(cone)):
        return Verdict.violated(xstar, reason="not in N(0;L)")
    if s.pieces() is not None or s.is_convex:
        # locally the set is xbar + L (polyhedral) or N(xbar; s) = N(0; L) (convex)
        return Verdict.holds(method="exact")
    d = xstar / n
    nfan = limiting_normal_estimate(s, xbar, budget)
    if nfan.contains(d, TNE_ANGULAR_TOL) is not None:
        return Verdict.holds(method="sampled")
    if _targeted_normal(s, xbar, d, budget, TNE_ANGULAR_TOL) is not None:
        return Verdict.holds(method="sampled")
    return Verdict.unknown(method="sampled", reason="direction not realized by the projector")


def contingent_extremal_pipeline(
    sets: list,
    xbar,
    shifts=None,
    weights=None,
    budget: SamplingParams = DEFAULT_BUDGET,
    tol: Tolerances = DEFAULT_TOL,
    seed: int = 0,
    local: bool = False,
    raise_on_failure: bool = False,
) -> ExtremalPipelineReport:
    """Contingent extremal principle end to end.

    Builds the contingent cones, checks nonoverlap and contingent
    extremality, solves the conic system, and certifies every normal
    against the original sets. ``status`` is ``certified``,
    ``overlapping_cones`` (extremal, but the nonoverlap hypothesis fails so
    no certificate is produced) or ``not_tangentially_extremal``; in the
    last case ``raise_on_failure`` raises ``NotTangentiallyExtremal`` with
    the report attached.
    """
    dim = sets[0].dim
    xbar = as_vec(xbar, dim)
    for i, s in enumerate(sets):
        if not s.contains(xbar):
            raise ValueError(f"base point does not lie in set {i + 1}")
    cones, sources = [], []
    for s in sets:
        c, src = tangent_cone_of(s, xbar, budget)
        cones.append(c)
        sources.append(src)
    specs = [c.to_setspec() for c in cones]
    system = ConeSystem.build(specs, weights=weights)
    nonoverlap = check_nonoverlapping(system, budget)
    ce = check_conic_extremality(system, shifts=shifts, search=True)
    euler = limiting_euler_check(cones, system.weights)
    loc = local_extremality_check(sets, xbar) if local else None
    report = ExtremalPipelineReport(NOT_TANGENTIALLY_EXTREMAL, cones, sources, nonoverlap, ce,
                                    extremality_conditions=euler,
                                    set_extremality=set_extremality_check(sets),
                                    local_extremality=loc)
    if not ce.is_holds:
        if raise_on_failure:
            raise NotTangentiallyExtremal("no certifying shifts for the contingent cones", report)
        return report
    if nonoverlap.is_violated:
        report.status = OVERLAPPING
        return report
    cert = solve(system.with_shifts(ce.detail["shifts"]), seed=seed, tol=tol).certificate
    report.certificate = cert
    if cert.status is Status.EXTREMAL:
        report.normal_memberships = [
            _membership(s, xbar, c, v, budget) for s, c, v in zip(sets, cones, cert.x_star)
        ]
        bad = [i for i, v in enumerate(report.normal_memberships) if v.is_violated]
        if bad:
            raise AssertionError(f"inclusion chain fails for members {bad}")
        report.status = CERTIFIED
    else:
        report.status = cert.status.value
    return report
