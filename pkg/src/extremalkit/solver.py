"""Metric-approximation solver for extremal systems of cones.

For a truncated family of closed cones ``L_i`` with shifts ``a_i`` and
weights ``w_i`` the solver minimizes

    phi2(x) = sum_i w_i dist(x + a_i; L_i)^2

by majorize-minimize steps and turns a minimizer with ``phi > 0`` into a
normal certificate ``x*_i = (x + a_i - p_i) / phi`` that satisfies the
weighted Euler equation and normalization.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import polyhedra as ph
from .cones import (
    DEFAULT_BUDGET,
    PolyCone,
    PolyConeUnion,
    SamplingParams,
    as_polycone,
    frechet_normal_cone_poly,
    frechet_normal_test,
    limiting_normal_estimate,
    sphere_directions,
)
from .core import (
    DEFAULT_TOL,
    BudgetExceeded,
    Diverged,
    EmptyFan,
    MembershipFailed,
    NoNonzeroNormal,
    Tolerances,
    UnsupportedKind,
    Verdict,
    as_vec,
    to_jsonable,
)
from .sets import SetSpec, WholeSpace


@dataclass(frozen=True)
class ConeSystem:
    """Ordered truncation ``L_1..L_m`` of a countable cone family.

    Indices beyond ``m`` are the whole space. ``tail`` optionally holds a
    closed cone equal to the intersection of the omitted members; it enters
    the set-theoretic checks (nonoverlap, extremality) but not ``phi2``.
    """

    cones: tuple
    shifts: np.ndarray
    weights: np.ndarray
    tail: SetSpec | None = None

    @classmethod
    def build(cls, cones, shifts=None, weights=None, base: float = 0.5, tail=None) -> "ConeSystem":
        cones = tuple(cones)
        if not cones:
            raise ValueError("a cone system needs at least one cone")
        dim = cones[0].dim
        if any(c.dim != dim for c in cones):
            raise ValueError("all cones must share the ambient dimension")
        m = len(cones)
        S = np.zeros((m, dim)) if shifts is None else np.asarray(shifts, dtype=float).reshape(m, dim)
        if not np.all(np.isfinite(S)):
            raise ValueError("shifts must be finite")
        if weights is None:
            W = base ** np.arange(1, m + 1, dtype=float)
        else:
            W = np.asarray(weights, dtype=float).reshape(m)
        if np.any(W <= 0):
            raise ValueError("weights must be positive")
        S.setflags(write=False)
        W.setflags(write=False)
        return cls(cones, S, W, tail)

    @property
    def dim(self) -> int:
        return self.cones[0].dim

    @property
    def m(self) -> int:
        return len(self.cones)

    @property
    def shift_bound(self) -> float:
        return float(np.max(np.linalg.norm(self.shifts, axis=1)))

    def with_shifts(self, shifts) -> "ConeSystem":
        return ConeSystem.build(self.cones, shifts, self.weights, tail=self.tail)

    def phi2(self, x) -> float:
        x = as_vec(x, self.dim)
        return float(sum(w * c.dist(x + a) ** 2 for c, a, w in zip(self.cones, self.shifts, self.weights)))

    def is_polyhedral(self) -> bool:
        members = list(self.cones) + ([self.tail] if self.tail is not None else [])
        return all(c.is_cone and c.pieces() is not None for c in members)


@dataclass
class SolverState:
    x: np.ndarray
    w: list
    phi2: float
    iter: int
    converged: bool = False
    history: list = field(default_factory=list)
    multiplicity_events: int = 0


class Status(str, enum.Enum):
    EXTREMAL = "extremal"
    NOT_EXTREMAL = "not_extremal"
    DEGENERATE = "degenerate"
    BUDGET_EXCEEDED = "budget_exceeded"


@dataclass
class NormalCertificate:
    status: Status
    x_tilde: np.ndarray
    w: list
    x_star: list
    euler_residual: float
    norm_residual: float
    phi: float
    weights: np.ndarray
    feasible_point: np.ndarray | None = None
    reason: str = ""
    iterations: int = 0

    def to_dict(self) -> dict:
        return to_jsonable(
            {
                "status": self.status.value,
                "x_tilde": self.x_tilde,
                "w": self.w,
                "x_star": self.x_star,
                "euler_residual": self.euler_residual,
                "norm_residual": self.norm_residual,
                "phi": self.phi,
                "weights": self.weights,
                "feasible_point": self.feasible_point,
                "reason": self.reason,
                "iterations": self.iterations,
            }
        )


@dataclass
class SolveResult:
    """Best certificate plus every distinct certified alternative found by multi-start."""

    certificate: NormalCertificate
    alternatives: list

    def to_dict(self) -> dict:
        return {
            "certificate": self.certificate.to_dict(),
            "alternatives": [c.to_dict() for c in self.alternatives],
        }


# -- minimization ----------------------------------------------------------------


def _project_all(system: ConeSystem, x: np.ndarray):
    res = [c.project(x + a) for c, a in zip(system.cones, system.shifts)]
    phi2 = float(sum(w * r.distance ** 2 for r, w in zip(res, system.weights)))
    return res, phi2


def _extrapolate(system, x, d, res, phi2, max_doublings: int = 40):
    best = (x, res, phi2)
    s = 1.0
    for _ in range(max_doublings):
        cand = x + s * d
        r, p = _project_all(system, cand)
        if not p < best[2]:
            break
        best = (cand, r, p)
        s *= 2.0
    return best


def minimize_phi(
    system: ConeSystem,
    x0=None,
    tol: float = 1e-12,
    max_iter: int = 20_000,
    diverge_radius: float | None = None,
    raise_on_budget: bool = False,
    extrapolate: bool | None = None,
) -> SolverState:
    """Majorize-minimize fixed point ``x <- sum w_i (p_i - a_i) / sum w_i``.

    With cheap projectors each step is followed by doubling extrapolation
    along the step, kept only while ``phi2`` keeps decreasing; this turns the
    slow drift along an unattained infimum into a detectable escape.
    Raises ``Diverged`` when ``|x|`` passes ``10 (1 + sup|a_i|) m``.
    """
    x = np.zeros(system.dim) if x0 is None else as_vec(x0, system.dim).copy()
    W = system.weights
    wsum = float(W.sum())
    radius = diverge_radius if diverge_radius is not None else 10.0 * (1.0 + system.shift_bound) * system.m
    cheap = all(c.cheap_projection for c in system.cones)
    slack = 1e-12 if cheap else 1e-9
    if extrapolate is None:
        extrapolate = cheap
    res, phi2 = _project_all(system, x)
    hist = [phi2]
    multi = sum(r.multiplicity_hint for r in res)
    state = SolverState(x, [r.point for r in res], phi2, 0, False, hist, multi)
    for it in range(1, max_iter + 1):
        target = sum(w * (r.point - a) for r, a, w in zip(res, system.shifts, W)) / wsum
        step = float(np.linalg.norm(target - x))
        d = target - x
        x = target
        res, new_phi2 = _project_all(system, x)
        if extrapolate and step > 0:
            x, res, new_phi2 = _extrapolate(system, x, d, res, new_phi2)
        multi += sum(r.multiplicity_hint for r in res)
        # descent holds exactly for exact projections; allow round-off
        if new_phi2 > phi2 + slack * max(1.0, phi2):
            raise AssertionError(f"majorize-minimize ascent: {phi2!r} -> {new_phi2!r}")
        phi2 = new_phi2
        hist.append(phi2)
        state = SolverState(x, [r.point for r in res], phi2, it, False, hist, multi)
        nx = float(np.linalg.norm(x))
        if nx > radius:
            raise Diverged(x / nx, state)
        if step < tol or phi2 == 0.0:
            state.converged = True
            return state
    if raise_on_budget:
        raise BudgetExceeded(f"no convergence within {max_iter} iterations", state)
    return state


# -- certificates ----------------------------------------------------------------


def normal_membership(cone: SetSpec, w, xstar, tol: float = 1e-8,
                      budget: SamplingParams = DEFAULT_BUDGET) -> bool:
    """Is ``xstar`` a Fréchet normal to ``cone`` at ``w``?

    Exact for polyhedral cones and unions (polar of the tangent cone at
    ``w``); a sampled falsification test otherwise.
    """
    w = as_vec(w, cone.dim)
    xstar = as_vec(xstar, cone.dim)
    scale = max(1.0, float(np.linalg.norm(xstar)))
    if cone.pieces() is not None:
        N = frechet_normal_cone_poly(cone, w)
        return N.contains_generated(xstar, tol * scale) if len(N.generators) else (
            float(np.linalg.norm(xstar)) <= tol * scale)
    if cone.is_convex:
        # convex sets: x* is normal at w iff w is the projection of w + x*
        u = xstar / scale
        return float(np.linalg.norm(cone.project(w + u).point - w)) <= tol
    return not frechet_normal_test(cone, w, xstar, 0.0, budget).is_violated


def extract_certificate(system: ConeSystem, state: SolverState, tol: Tolerances = DEFAULT_TOL,
                        check_membership: bool = True) -> NormalCertificate:
    x = state.x
    phi = math.sqrt(max(state.phi2, 0.0))
    W = system.weights
    if phi <= tol.zero:
        return NormalCertificate(
            Status.NOT_EXTREMAL, x, state.w, [np.zeros(system.dim)] * system.m, 0.0, 1.0, phi, W,
            feasible_point=x, reason="shifted intersection is nonempty", iterations=state.iter,
        )
    xs = [(x + a - w) / phi for a, w in zip(system.shifts, state.w)]
    euler = float(np.linalg.norm(sum(wi * v for wi, v in zip(W, xs))))
    norm_res = abs(float(sum(wi * (v @ v) for wi, v in zip(W, xs))) - 1.0)
    if check_membership:
        for i, (c, w, v) in enumerate(zip(system.cones, state.w, xs)):
            if not normal_membership(c, w, v, 1e-7):
                raise MembershipFailed(i)
    ok = euler <= tol.euler and norm_res <= tol.norm
    status = Status.EXTREMAL if ok else (Status.BUDGET_EXCEEDED if not state.converged else Status.DEGENERATE)
    reason = "" if ok else f"euler residual {euler:.3e}, norm residual {norm_res:.3e}"
    return NormalCertificate(status, x, state.w, xs, euler, norm_res, phi, W, reason=reason,
                             iterations=state.iter)


def _feasible_point(system: ConeSystem, shifts=None, include_tail: bool = False):
    """LP search for ``x`` with ``x + a_i in L_i`` for all i (polyhedral systems only).

    Returns ``(point, farkas_list)``; the point is None when every piece
    combination is infeasible.
    """
    shifts = system.shifts if shifts is None else np.asarray(shifts, dtype=float)
    members = list(zip(system.cones, shifts))
    if include_tail and system.tail is not None:
        members.append((system.tail, np.zeros(system.dim)))
    piece_lists = []
    for c, a in members:
        pcs = c.pieces()
        if pcs is None:
            raise UnsupportedKind(f"{c.kind} has no polyhedral pieces")
        piece_lists.append([(A, b - A @ a) for A, b in pcs])
    combos = math.prod(len(p) for p in piece_lists)
    if combos > 4096:
        raise UnsupportedKind("too many piece combinations for exact enumeration")
    certs = []
    for combo in itertools.product(*piece_lists):
        A = np.vstack([A for A, _ in combo if len(A)] or [np.zeros((0, system.dim))])
        b = np.concatenate([b for A, b in combo if len(A)] or [np.zeros(0)])
        x, mu = ph.lp_feasible(A, b)
        if x is not None:
            return x, None
        certs.append(mu)
    return None, certs


def _start_points(system: ConeSystem, seed: int, n_random: int = 8) -> list:
    pts = [np.zeros(system.dim)]
    for a in system.shifts:
        if np.any(a):
            pts.append(-a.copy())
    pts.append(-system.shifts.mean(axis=0))
    rng = np.random.default_rng(seed)
    R = rng.standard_normal((n_random, system.dim))
    pts.extend(R / np.linalg.norm(R, axis=1)[:, None])
    out = []
    for p in pts:
        if not any(np.allclose(p, q) for q in out):
            out.append(p)
    return out


def solve(system: ConeSystem, seed: int = 0, tol: Tolerances = DEFAULT_TOL, step_tol: float = 1e-13,
          max_iter: int = 20_000, multistart: bool = True, warm_start: bool = True) -> SolveResult:
    """Full solve: LP feasibility warm start, then multi-start minimization."""
    if warm_start and system.is_polyhedral():
        try:
            x, _ = _feasible_point(system)
        except UnsupportedKind:
            x = None
        if x is not None:
            res, phi2 = _project_all(system, x)
            if math.sqrt(phi2) <= tol.zero:
                cert = NormalCertificate(
                    Status.NOT_EXTREMAL, x, [r.point for r in res], [np.zeros(system.dim)] * system.m,
                    0.0, 1.0, math.sqrt(phi2), system.weights, feasible_point=x,
                    reason="LP found a point of the shifted intersection",
                )
                return SolveResult(cert, [])
    starts = _start_points(system, seed) if multistart else [np.zeros(system.dim)]
    certs: list[NormalCertificate] = []
    for x0 in starts:
        try:
            st = minimize_phi(system, x0, step_tol, max_iter)
        except Diverged as e:
            st = e.state
            certs.append(NormalCertificate(
                Status.DEGENERATE, st.x, st.w, [], math.inf, math.inf, math.sqrt(st.phi2),
                system.weights, reason=f"diverged along {np.round(e.direction, 9).tolist()}",
                iterations=st.iter,
            ))
            continue
        certs.append(extract_certificate(system, st, tol))
    rank = {Status.EXTREMAL: 0, Status.NOT_EXTREMAL: 0, Status.DEGENERATE: 1, Status.BUDGET_EXCEEDED: 2}
    certs.sort(key=lambda c: (rank[c.status], c.phi, tuple(np.round(c.x_tilde, 9))))
    best = certs[0]
    alts = []
    for c in certs[1:]:
        if c.status is not Status.EXTREMAL:
            continue
        if all(np.linalg.norm(c.x_tilde - d.x_tilde) > 1e-6 for d in [best] + alts):
            alts.append(c)
    return SolveResult(best, alts)


# -- set-theoretic checks ----------------------------------------------------------------


def _members_with_tail(system: ConeSystem) -> list:
    out = list(system.cones)
    if system.tail is not None:
        out.append(system.tail)
    return out


def common_directions(cones: list) -> np.ndarray:
    """Generators of the intersection of polyhedral cones (unions enumerated)."""
    dim = cones[0].dim
    parts = []
    for c in cones:
        pc = as_polycone(c)
        parts.append(pc.pieces if isinstance(pc, PolyConeUnion) else [pc])
    found = []
    for combo in itertools.product(*parts):
        rows = [p.facet_normals for p in combo if len(p.facet_normals)]
        A = np.vstack(rows) if rows else np.zeros((0, dim))
        G = ph.hrep_to_vrep(A, dim) if len(A) else np.vstack([np.eye(dim), -np.eye(dim)])
        found.extend(G)
    if not found:
        return np.zeros((0, dim))
    return ph.unique_rows(np.array(found))


def check_nonoverlapping(system: ConeSystem, budget: SamplingParams = DEFAULT_BUDGET,
                         tol: float = 1e-9) -> Verdict:
    """Does ``L_1 ∩ ... ∩ L_m`` reduce to the origin?

    Violated carries a unit common direction.
    """
    cones = _members_with_tail(system)
    if system.is_polyhedral():
        G = common_directions(cones)
        for g in G:
            u = g / np.linalg.norm(g)
            if all(c.dist(u) <= tol for c in cones):
                return Verdict.violated(u, method="exact")
        return Verdict.holds(method="exact")
    # oracle path: minimize the summed squared distance over the sphere
    def F(u):
        n = np.linalg.norm(u)
        v = u / n if n > 0 else u
        return sum(c.dist(v) ** 2 for c in cones)

    U = sphere_directions(system.dim, 180 if system.dim == 2 else 256, budget.seed)
    vals = np.array([F(u) for u in U])
    best_u, best_v = None, math.inf
    for k in np.argsort(vals)[:5]:
        r = minimize(F, U[k], method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-16})
        u = r.x / np.linalg.norm(r.x)
        if r.fun < best_v:
            best_u, best_v = u, float(r.fun)
    if best_v <= tol ** 2:
        return Verdict.violated(best_u, method="sampled", residual=best_v)
    if best_v > 1e-6:
        return Verdict.holds(method="sampled", min_residual=best_v)
    return Verdict.unknown(method="sampled", min_residual=best_v)


def _candidate_shifts(system: ConeSystem) -> list:
    cones = list(system.cones)
    dim = system.dim
    dirs = []
    for c in cones:
        try:
            pc = as_polycone(c)
        except UnsupportedKind:
            continue
        for p in pc.pieces if isinstance(pc, PolyConeUnion) else [pc]:
            dirs.extend(p.facet_normals)
    dirs.extend(np.eye(dim))
    dirs.extend(-np.eye(dim))
    dirs = ph.unique_rows(np.array(dirs)) if dirs else np.zeros((0, dim))
    out = []
    for i in range(system.m):
        for d in list(dirs) + [-d for d in dirs]:
            S = np.zeros((system.m, dim))
            S[i] = d
            out.append(S)
    return out


def check_conic_extremality(system: ConeSystem, shifts=None, search: bool = True) -> Verdict:
    """Certify extremality by exhibiting shifts with empty shifted intersection.

    Holds carries the shifts and per-combination Farkas multipliers; with
    explicit shifts and a nonempty intersection the verdict is Violated with
    the common point as witness.
    """
    if system.m + (system.tail is not None) == 1:
        return Verdict.violated({"reason": "a single translated cone is never empty"})
    if not system.is_polyhedral():
        return Verdict.unknown(reason="exact emptiness test needs polyhedral cones")
    if shifts is not None:
        S = np.asarray(shifts, dtype=float).reshape(system.m, system.dim)
        x, certs = _feasible_point(system, S, include_tail=True)
        if x is None:
            return Verdict.holds(shifts=S, farkas=certs)
        return Verdict.violated(x, shifts=S)
    if np.any(system.shifts):
        v = check_conic_extremality(system, system.shifts)
        if v.is_holds or not search:
            return v
    if search:
        for S in _candidate_shifts(system):
            x, certs = _feasible_point(system, S, include_tail=True)
            if x is None:
                return Verdict.holds(shifts=S, farkas=certs)
    return Verdict.unknown(reason="no certifying shift found among candidates")


def scaling_check(system: ConeSystem, shifts=None, etas=None) -> Verdict:
    """Emptiness of the shifted intersection is invariant under ``a -> eta a``."""
    S = system.shifts if shifts is None else np.asarray(shifts, dtype=float).reshape(system.m, system.dim)
    etas = tuple(10.0 ** k for k in range(-3, 4)) if etas is None else tuple(etas)
    outcomes = {}
    for eta in etas:
        outcomes[eta] = check_conic_extremality(system, eta * S, search=False).outcome
    first = outcomes[etas[0]]
    for eta, o in outcomes.items():
        if o is not first:
            return Verdict.violated({"eta": eta, "outcome": o.value, "reference": first.value})
    return Verdict.holds(outcome=first.value, etas=list(etas))


def check_euler_solutions(normal_cones: list, weights=None, tol: float = 1e-9) -> Verdict:
    """Does ``sum w_i x*_i = 0`` admit a nonzero solution with ``x*_i`` in the given cones?

    Holds carries the normalized nonzero solution; Violated means only the
    zero solution exists (LP value 0).
    """
    blocks = []
    for N in normal_cones:
        pc = N if isinstance(N, PolyCone) else PolyCone.from_setspec(N)
        blocks.append(pc.generators)
    value, lams = ph.nontrivial_zero_combination(blocks)
    if value <= tol:
        return Verdict.violated({"lp_value": value}, lp_value=value)
    m = len(blocks)
    W = np.asarray(weights, dtype=float) if weights is not None else 0.5 ** np.arange(1, m + 1)
    xs = [B.T @ lam / w if len(B) else np.zeros(normal_cones[0].dim) for B, lam, w in zip(blocks, lams, W)]
    s = math.sqrt(sum(w * (v @ v) for w, v in zip(W, xs)))
    return Verdict.holds(x_star=[v / s for v in xs], lp_value=value)


# -- trivial witnesses ---------------------------------------------------------------


@dataclass
class TrivialWitness:
    index: int
    base_points: list
    raw: list
    normalized: list

    def to_dict(self) -> dict:
        return to_jsonable({"index": self.index + 1, "base_points": self.base_points,
                            "raw": self.raw, "normalized": self.normalized})


def _nonzero_frechet_normal(s: SetSpec, xbar: np.ndarray, budget: SamplingParams):
    if isinstance(s, WholeSpace):
        return None
    if s.pieces() is not None:
        N = frechet_normal_cone_poly(s, xbar)
        if len(N.generators):
            return xbar, N.generators[0]
    try:
        fan = limiting_normal_estimate(s, xbar, budget)
    except EmptyFan:
        return None
    # a proximal normal at a nearby point is a Fréchet normal there
    _, w, _ = fan.provenance[0]
    return w, fan.rays[0]


def trivial_witness(sets: list, xbar, eps: float, budget: SamplingParams = DEFAULT_BUDGET) -> TrivialWitness:
    """Build the trivial solution of the approximate extremality conditions.

    Choose the first index ``j >= 2`` with ``2^(1 - j/2) <= eps/2`` whose set
    has a nonzero Fréchet normal ``u`` near ``xbar``; set ``x*_j = 2^(j/2) u``
    and ``x*_1 = -2^(1-j) x*_j``. The family solves the Euler equation with
    ``sum 2^-i |x*_i|^2 > 1`` before rescaling.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    xbar = as_vec(xbar)
    m = len(sets)
    for j in range(2, m + 1):
        if 2.0 ** (1 - j / 2) > eps / 2:
            continue
        got = _nonzero_frechet_normal(sets[j - 1], xbar, budget)
        if got is None:
            continue
        w, u = got
        u = u / np.linalg.norm(u)
        raw = [np.zeros(len(xbar)) for _ in range(m)]
        raw[j - 1] = 2.0 ** (j / 2) * u
        raw[0] = -(2.0 ** (1 - j)) * raw[j - 1]
        W = 0.5 ** np.arange(1, m + 1)
        s = math.sqrt(sum(wi * (v @ v) for wi, v in zip(W, raw)))
        pts = [xbar.copy() for _ in range(m)]
        pts[j - 1] = np.asarray(w)
        return TrivialWitness(j - 1, pts, raw, [v / s for v in raw])
    raise NoNonzeroNormal("no admissible index carries a nonzero Fréchet normal")
