"""Closed subsets of R^n given by membership and nearest-point oracles.

Every set kind implements ``contains``, ``project`` and ``dist``; sets that
are finite unions of convex polyhedra also expose ``pieces()`` so that the
LP-based checkers can reason about them exactly. Sets are immutable values.

JSON form: ``{"kind": ..., <parameters>}``; see the ``setspec`` definition in ``schema/problem.schema.json``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, ClassVar

import numpy as np
from scipy.optimize import minimize_scalar

from .core import DEFAULT_TOL, NonConvergence, as_vec, frozen
from . import polyhedra as ph


@dataclass(frozen=True)
class ProjectionResult:
    point: np.ndarray
    distance: float
    multiplicity_hint: bool = False


def _lex_key(p: np.ndarray) -> tuple:
    return tuple(np.round(p, 12))


class SetSpec:
    """Base class. Subclasses set ``kind`` and implement ``_project``."""

    kind: ClassVar[str] = ""
    cheap_projection: ClassVar[bool] = True

    dim: int

    # -- oracle surface -----------------------------------------------------

    def project(self, x) -> ProjectionResult:
        return self._project(as_vec(x, self.dim))

    def dist(self, x) -> float:
        return self.project(x).distance

    def contains(self, x, tol: float | None = None) -> bool:
        tol = DEFAULT_TOL.membership if tol is None else tol
        return self.dist(x) <= tol

    def contains_batch(self, X: np.ndarray, tol: float | None = None) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([self.contains(x, tol) for x in X], dtype=bool)

    def _project(self, x: np.ndarray) -> ProjectionResult:
        raise NotImplementedError

    # -- structure ------------------------------------------------------------

    @property
    def is_cone(self) -> bool:
        return False

    @property
    def is_convex(self) -> bool:
        return False

    def pieces(self) -> list[tuple[np.ndarray, np.ndarray]] | None:
        """Convex polyhedral pieces ``{x : A x <= b}`` whose union is the set."""
        return None

    @property
    def is_polyhedral(self) -> bool:
        p = self.pieces()
        return p is not None and len(p) == 1

    def tangent_cone(self, xbar, tol: float = 1e-9) -> "SetSpec | None":
        """Exact contingent cone at ``xbar`` when the structure allows it."""
        pcs = self.pieces()
        if pcs is None:
            return None
        return _tangent_from_pieces(pcs, as_vec(xbar, self.dim), tol)

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __eq__(self, other) -> bool:
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash(repr(self.to_dict()))

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.to_dict()})"


def _tangent_from_pieces(pcs, xbar, tol) -> SetSpec:
    dim = len(xbar)
    cones: list[SetSpec] = []
    for A, b in pcs:
        if len(A) == 0:
            return WholeSpace(dim)
        slack = A @ xbar - b
        scale = np.linalg.norm(A, axis=1) * max(1.0, float(np.linalg.norm(xbar)))
        if np.any(slack > tol * scale):
            continue
        act = A[slack >= -tol * scale]
        if len(act) == 0:
            return WholeSpace(dim)
        cones.append(PolyhedralCone(act))
    if not cones:
        raise ValueError("point does not belong to the set")
    uniq: list[SetSpec] = []
    for c in cones:
        if c not in uniq:
            uniq.append(c)
    return uniq[0] if len(uniq) == 1 else UnionOfConvexPieces(uniq)


# -- polyhedral cones -----------------------------------------------------------


class Halfspace(SetSpec):
    """``{x : <a, x> <= 0}``."""

    kind = "halfspace"

    def __init__(self, normal):
        a = as_vec(normal)
        if np.linalg.norm(a) == 0:
            raise ValueError("halfspace normal must be nonzero")
        self.normal = frozen(a)
        self.dim = len(a)

    def _project(self, x):
        p = ph.project_halfspace(self.normal, x)
        return ProjectionResult(p, float(np.linalg.norm(x - p)))

    def contains_batch(self, X, tol=None):
        tol = DEFAULT_TOL.membership if tol is None else tol
        X = np.atleast_2d(X)
        return X @ self.normal <= tol * np.linalg.norm(self.normal)

    is_cone = property(lambda self: True)
    is_convex = property(lambda self: True)

    def pieces(self):
        return [(self.normal[None, :].copy(), np.zeros(1))]

    def to_dict(self):
        return {"kind": self.kind, "normal": self.normal.tolist()}


class HalfplaneGraph(Halfspace):
    """``{(x, y) : y <= slope * x}``."""

    kind = "halfplane_graph"

    def __init__(self, slope: float):
        self.slope = float(slope)
        super().__init__([-self.slope, 1.0])

    def to_dict(self):
        return {"kind": self.kind, "slope": self.slope}


class PolyhedralCone(SetSpec):
    """``{x : <a_j, x> <= 0 for all rows a_j}``; projection by cyclic Dykstra."""

    kind = "polyhedral_cone"

    def __init__(self, rows, dim: int | None = None):
        A = np.asarray(rows, dtype=float)
        if A.size == 0:
            if dim is None:
                raise ValueError("dimension required for a cone without rows")
            A = np.zeros((0, dim))
        A = np.atleast_2d(A)
        if np.any(np.linalg.norm(A, axis=1) == 0):
            raise ValueError("polyhedral cone rows must be nonzero")
        self.rows = frozen(A)
        self.dim = A.shape[1]

    def _project(self, x):
        p, ok = ph.dykstra_polycone(np.asarray(self.rows), x)
        if not ok:
            raise NonConvergence("Dykstra exceeded its sweep budget")
        return ProjectionResult(p, float(np.linalg.norm(x - p)))

    def contains_batch(self, X, tol=None):
        tol = DEFAULT_TOL.membership if tol is None else tol
        X = np.atleast_2d(X)
        if len(self.rows) == 0:
            return np.ones(len(X), dtype=bool)
        # row-wise slack is a lower bound on the distance; exact for one row
        ok = np.all(X @ (self.rows / np.linalg.norm(self.rows, axis=1)[:, None]).T <= tol, axis=1)
        if len(self.rows) > 1:
            need = ok.copy()
            for k in np.flatnonzero(need):
                ok[k] = self.dist(X[k]) <= tol
        return ok

    is_cone = property(lambda self: True)
    is_convex = property(lambda self: True)

    def pieces(self):
        return [(np.array(self.rows), np.zeros(len(self.rows)))]

    def to_dict(self):
        return {"kind": self.kind, "rows": self.rows.tolist(), "dimension": self.dim}


class GeneratedCone(SetSpec):
    """``cone(G)``: nonnegative combinations of generator rows."""

    kind = "generated_cone"

    def __init__(self, generators, dim: int | None = None):
        G = np.asarray(generators, dtype=float)
        if G.size == 0:
            if dim is None:
                raise ValueError("dimension required for a cone without generators")
            G = np.zeros((0, dim))
        G = np.atleast_2d(G)
        if np.any(np.linalg.norm(G, axis=1) == 0):
            raise ValueError("generators must be nonzero")
        self.generators = frozen(G)
        self.dim = G.shape[1]
        self._hrep: np.ndarray | None = None

    def _project(self, x):
        if len(self.generators) == 0:
            return ProjectionResult(np.zeros(self.dim), float(np.linalg.norm(x)))
        lam, res = ph.nnls_bb(np.asarray(self.generators), x)
        p = self.generators.T @ lam
        return ProjectionResult(p, float(np.linalg.norm(x - p)))

    is_cone = property(lambda self: True)
    is_convex = property(lambda self: True)

    def hrep(self) -> np.ndarray:
        if self._hrep is None:
            if len(self.generators) == 0:
                H = np.vstack([np.eye(self.dim), -np.eye(self.dim)])
            else:
                H = ph.vrep_to_hrep(np.asarray(self.generators), self.dim)
            object.__setattr__(self, "_hrep", H)
        return self._hrep

    def pieces(self):
        H = self.hrep()
        return [(H.copy(), np.zeros(len(H)))]

    def to_dict(self):
        return {"kind": self.kind, "generators": self.generators.tolist(), "dimension": self.dim}


class WholeSpace(SetSpec):
    kind = "whole_space"

    def __init__(self, dim: int):
        self.dim = int(dim)

    def _project(self, x):
        return ProjectionResult(x.copy(), 0.0)

    def contains_batch(self, X, tol=None):
        return np.ones(len(np.atleast_2d(X)), dtype=bool)

    is_cone = property(lambda self: True)
    is_convex = property(lambda self: True)

    def pieces(self):
        return [(np.zeros((0, self.dim)), np.zeros(0))]

    def to_dict(self):
        return {"kind": self.kind, "dimension": self.dim}


class Ball(SetSpec):
    kind = "ball"

    def __init__(self, center, radius: float):
        self.center = frozen(as_vec(center))
        self.radius = float(radius)
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")
        self.dim = len(self.center)

    def _project(self, x):
        d = x - self.center
        n = float(np.linalg.norm(d))
        if n <= self.radius:
            return ProjectionResult(x.copy(), 0.0)
        p = self.center + (self.radius / n) * d
        return ProjectionResult(p, n - self.radius)

    def contains_batch(self, X, tol=None):
        tol = DEFAULT_TOL.membership if tol is None else tol
        return np.linalg.norm(np.atleast_2d(X) - self.center, axis=1) <= self.radius + tol

    @property
    def is_cone(self):
        return self.radius == 0 and not np.any(self.center)

    is_convex = property(lambda self: True)

    def pieces(self):
        if self.radius > 0:
            return None
        E = np.vstack([np.eye(self.dim), -np.eye(self.dim)])
        return [(E, np.concatenate([self.center, -self.center]))]

    def tangent_cone(self, xbar, tol=1e-9):
        xbar = as_vec(xbar, self.dim)
        if self.radius == 0:
            return GeneratedCone(np.zeros((0, self.dim)), dim=self.dim)
        d = xbar - self.center
        if np.linalg.norm(d) < self.radius - tol:
            return WholeSpace(self.dim)
        return Halfspace(d)

    def to_dict(self):
        return {"kind": self.kind, "center": self.center.tolist(), "radius": self.radius}


# -- composites ---------------------------------------------------------------


class Shifted(SetSpec):
    """``inner + shift``."""

    kind = "shifted"

    def __init__(self, inner: SetSpec, shift):
        self.inner = inner
        self.shift = frozen(as_vec(shift, inner.dim))
        self.dim = inner.dim
        self.cheap_projection = inner.cheap_projection

    def _project(self, x):
        r = self.inner.project(x - self.shift)
        return ProjectionResult(r.point + self.shift, r.distance, r.multiplicity_hint)

    def contains(self, x, tol=None):
        return self.inner.contains(as_vec(x, self.dim) - self.shift, tol)

    def contains_batch(self, X, tol=None):
        return self.inner.contains_batch(np.atleast_2d(X) - self.shift, tol)

    @property
    def is_cone(self):
        return self.inner.is_cone and not np.any(self.shift)

    @property
    def is_convex(self):
        return self.inner.is_convex

    def pieces(self):
        p = self.inner.pieces()
        if p is None:
            return None
        return [(A, b + A @ self.shift) for A, b in p]

    def tangent_cone(self, xbar, tol=1e-9):
        return self.inner.tangent_cone(as_vec(xbar, self.dim) - self.shift, tol)

    def to_dict(self):
        return {"kind": self.kind, "inner": self.inner.to_dict(), "shift": self.shift.tolist()}


class Product(SetSpec):
    """``inner x R_+`` (sign +1) or ``inner x R_-`` (sign -1)."""

    kind = "product"

    def __init__(self, inner: SetSpec, sign: int = 1):
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        self.inner = inner
        self.sign = int(sign)
        self.dim = inner.dim + 1
        self.cheap_projection = inner.cheap_projection

    def _project(self, x):
        r = self.inner.project(x[:-1])
        s = max(x[-1], 0.0) if self.sign > 0 else min(x[-1], 0.0)
        p = np.append(r.point, s)
        return ProjectionResult(p, float(np.linalg.norm(x - p)), r.multiplicity_hint)

    def contains_batch(self, X, tol=None):
        tol = DEFAULT_TOL.membership if tol is None else tol
        X = np.atleast_2d(X)
        return self.inner.contains_batch(X[:, :-1], tol) & (self.sign * X[:, -1] >= -tol)

    @property
    def is_cone(self):
        return self.inner.is_cone

    @property
    def is_convex(self):
        return self.inner.is_convex

    def pieces(self):
        p = self.inner.pieces()
        if p is None:
            return None
        out = []
        for A, b in p:
            row = np.zeros((1, self.dim))
            row[0, -1] = -self.sign
            out.append((np.vstack([np.hstack([A, np.zeros((len(A), 1))]), row]), np.append(b, 0.0)))
        return out

    def to_dict(self):
        return {"kind": self.kind, "inner": self.inner.to_dict(), "sign": self.sign}


class UnionOfConvexPieces(SetSpec):
    """Finite union; projection is the nearest of the pieces' projections.

    Ties (within the consistency tolerance) set ``multiplicity_hint`` and
    the lexicographically smallest candidate is returned.
    """

    kind = "union"

    def __init__(self, pieces: list[SetSpec]):
        pieces = list(pieces)
        if not pieces:
            raise ValueError("a union needs at least one piece")
        dims = {p.dim for p in pieces}
        if len(dims) != 1:
            raise ValueError("pieces must share a dimension")
        self.members = tuple(pieces)
        self.dim = dims.pop()
        self.cheap_projection = all(p.cheap_projection for p in pieces)

    def _project(self, x):
        res = [p.project(x) for p in self.members]
        best = min(r.distance for r in res)
        tol = DEFAULT_TOL.consistency * max(1.0, best)
        ties = [r for r in res if r.distance <= best + tol]
        distinct = {_lex_key(r.point) for r in ties}
        pick = min(ties, key=lambda r: _lex_key(r.point))
        multi = len(distinct) > 1 or any(r.multiplicity_hint for r in ties)
        return ProjectionResult(pick.point, best, multi)

    def contains(self, x, tol=None):
        return any(p.contains(x, tol) for p in self.members)

    def contains_batch(self, X, tol=None):
        out = np.zeros(len(np.atleast_2d(X)), dtype=bool)
        for p in self.members:
            out |= p.contains_batch(X, tol)
        return out

    @property
    def is_cone(self):
        return all(p.is_cone for p in self.members)

    @property
    def is_convex(self):
        return len(self.members) == 1 and self.members[0].is_convex

    def pieces(self):
        out = []
        for p in self.members:
            q = p.pieces()
            if q is None:
                return None
            out.extend(q)
        return out

    def tangent_cone(self, xbar, tol=1e-9):
        xbar = as_vec(xbar, self.dim)
        parts: list[SetSpec] = []
        for p in self.members:
            if not p.contains(xbar, tol):
                continue
            t = p.tangent_cone(xbar, tol)
            if t is None:
                return None
            if isinstance(t, WholeSpace):
                return t
            sub = t.members if isinstance(t, UnionOfConvexPieces) else (t,)
            for s in sub:
                if s not in parts:
                    parts.append(s)
        if not parts:
            raise ValueError("point does not belong to the set")
        return parts[0] if len(parts) == 1 else UnionOfConvexPieces(parts)

    def to_dict(self):
        return {"kind": self.kind, "pieces": [p.to_dict() for p in self.members]}


# -- epigraphs of named scalar functions ----------------------------------------


@dataclass(frozen=True)
class ScalarFunction:
    """A named function of one variable with the structure the toolkit needs.

    ``tangent_at_kink`` maps the sense ("epi"/"hypo") to rows of the
    polyhedral pieces of the contingent cone at the kink ``x = 0``.
    """

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray] | None
    convex_epi: bool
    concave: bool
    homogeneous: bool
    kink_at_zero: bool
    tangent_at_kink: dict | None = None
    anchors: Callable[[float, float, float, float], np.ndarray] | None = None
    scalar: Callable[[float], float] | None = None

    def at(self, t: float) -> float:
        """``f(t)`` for one float, skipping array overhead when a scalar form exists."""
        if self.scalar is not None:
            return self.scalar(t)
        return float(self.f(np.array([t]))[0])


def _xsin(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    nz = x != 0
    out[nz] = x[nz] * np.sin(1.0 / x[nz])
    return out


def _xsin_scalar(t: float) -> float:
    return t * math.sin(1.0 / t) if t != 0.0 else 0.0


def _dxsin(x):
    x = np.asarray(x, dtype=float)
    return np.sin(1.0 / x) - np.cos(1.0 / x) / x


def _xsin_anchors(a: float, b: float, lo: float, hi: float) -> np.ndarray:
    """Abscissae where ``x sin(1/x)`` touches ``y = +-x`` next to the feet of ``(a, b)``.

    Near the origin the oscillation period ``2 pi x^2`` drops far below any
    grid spacing, so these touch points are offered as extra candidates.
    """
    targets = []
    for c in (1.0, -1.0):
        u = 0.5 * (a + c * b)
        if u != 0.0:
            targets.append((min(max(u, lo), hi) or 1e-300, c * 0.5 * math.pi))
    # inside the band |b| < |a| the graph crosses the level b right next to a
    if a != 0.0 and abs(b) < abs(a):
        s0 = math.asin(b / a)
        targets.extend([(a, s0), (a, math.pi - s0)])
    out = []
    for u, phase in targets:
        k0 = round((1.0 / u - phase) / (2 * math.pi))
        for k in range(k0 - 1, k0 + 2):
            w = phase + 2 * math.pi * k
            if w != 0.0 and lo <= 1.0 / w <= hi:
                out.append(1.0 / w)
    return np.array(out)


def _neg_abs_pieces():
    # union of {y >= x} and {y >= -x}, in (v, beta) coordinates
    return [[[1.0, -1.0]], [[-1.0, -1.0]]]


def make_function(name: str, params: dict | None = None) -> ScalarFunction:
    params = dict(params or {})
    if name == "xsin1x":
        return ScalarFunction(
            name, _xsin, _dxsin, False, False, False, True,
            {"epi": _neg_abs_pieces(), "hypo": [[[-1.0, 1.0]], [[1.0, 1.0]]]}, _xsin_anchors, _xsin_scalar,
        )
    if name == "min0_xsin1x":
        return ScalarFunction(
            name, lambda x: np.minimum(0.0, _xsin(x)), None, False, False, False, True,
            {"epi": _neg_abs_pieces(), "hypo": [[[0.0, 1.0]]]}, _xsin_anchors,
            lambda t: min(0.0, _xsin_scalar(t)),
        )
    if name == "square":
        c = float(params.get("coef", 1.0))
        return ScalarFunction(
            name, lambda x: c * np.asarray(x, float) ** 2, lambda x: 2 * c * np.asarray(x, float),
            c >= 0, c <= 0, False, False,
        )
    if name == "abs":
        c = float(params.get("coef", 1.0))
        if c >= 0:
            kink = {"epi": [[[c, -1.0], [-c, -1.0]]], "hypo": [[[-c, 1.0]], [[c, 1.0]]]}
        else:
            kink = {"epi": [[[-c, -1.0]], [[c, -1.0]]], "hypo": [[[-c, 1.0], [c, 1.0]]]}
        return ScalarFunction(
            name, lambda x: c * np.abs(np.asarray(x, float)), lambda x: c * np.sign(x),
            c >= 0, c <= 0, True, True, kink,
        )
    raise ValueError(f"unknown function '{name}'")


class Epigraph(SetSpec):
    """``{(x, a) : a >= f(x)}`` (or ``a <= f(x)`` with ``hypograph=True``).

    Projection searches the graph over the bracket ``[x0 - r, x0 + r]`` with
    ``r`` the vertical gap, which always contains the nearest point: a coarse
    grid, a finer grid around the best local minima, then bounded scalar
    refinement.
    """

    kind = "epigraph"
    cheap_projection = False

    def __init__(self, function: str, params: dict | None = None, hypograph: bool = False,
                 grid: int = 10_000, refine_tol: float = 1e-10):
        self.function = function
        self.params = dict(params or {})
        self.hypograph = bool(hypograph)
        self.grid = int(grid)
        self.refine_tol = float(refine_tol)
        self.fn = make_function(function, self.params)
        self.dim = 2

    def _sign(self) -> float:
        return -1.0 if self.hypograph else 1.0

    def gap(self, X: np.ndarray) -> np.ndarray:
        """Signed vertical deficit; positive means outside the set."""
        X = np.atleast_2d(X)
        return self._sign() * (self.fn.f(X[:, 0]) - X[:, 1])

    def contains(self, x, tol=None):
        tol = DEFAULT_TOL.membership if tol is None else tol
        x = as_vec(x, 2)
        g = float(self.gap(x)[0])
        if g <= tol:
            return True
        return self.dist(x) <= tol

    def contains_batch(self, X, tol=None):
        # vertical gap bounds the distance from above: never a false positive
        tol = DEFAULT_TOL.membership if tol is None else tol
        return self.gap(X) <= tol

    def _project(self, x):
        s = self._sign()
        a, b = float(x[0]), s * float(x[1])

        def f(t):
            return s * self.fn.f(t)

        def g1(t):
            return (t - a) ** 2 + (s * self.fn.at(t) - b) ** 2

        r = float(f(np.array([a]))[0]) - b
        if r <= 0:
            return ProjectionResult(x.copy(), 0.0)
        if self.function == "square":
            return self._project_parabola(x, a, b, s)
        lo, hi = a - r, a + r
        xs = np.linspace(lo, hi, self.grid + 1)
        g = (xs - a) ** 2 + (f(xs) - b) ** 2
        interior = np.flatnonzero((g[1:-1] <= g[:-2]) & (g[1:-1] <= g[2:])) + 1
        cand_idx = np.concatenate([interior, [0, len(xs) - 1]])
        cand_idx = cand_idx[np.argsort(g[cand_idx])][:8]
        h = xs[1] - xs[0]
        found: list[tuple[float, float]] = []
        for j in cand_idx:
            l2, h2 = max(lo, xs[j] - h), min(hi, xs[j] + h)
            xs2 = np.linspace(l2, h2, 1001)
            g2 = (xs2 - a) ** 2 + (f(xs2) - b) ** 2
            k = int(np.argmin(g2))
            h3 = xs2[1] - xs2[0]
            l3, u3 = max(l2, xs2[k] - h3), min(h2, xs2[k] + h3)
            best_t, best_g = xs2[k], g2[k]
            if u3 > l3:
                res = minimize_scalar(
                    g1,
                    bounds=(l3, u3), method="bounded",
                    options={"xatol": max(self.refine_tol * h3, 1e-300)},
                )
                if res.fun < best_g:
                    best_t, best_g = float(res.x), float(res.fun)
            found.append((math.sqrt(max(best_g, 0.0)), float(best_t)))
        if self.fn.anchors is not None:
            for u in self.fn.anchors(a, float(x[1]), lo, hi):
                half = 0.25 * math.pi * u * u
                if half > 5 * h:
                    continue  # the grid already resolves oscillations this slow
                res = minimize_scalar(
                    g1,
                    bounds=(max(lo, u - half), min(hi, u + half)), method="bounded",
                    options={"xatol": max(1e-6 * half, 1e-300)},
                )
                g0 = g1(u)
                t_best, g_best = (float(res.x), float(res.fun)) if res.fun < g0 else (u, g0)
                found.append((math.sqrt(max(g_best, 0.0)), t_best))
        found.sort()
        d0, t0 = found[0]
        sep = 2 * h
        multi = any(
            abs(d - d0) <= 1e-6 * max(d0, 1e-300) and abs(t - t0) > sep for d, t in found[1:]
        )
        if multi:
            ties = [t for d, t in found if abs(d - d0) <= 1e-6 * max(d0, 1e-300)]
            t0 = min(ties)
            d0 = math.sqrt(g1(t0))
        p = np.array([t0, s * float(f(np.array([t0]))[0])])
        return ProjectionResult(p, float(np.linalg.norm(x - p)), multi)

    def _project_parabola(self, x, a: float, b: float, s: float) -> ProjectionResult:
        # stationarity of (u - a)^2 + (c u^2 - b)^2: 2 c^2 u^3 + (1 - 2 c b) u - a = 0
        c = s * float(self.params.get("coef", 1.0))
        if c == 0.0:
            p = np.array([a, 0.0])
            return ProjectionResult(p, float(np.linalg.norm(x - p)))
        roots = np.roots([2 * c * c, 0.0, 1 - 2 * c * b, -a])
        us = sorted(float(u.real) for u in roots if abs(u.imag) <= 1e-9 * max(1.0, abs(u.real)))
        vals = [(u - a) ** 2 + (c * u * u - b) ** 2 for u in us]
        best = min(vals)
        ties = [u for u, v in zip(us, vals) if v <= best + 1e-12 * max(best, 1e-300)]
        u = ties[0]
        p = np.array([u, s * c * u * u])
        multi = len(ties) > 1 and ties[-1] - ties[0] > 1e-9
        return ProjectionResult(p, float(np.linalg.norm(x - p)), multi)

    @property
    def is_cone(self):
        return self.fn.homogeneous

    @property
    def is_convex(self):
        return self.fn.concave if self.hypograph else self.fn.convex_epi

    def pieces(self):
        if self.function != "abs":
            return None
        rows = self.fn.tangent_at_kink["hypo" if self.hypograph else "epi"]
        return [(np.array(r), np.zeros(len(r))) for r in rows]

    def tangent_cone(self, xbar, tol=1e-9):
        xbar = as_vec(xbar, 2)
        s = self._sign()
        gap = float(self.gap(xbar)[0])
        if gap > tol:
            raise ValueError("point does not belong to the set")
        if gap < -tol:
            return WholeSpace(2)
        x0 = float(xbar[0])
        if self.fn.kink_at_zero and x0 == 0.0:
            rows = self.fn.tangent_at_kink["hypo" if self.hypograph else "epi"]
            parts = [PolyhedralCone(r) for r in rows]
            return parts[0] if len(parts) == 1 else UnionOfConvexPieces(parts)
        if self.fn.df is None:
            return None
        slope = float(self.fn.df(np.array([x0]))[0])
        # epi: beta >= slope*v  <=>  slope*v - beta <= 0
        return Halfspace([s * slope, -s])

    def to_dict(self):
        d = {"kind": self.kind, "function": self.function, "params": self.params,
             "hypograph": self.hypograph}
        if self.grid != 10_000:
            d["grid"] = self.grid
        return d


# -- (de)serialization ------------------------------------------------------------


def from_dict(d: dict) -> SetSpec:
    kind = d.get("kind")
    if kind == "halfspace":
        return Halfspace(d["normal"])
    if kind == "halfplane_graph":
        return HalfplaneGraph(d["slope"])
    if kind == "polyhedral_cone":
        return PolyhedralCone(d["rows"], d.get("dimension"))
    if kind == "generated_cone":
        return GeneratedCone(d["generators"], d.get("dimension"))
    if kind == "whole_space":
        return WholeSpace(d["dimension"])
    if kind == "ball":
        return Ball(d["center"], d["radius"])
    if kind == "shifted":
        return Shifted(from_dict(d["inner"]), d["shift"])
    if kind == "product":
        return Product(from_dict(d["inner"]), d.get("sign", 1))
    if kind == "union":
        return UnionOfConvexPieces([from_dict(p) for p in d["pieces"]])
    if kind == "epigraph":
        return Epigraph(d["function"], d.get("params"), d.get("hypograph", False),
                        d.get("grid", 10_000))
    if kind == "lifted_hypograph":
        from .intersection import LiftedHypograph

        return LiftedHypograph(from_dict(d["base"]), d["x_star"], d["epsilon"])
    raise ValueError(f"unknown set kind '{kind}'")


def contains(s: SetSpec, x, tol: float | None = None) -> bool:
    return s.contains(x, tol)


def project(s: SetSpec, x) -> ProjectionResult:
    return s.project(x)


def dist(s: SetSpec, x) -> float:
    return s.dist(x)
