"""Tangent and normal cones: exact polyhedral calculus and sampling estimators.

The estimators under-approximate: every direction in a fan carries a
replayable certificate, and anything that fails persistence across scales
is dropped rather than reported.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import polyhedra as ph
from .core import DEFAULT_TOL, EmptyFan, NotConvex, UnsupportedKind, Verdict, as_vec
from .sets import (
    GeneratedCone,
    PolyhedralCone,
    SetSpec,
    UnionOfConvexPieces,
    WholeSpace,
)


@dataclass(frozen=True)
class SamplingParams:
    """Sampling budget shared by the estimators.

    ``rho`` is the relative certification radius: a direction ``u`` is
    certified at scale ``t`` when ``dist(xbar + t u; Omega) <= rho * t``.
    """

    scales: tuple = tuple(2.0 ** -k for k in range(1, 21))
    n_dirs: int = 360
    seed: int = 0
    rho: float = 1e-2
    persistence: int = 3
    shells: tuple = tuple(10.0 ** -k for k in range(1, 7))
    shell_dirs: int = 512
    angular_tol: float = DEFAULT_TOL.angular
    slack: float = 1e-6

    def directions(self, dim: int, count: int | None = None) -> np.ndarray:
        return sphere_directions(dim, count or self.n_dirs, self.seed)


DEFAULT_BUDGET = SamplingParams()


def sphere_directions(dim: int, count: int, seed: int = 0) -> np.ndarray:
    """Quasi-uniform unit vectors; equally spaced angles in the plane."""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        th = 2 * math.pi * np.arange(count) / count
        U = np.column_stack([np.cos(th), np.sin(th)])
        U[np.abs(U) < 1e-15] = 0.0
        return U
    rng = np.random.default_rng(seed)
    R = rng.standard_normal((max(count - 2 * dim, 0), dim))
    U = np.vstack([np.eye(dim), -np.eye(dim), R])
    return U / np.linalg.norm(U, axis=1)[:, None]


def angle_between(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    c = float(np.clip(u @ v / (nu * nv), -1.0, 1.0))
    return math.acos(c)


def dedup_directions(V: np.ndarray, tol: float = DEFAULT_TOL.angular) -> list[int]:
    """Indices of a maximal subset of rows pairwise farther apart than ``tol`` (radians)."""
    keep: list[int] = []
    ctol = math.cos(tol)
    for k, v in enumerate(V):
        if not any(float(V[j] @ v) >= ctol for j in keep):
            keep.append(k)
    return keep


# -- polyhedral cones ------------------------------------------------------------


class PolyCone:
    """A convex polyhedral cone in V-rep, H-rep, or both.

    H-rep rows ``a`` describe ``{x : <a, x> <= 0}``; V-rep rows are
    generators. A missing representation is computed lazily. An empty
    generator list is the trivial cone ``{0}``; an empty facet list is the
    whole space.
    """

    def __init__(self, dim: int, generators=None, facet_normals=None):
        if generators is None and facet_normals is None:
            raise ValueError("need generators or facet normals")
        self.dim = int(dim)
        self._gen = None if generators is None else self._rows(generators)
        self._fac = None if facet_normals is None else self._rows(facet_normals)
        self.convex = True

    def _rows(self, R) -> np.ndarray:
        R = np.asarray(R, dtype=float).reshape(-1, self.dim)
        return ph.normalize_rows(R) if len(R) else R

    @classmethod
    def from_generators(cls, G, dim: int | None = None) -> "PolyCone":
        G = np.asarray(G, dtype=float)
        return cls(dim if dim is not None else G.shape[-1], generators=G)

    @classmethod
    def from_facets(cls, A, dim: int | None = None) -> "PolyCone":
        A = np.asarray(A, dtype=float)
        return cls(dim if dim is not None else A.shape[-1], facet_normals=A)

    @classmethod
    def trivial(cls, dim: int) -> "PolyCone":
        return cls(dim, generators=np.zeros((0, dim)))

    @classmethod
    def whole(cls, dim: int) -> "PolyCone":
        return cls(dim, facet_normals=np.zeros((0, dim)))

    @classmethod
    def from_setspec(cls, s: SetSpec) -> "PolyCone":
        if isinstance(s, GeneratedCone):
            return cls(s.dim, generators=np.asarray(s.generators))
        if isinstance(s, WholeSpace):
            return cls.whole(s.dim)
        pcs = s.pieces() if s.is_cone else None
        if pcs is None or len(pcs) != 1 or np.any(pcs[0][1]):
            raise UnsupportedKind(f"{s.kind} is not a convex polyhedral cone")
        return cls(s.dim, facet_normals=pcs[0][0])

    @property
    def generators(self) -> np.ndarray:
        if self._gen is None:
            self._gen = ph.hrep_to_vrep(self._fac, self.dim)
        return self._gen

    @property
    def facet_normals(self) -> np.ndarray:
        if self._fac is None:
            if len(self._gen) == 0:
                self._fac = np.vstack([np.eye(self.dim), -np.eye(self.dim)])
            else:
                self._fac = ph.vrep_to_hrep(self._gen, self.dim)
        return self._fac

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = as_vec(x, self.dim)
        A = self.facet_normals
        return len(A) == 0 or float(np.max(A @ x)) <= tol * max(1.0, float(np.linalg.norm(x)))

    def contains_generated(self, x, tol: float = 1e-9) -> bool:
        """Membership via the V-rep (nonnegative least squares residual)."""
        x = as_vec(x, self.dim)
        if len(self.generators) == 0:
            return float(np.linalg.norm(x)) <= tol
        return ph.cone_residual(self.generators, x) <= tol * max(1.0, float(np.linalg.norm(x)))

    @property
    def is_trivial(self) -> bool:
        return len(self.generators) == 0

    @property
    def is_whole(self) -> bool:
        return len(self.facet_normals) == 0 or all(
            self.contains(u) for u in np.vstack([np.eye(self.dim), -np.eye(self.dim)])
        )

    def includes(self, other: "PolyCone", tol: float = 1e-9) -> bool:
        return all(self.contains(g, tol) for g in other.generators)

    def equals(self, other: "PolyCone", tol: float = 1e-9) -> bool:
        return self.includes(other, tol) and other.includes(self, tol)

    def to_setspec(self) -> SetSpec:
        if len(self.facet_normals) == 0:
            return WholeSpace(self.dim)
        return PolyhedralCone(self.facet_normals)

    def to_dict(self) -> dict:
        return {
            "dimension": self.dim,
            "generators": self.generators.tolist(),
            "facet_normals": self.facet_normals.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PolyCone":
        return cls(d["dimension"], generators=d.get("generators"), facet_normals=d.get("facet_normals"))

    def __repr__(self) -> str:
        return f"PolyCone(dim={self.dim}, generators={np.round(self.generators, 6).tolist()})"


class PolyConeUnion:
    """Finite union of convex polyhedral cones (nonconvex in general)."""

    convex = False

    def __init__(self, pieces: list[PolyCone]):
        if not pieces:
            raise ValueError("a union needs at least one piece")
        self.pieces = list(pieces)
        self.dim = pieces[0].dim

    def contains(self, x, tol: float = 1e-9) -> bool:
        return any(p.contains(x, tol) for p in self.pieces)

    def to_setspec(self) -> SetSpec:
        specs = [p.to_setspec() for p in self.pieces]
        return specs[0] if len(specs) == 1 else UnionOfConvexPieces(specs)

    def to_dict(self) -> dict:
        return {"dimension": self.dim, "pieces": [p.to_dict() for p in self.pieces]}

    def __repr__(self) -> str:
        return f"PolyConeUnion({self.pieces})"


def polar(C) -> PolyCone:
    """``C° = {y : <y, x> <= 0 for all x in C}``; swaps the two representations."""
    if not getattr(C, "convex", False):
        raise NotConvex("polar is only defined here for convex polyhedral cones")
    return PolyCone(C.dim, generators=C.facet_normals, facet_normals=C.generators)


def intersect(cones: list[PolyCone]) -> PolyCone:
    dim = cones[0].dim
    rows = [c.facet_normals for c in cones if len(c.facet_normals)]
    if not rows:
        return PolyCone.whole(dim)
    return PolyCone(dim, facet_normals=ph.unique_rows(np.vstack(rows)))


def as_polycone(s) -> PolyCone | PolyConeUnion:
    """Convert a polyhedral cone spec (or union of such) to the exact calculus types."""
    if isinstance(s, (PolyCone, PolyConeUnion)):
        return s
    if isinstance(s, UnionOfConvexPieces):
        parts = [as_polycone(p) for p in s.members]
        flat = []
        for p in parts:
            flat.extend(p.pieces if isinstance(p, PolyConeUnion) else [p])
        return flat[0] if len(flat) == 1 else PolyConeUnion(flat)
    pcs = s.pieces() if s.is_cone else None
    if pcs is None:
        raise UnsupportedKind(f"{s.kind} is not polyhedral")
    if isinstance(s, GeneratedCone):
        return PolyCone(s.dim, generators=np.asarray(s.generators))
    flat = [PolyCone(s.dim, facet_normals=A) for A, b in pcs]
    return flat[0] if len(flat) == 1 else PolyConeUnion(flat)


def frechet_normal_cone_poly(C, at=None) -> PolyCone:
    """Exact Fréchet normal cone of a polyhedral cone or union at ``at``.

    The contingent cone at ``at`` is the union of the tangent cones of the
    pieces that contain ``at``; the Fréchet cone is its polar, i.e. the
    intersection of those pieces' polars.
    """
    if isinstance(C, SetSpec):
        if C.pieces() is None:
            raise UnsupportedKind(f"{C.kind} is not polyhedral")
        at = np.zeros(C.dim) if at is None else as_vec(at, C.dim)
        T = C.tangent_cone(at)
        return _polar_of_tangent(T)
    pc = as_polycone(C) if not isinstance(C, (PolyCone, PolyConeUnion)) else C
    at = np.zeros(pc.dim) if at is None else as_vec(at, pc.dim)
    return frechet_normal_cone_poly(pc.to_setspec(), at)


def _polar_of_tangent(T: SetSpec) -> PolyCone:
    if isinstance(T, WholeSpace):
        return PolyCone.trivial(T.dim)
    members = T.members if isinstance(T, UnionOfConvexPieces) else (T,)
    polars = [polar(PolyCone.from_setspec(m)) for m in members]
    if len(polars) == 1:
        return polars[0]
    return intersect(polars)


# -- contingent cone estimation ----------------------------------------------------


@dataclass
class DirectionFan:
    """Certified directions ``v`` with ``xbar + t v`` in the set.

    ``samples`` holds one ``(t, v)`` pair per surviving probe direction,
    taken at the finest scale.
    """

    base_point: np.ndarray
    samples: list
    scales: tuple

    @property
    def directions(self) -> np.ndarray:
        if not self.samples:
            return np.zeros((0, len(self.base_point)))
        return np.array([v for _, v in self.samples])

    def replay(self, s: SetSpec, tol: float = DEFAULT_TOL.membership) -> bool:
        return all(s.contains(self.base_point + t * v, tol) for t, v in self.samples)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = len(self.base_point)
        w.writerow(["t"] + [f"v{k + 1}" for k in range(n)])
        for t, v in self.samples:
            w.writerow([repr(float(t))] + [repr(float(c)) for c in v])
        return buf.getvalue()


def _certify(s: SetSpec, xbar: np.ndarray, u: np.ndarray, t: float, rho: float):
    r = s.project(xbar + t * u)
    if r.distance > rho * t:
        return None
    d = r.point - xbar
    nd = float(np.linalg.norm(d))
    if nd <= 1e-300:
        return None
    return nd, d / nd


def contingent_estimate(s: SetSpec, xbar, budget: SamplingParams = DEFAULT_BUDGET) -> DirectionFan:
    """Sample the contingent cone ``T(xbar; s)``.

    A probe direction survives when it is certified at each of the
    ``budget.persistence`` finest scales; its sample is the realized unit
    direction of the projected point at the finest scale.
    """
    xbar = as_vec(xbar, s.dim)
    if not s.contains(xbar):
        raise ValueError("base point does not lie in the set")
    scales = tuple(sorted(budget.scales, reverse=True))
    fine = scales[-budget.persistence:][::-1]
    samples = []
    for u in budget.directions(s.dim):
        got = None
        for k, t in enumerate(fine):
            c = _certify(s, xbar, u, t, budget.rho)
            if c is None:
                got = None
                break
            if k == 0:
                got = c
        if got is not None:
            samples.append(got)
    if not samples:
        raise EmptyFan("no direction survived the persistence test")
    samples.sort(key=lambda tv: tuple(tv[1]))
    return DirectionFan(xbar, samples, scales)


# the weak contingent cone coincides with T in finite dimensions
weak_contingent_estimate = contingent_estimate


# -- limiting normals ----------------------------------------------------------------


@dataclass
class NormalFan:
    """Estimated rays of the limiting normal cone, with projector provenance.

    ``provenance[k] = (x, w, alpha)`` with ``w`` a nearest point to ``x`` and
    ``rays[k] = alpha * (x - w)``.
    """

    base_point: np.ndarray
    rays: np.ndarray
    provenance: list = field(default_factory=list)

    def contains(self, d, tol: float = 1e-2) -> int | None:
        """Index of a ray within ``tol`` radians of ``d``, else None."""
        d = as_vec(d)
        for k, r in enumerate(self.rays):
            if angle_between(r, d) <= tol:
                return k
        return None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = len(self.base_point)
        w.writerow([f"ray{k + 1}" for k in range(n)] + ["src_x", "src_w"])
        for r, (x, p, _) in zip(self.rays, self.provenance):
            w.writerow(
                [repr(float(c)) for c in r]
                + [" ".join(repr(float(c)) for c in x), " ".join(repr(float(c)) for c in p)]
            )
        return buf.getvalue()


def limiting_normal_estimate(s: SetSpec, xbar, budget: SamplingParams = DEFAULT_BUDGET) -> NormalFan:
    """Rays ``alpha (x - w)`` from shells ``xbar + r u``.

    A ray cluster is kept when it is observed on ``budget.persistence``
    consecutive shells; the representative comes from the finest of them.
    """
    xbar = as_vec(xbar, s.dim)
    if not s.contains(xbar):
        raise ValueError("base point does not lie in the set")
    shells = sorted(budget.shells, reverse=True)
    U = budget.directions(s.dim, budget.shell_dirs)
    per_shell: list[list[tuple]] = []
    for r in shells:
        found = []
        for u in U:
            x = xbar + r * u
            p = s.project(x)
            if p.distance <= 1e-12 * r:
                continue
            alpha = 1.0 / p.distance
            ray = alpha * (x - p.point)
            found.append((ray, x, p.point, alpha))
        per_shell.append(found)

    ctol = math.cos(budget.angular_tol)
    clusters: list[dict] = []
    for k, found in enumerate(per_shell):
        for ray, x, w, a in found:
            for c in clusters:
                if float(c["ray"] @ ray) >= ctol:
                    c["shells"].add(k)
                    if k > c["last"]:
                        c.update(ray=ray, prov=(x, w, a), last=k)
                    break
            else:
                clusters.append({"ray": ray, "prov": (x, w, a), "shells": {k}, "last": k})

    def persistent(ks: set) -> bool:
        run = best = 0
        for k in range(len(shells)):
            run = run + 1 if k in ks else 0
            best = max(best, run)
        return best >= min(budget.persistence, len(shells))

    kept = [c for c in clusters if persistent(c["shells"])]
    if not kept:
        raise EmptyFan("no normal direction was observed near the base point")
    kept.sort(key=lambda c: tuple(np.round(c["ray"], 12)))
    keep_idx = dedup_directions(np.array([c["ray"] for c in kept]), budget.angular_tol)
    kept = [kept[i] for i in keep_idx]
    return NormalFan(xbar, np.array([c["ray"] for c in kept]), [c["prov"] for c in kept])


def frechet_normal_test(
    s: SetSpec, xbar, xstar, eps: float = 0.0, budget: SamplingParams = DEFAULT_BUDGET
) -> Verdict:
    """Try to falsify ``xstar`` being an ``eps``-normal to ``s`` at ``xbar``.

    The ratio ``<x*, x - xbar> / |x - xbar|`` is evaluated on projected
    points at the finest scales; a violation must persist across all of them.
    """
    xbar = as_vec(xbar, s.dim)
    xstar = as_vec(xstar, s.dim)
    nx = float(np.linalg.norm(xstar))
    if nx == 0.0:
        return Verdict.holds(worst_ratio=0.0)
    scales = sorted(budget.scales)[: budget.persistence]
    slack = budget.slack * nx
    worst = -math.inf
    for u in budget.directions(s.dim):
        ratios, wit = [], None
        for t in scales:
            p = s.project(xbar + t * u).point
            d = p - xbar
            n = float(np.linalg.norm(d))
            if n <= 1e-14 * t:
                ratios = []
                break
            ratios.append(float(xstar @ d) / n)
            if wit is None:
                wit = p
        if not ratios:
            continue
        worst = max(worst, min(ratios))
        if min(ratios) > eps + slack:
            return Verdict.violated(wit, ratio=min(ratios), direction=u)
    return Verdict.holds(worst_ratio=worst if worst > -math.inf else 0.0)


# -- planar helpers ----------------------------------------------------------------


def circle_samples(member, dim: int = 2, count: int = 3600) -> np.ndarray:
    """Unit planar directions accepted by the predicate ``member``."""
    U = sphere_directions(dim, count)
    return U[[bool(member(u)) for u in U]]


def angular_hausdorff(A: np.ndarray, B: np.ndarray) -> float:
    """Hausdorff distance between two sets of unit directions (radians)."""
    if len(A) == 0 or len(B) == 0:
        return math.inf if len(A) != len(B) else 0.0
    A = A / np.linalg.norm(A, axis=1)[:, None]
    B = B / np.linalg.norm(B, axis=1)[:, None]
    C = np.arccos(np.clip(A @ B.T, -1.0, 1.0))
    return float(max(C.min(axis=1).max(), C.min(axis=0).max()))


def arcs_from_directions(V: np.ndarray, gap: float) -> list[tuple[float, float]]:
    """Group planar directions into maximal angular arcs with spacing <= ``gap``.

    Each arc is ``(start, end)`` with ``start <= end`` in radians, measured
    counterclockwise; a full circle is returned as ``(0, 2 pi)``.
    """
    if len(V) == 0:
        return []
    th = np.sort(np.mod(np.arctan2(V[:, 1], V[:, 0]), 2 * math.pi))
    diffs = np.diff(np.append(th, th[0] + 2 * math.pi))
    if np.all(diffs <= gap):
        return [(0.0, 2 * math.pi)]
    # start just after the largest gap so no arc wraps the cut
    j = int(np.argmax(diffs)) + 1
    th = np.concatenate([th[j:], th[:j] + 2 * math.pi])
    arcs, start = [], th[0]
    for a, b in zip(th[:-1], th[1:]):
        if b - a > gap:
            arcs.append((float(start), float(a)))
            start = b
    arcs.append((float(start), float(th[-1])))
    return arcs


def arc_cone(start: float, end: float) -> PolyCone:
    """Convex planar cone spanned by an arc of angular width < pi (or a halfplane)."""
    g0 = np.array([math.cos(start), math.sin(start)])
    g1 = np.array([math.cos(end), math.sin(end)])
    width = end - start
    if width < math.pi - 1e-9:
        return PolyCone(2, generators=np.array([g0, g1]))
    mid = 0.5 * (start + end)
    gm = np.array([math.cos(mid), math.sin(mid)])
    return PolyCone(2, generators=np.array([g0, gm, g1]))
