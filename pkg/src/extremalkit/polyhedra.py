"""Low-level polyhedral machinery.

Cones are handled in two representations:

* H-rep: rows ``A`` with cone ``{x : A x <= 0}``;
* V-rep: generator rows ``G`` with cone ``{G^T lam : lam >= 0}``.

Conversion uses the double-description method (any dimension) or angular
sorting in the plane. Projections use cyclic Dykstra (H-rep) and projected
gradient with Barzilai-Borwein steps (V-rep); both finish with an active-set
polish that is accepted only if it passes the KKT conditions.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import linprog

_EPS = 1e-10


def normalize_rows(M: np.ndarray, drop_zero: bool = True) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return M.reshape(0, M.shape[1] if M.ndim == 2 else 0)
    norms = np.linalg.norm(M, axis=1)
    keep = norms > _EPS if drop_zero else np.ones(len(M), dtype=bool)
    return M[keep] / norms[keep, None]


def unique_rows(M: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    out: list[np.ndarray] = []
    for r in M:
        if not any(np.linalg.norm(r - q) <= tol for q in out):
            out.append(r)
    if not out:
        return M[:0]
    return np.array(out)


# -- projections -------------------------------------------------------------


def project_halfspace(a: np.ndarray, y: np.ndarray) -> np.ndarray:
    s = float(a @ y)
    if s <= 0.0:
        return y.copy()
    return y - (s / float(a @ a)) * a


def _polish_hrep(A: np.ndarray, y: np.ndarray, x: np.ndarray, tol: float) -> np.ndarray | None:
    """Exact projection using the rows that look active at the Dykstra iterate ``x``.

    By Moreau decomposition the projection onto ``{A_S z <= 0}`` is
    ``y - A_S^T mu`` with ``mu`` the NNLS fit of ``y`` by the rows ``A_S``.
    A generous ``S`` is harmless: the result is accepted only when it is
    feasible for every row, which makes it the projection onto the full cone.
    """
    scale = max(1.0, float(np.linalg.norm(y)))
    An = normalize_rows(A)
    act = An @ x >= -1e-3 * scale
    if not np.any(act):
        return y.copy() if np.all(An @ y <= tol * scale) else None
    B = A[act]
    mu, _ = nnls_bb(B, y)
    cand = y - B.T @ mu
    # nearly antiparallel rows make the NNLS slow to settle; re-solve the
    # equality system on its support, which is exact for the right support
    supp = mu > 1e-12 * max(1.0, float(mu.max()))
    if supp.any():
        Bs = B[supp]
        nu = np.linalg.lstsq(Bs @ Bs.T, Bs @ y, rcond=None)[0]
        if np.all(nu >= 0):
            exact = y - Bs.T @ nu
            if float(np.max(An @ exact)) < float(np.max(An @ cand)):
                cand, mu = exact, nu
                B = Bs
    # y - B^T mu cancels terms of size |B^T mu|; rounding scales with them
    scale = max(scale, float(mu @ np.linalg.norm(B, axis=1)))
    if np.any(An @ cand > tol * scale):
        return None
    return cand


def dykstra_polycone(
    A: np.ndarray,
    y: np.ndarray,
    step_tol: float = 1e-12,
    max_sweeps: int = 100_000,
    polish_every: int = 25,
) -> tuple[np.ndarray, bool]:
    """Project ``y`` onto ``{x : A x <= 0}``.

    Returns ``(x, converged)``.
    """
    y = np.asarray(y, dtype=float)
    if len(A) == 0 or np.all(A @ y <= 0.0):
        return y.copy(), True
    if len(A) == 1:
        return project_halfspace(A[0], y), True
    x = y.copy()
    incr = np.zeros((len(A), len(y)))
    An = A / np.einsum("ij,ij->i", A, A)[:, None]
    for sweep in range(1, max_sweeps + 1):
        x_prev = x
        for j in range(len(A)):
            z = x + incr[j]
            s = A[j] @ z
            x = z - s * An[j] if s > 0.0 else z
            incr[j] = z - x
        moved = float(np.linalg.norm(x - x_prev))
        if sweep % polish_every == 0 or moved < step_tol:
            p = _polish_hrep(A, y, x, 1e-11)
            if p is not None:
                return p, True
        if moved < step_tol:
            return x, True
    return x, False


def nnls_bb(
    G: np.ndarray,
    y: np.ndarray,
    step_tol: float = 1e-12,
    max_iter: int = 100_000,
) -> tuple[np.ndarray, float]:
    """Nonnegative least squares ``min ||G^T lam - y||`` by projected BB gradient.

    ``G`` holds generators as rows. Barzilai-Borwein steps are safeguarded by
    a nonmonotone line search over the last 10 objective values. Returns
    ``(lam, residual_norm)``.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    y = np.asarray(y, dtype=float)
    k = len(G)
    if k == 0 or G.size == 0:
        return np.zeros(0), float(np.linalg.norm(y))
    H = G @ G.T
    c = G @ y

    def f(v):
        return 0.5 * float(v @ H @ v) - float(c @ v)

    lam = np.maximum(c, 0.0) / np.maximum(np.diag(H), 1e-300)
    lam *= 1.0 / max(1.0, len(lam))
    grad = H @ lam - c
    L = max(float(np.linalg.eigvalsh(H)[-1]), 1e-300)
    step = 1.0 / L
    recent = [f(lam)]
    for it in range(max_iter):
        pg = np.maximum(lam - grad / L, 0.0) - lam
        if float(np.linalg.norm(pg)) < step_tol:
            break
        d = np.maximum(lam - step * grad, 0.0) - lam
        gd = float(grad @ d)
        fmax = max(recent[-10:])
        theta = 1.0
        while True:
            new = lam + theta * d
            fn = f(new)
            if fn <= fmax + 1e-4 * theta * gd or theta < 1e-12:
                break
            theta *= 0.5
        g_new = H @ new - c
        s_, dg = new - lam, g_new - grad
        lam, grad = new, g_new
        recent.append(fn)
        denom = float(s_ @ dg)
        step = float(s_ @ s_) / denom if denom > 0 else 1.0 / L
        step = min(max(step, 1e-10 / L), 1e10 / L)
        if it % 20 == 19:
            pol = _polish_nnls(G, H, c, lam)
            if pol is not None:
                lam = pol
                break
        if it == 200:
            # slow BB tail (degenerate or rank-deficient); finish exactly
            lam = _active_set_nnls(G, y, lam > 0)
            break
    pol = _polish_nnls(G, H, c, lam)
    if pol is not None:
        lam = pol
    res = float(np.linalg.norm(G.T @ lam - y))
    return lam, res


def _polish_nnls(G, H, c, lam) -> np.ndarray | None:
    scale = max(1.0, float(np.abs(c).max()))
    supp = lam > 1e-12 * scale
    out = np.zeros_like(lam)
    if np.any(supp):
        sol, *_ = np.linalg.lstsq(H[np.ix_(supp, supp)], c[supp], rcond=None)
        if np.any(sol < 0):
            return None
        out[supp] = sol
    grad = H @ out - c
    if np.any(grad[~supp] < -1e-10 * scale):
        return None
    if np.any(np.abs(grad[supp]) > 1e-9 * scale):
        return None
    return out


def _active_set_nnls(G: np.ndarray, y: np.ndarray, passive: np.ndarray, max_iter: int = 500) -> np.ndarray:
    """Lawson-Hanson active-set NNLS, started from the given passive set."""
    k = len(G)
    A = G.T
    P = np.zeros(k, dtype=bool)
    lam = np.zeros(k)
    tol = 1e-12 * max(1.0, float(np.abs(A).max()) * k)

    def ls(mask):
        z = np.zeros(k)
        if np.any(mask):
            z[mask] = np.linalg.lstsq(A[:, mask], y, rcond=None)[0]
        return z

    # warm start only with a passive set whose LS solution is feasible
    if np.any(passive):
        z = ls(passive)
        if np.all(z[passive] > 0):
            P, lam = passive.copy(), z
    for _ in range(max_iter):
        wgrad = A.T @ (y - A @ lam)
        cand = (~P) & (wgrad > tol)
        if not np.any(cand):
            break
        j = int(np.argmax(np.where(cand, wgrad, -np.inf)))
        P[j] = True
        for _ in range(k + 1):
            z = ls(P)
            if np.all(z[P] > 0):
                lam = z
                break
            neg = P & (z <= 0)
            alpha = float(np.min(lam[neg] / (lam[neg] - z[neg])))
            lam = lam + alpha * (z - lam)
            P &= lam > tol
            lam[~P] = 0.0
    return lam


def cone_residual(G: np.ndarray, y: np.ndarray) -> float:
    """Distance from ``y`` to ``cone(G)``."""
    return nnls_bb(G, y)[1]


# -- representation conversion ----------------------------------------------


def _prune_redundant(R: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    keep = list(range(len(R)))
    i = 0
    while i < len(keep):
        j = keep[i]
        others = [k for k in keep if k != j]
        if others and cone_residual(R[others], R[j]) <= tol:
            keep.pop(i)
        else:
            i += 1
    return R[keep]


def double_description(A: np.ndarray, dim: int) -> np.ndarray:
    """Generators of ``{x : A x <= 0}`` by the double-description method.

    Lines are returned as opposite pairs of generators.
    """
    R = np.vstack([np.eye(dim), -np.eye(dim)])
    for a in normalize_rows(A) if len(A) else []:
        s = R @ a
        neg, zero, pos = s < -_EPS, np.abs(s) <= _EPS, s > _EPS
        new = [R[neg], R[zero]]
        P, N = R[pos], R[neg]
        sp, sn = s[pos], s[neg]
        if len(P) and len(N):
            combos = sp[:, None, None] * N[None, :, :] - sn[None, :, None] * P[:, None, :]
            new.append(combos.reshape(-1, dim))
        R = np.vstack(new) if any(len(b) for b in new) else np.zeros((0, dim))
        R = unique_rows(normalize_rows(R)) if len(R) else R
        if len(R):
            R = _prune_redundant(R)
    return R


def angular_hrep_to_vrep(A: np.ndarray) -> np.ndarray:
    """Planar H-rep to V-rep by sorting candidate boundary angles."""
    A = normalize_rows(A) if len(A) else np.zeros((0, 2))
    if len(A) == 0:
        return np.vstack([np.eye(2), -np.eye(2)])

    def feasible(u):
        return bool(np.all(A @ u <= 1e-12))

    cands = []
    for a in A:
        perp = np.array([-a[1], a[0]])
        for u in (perp, -perp):
            if feasible(u):
                cands.append(u)
    if not cands:
        return np.zeros((0, 2))
    cands = unique_rows(np.array(cands))
    ang = np.sort(np.arctan2(cands[:, 1], cands[:, 0]))
    out = [np.array([math.cos(t), math.sin(t)]) for t in ang]
    # midpoints of feasible gaps keep arcs of span >= pi from collapsing to lines
    for t0, t1 in zip(ang, np.append(ang[1:], ang[0] + 2 * math.pi)):
        mid = 0.5 * (t0 + t1)
        u = np.array([math.cos(mid), math.sin(mid)])
        if feasible(u):
            out.append(u)
    out = np.array(out)
    out[np.abs(out) < 1e-15] = 0.0
    return _prune_redundant(unique_rows(out))


def hrep_to_vrep(A: np.ndarray, dim: int) -> np.ndarray:
    A = np.asarray(A, dtype=float).reshape(-1, dim)
    if dim == 2:
        return angular_hrep_to_vrep(A)
    return double_description(A, dim)


def vrep_to_hrep(G: np.ndarray, dim: int) -> np.ndarray:
    """Facet rows of ``cone(G)``: generators of the polar ``{y : G y <= 0}``."""
    G = np.asarray(G, dtype=float).reshape(-1, dim)
    return hrep_to_vrep(G, dim)


# -- linear programming -------------------------------------------------------


def lp_feasible(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray | None, np.ndarray | None]:
    """Find ``x`` with ``A x <= b`` or a Farkas certificate.

    Returns ``(x, None)`` when feasible and ``(None, mu)`` otherwise, where
    ``mu >= 0``, ``A^T mu = 0`` and ``b^T mu = -1``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    m, n = A.shape
    if m == 0:
        return np.zeros(n), None
    res = linprog(np.zeros(n), A_ub=A, b_ub=b, bounds=[(None, None)] * n, method="highs")
    if res.status == 0:
        return res.x, None
    A_eq = np.vstack([A.T, b[None, :]])
    b_eq = np.append(np.zeros(n), -1.0)
    far = linprog(np.ones(m), A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * m, method="highs")
    if far.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}; {far.message}")
    return None, far.x


def _split(lam: np.ndarray, sizes: list[int]) -> list[np.ndarray]:
    out, k = [], 0
    for s in sizes:
        out.append(lam[k : k + s])
        k += s
    return out


def nontrivial_zero_combination(blocks: list[np.ndarray], tol: float = 1e-12) -> tuple[float, list[np.ndarray]]:
    """Largest ``max_i |x_i|_inf`` with ``x_i = G_i^T lam_i``, ``sum_i x_i = 0``, ``lam >= 0``, ``sum(lam) <= 1``.

    ``blocks[i]`` holds the generator rows of the i-th cone. A positive
    value means the vectors ``x_i`` themselves are not all zero; a positive
    multiplier sum alone is not enough when a cone contains a line.
    Returns the optimal value and the per-block multipliers.
    """
    sizes = [len(B) for B in blocks]
    total = sum(sizes)
    if total == 0:
        return 0.0, [np.zeros(0) for _ in blocks]
    dim = next(B.shape[1] for B in blocks if len(B))
    Gall = np.vstack([B for B in blocks if len(B)])
    common = dict(A_ub=np.ones((1, total)), b_ub=[1.0], A_eq=Gall.T, b_eq=np.zeros(dim),
                  bounds=[(0, None)] * total, method="highs")
    res = linprog(-np.ones(total), **common)
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    if -res.fun <= tol:
        return 0.0, _split(np.zeros(total), sizes)
    best, best_lam = 0.0, np.zeros(total)
    k = 0
    for B in blocks:
        for j in range(dim):
            for sign in (1.0, -1.0):
                c = np.zeros(total)
                c[k : k + len(B)] = -sign * B[:, j]
                r = linprog(c, **common)
                if r.status == 0 and -r.fun > best:
                    best, best_lam = float(-r.fun), r.x
        k += len(B)
    return best, _split(best_lam, sizes)
