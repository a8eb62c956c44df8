"""Dispatch of named operations on a parsed problem."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .cones import (DEFAULT_BUDGET, SamplingParams, contingent_estimate, frechet_normal_cone_poly,
                    limiting_normal_estimate)
from .core import (DEFAULT_TOL, ExtremalKitError, LiftProjectionFailure, Outcome, QCViolated, SchemaError,
                   StrictNegativityFails, Tolerances, UnsupportedKind, to_jsonable)
from .intersection import check_strict_negativity, fuzzy_decompose, qualification_for, refined_decompose
from .io import Problem
from .solver import (Status, check_conic_extremality, check_nonoverlapping, scaling_check, solve,
                     trivial_witness)
from .tangency import (CERTIFIED, contingent_extremal_pipeline, fit_fan, limiting_euler_check,
                       local_extremality_check, set_extremality_check, tan_check, tne_check)

OPERATIONS = (
    "solve", "nonoverlap", "extremality", "scaling", "euler", "qualification", "strict_negativity",
    "decompose", "fan", "normals", "tne", "tan", "pipeline", "local_extremality", "set_extremality",
    "trivial_witness",
)

_STATUS_OUTCOME = {
    Status.EXTREMAL.value: Outcome.HOLDS,
    Status.NOT_EXTREMAL.value: Outcome.VIOLATED,
    Status.DEGENERATE.value: Outcome.UNKNOWN,
    Status.BUDGET_EXCEEDED.value: Outcome.UNKNOWN,
}


@dataclass
class Context:
    seed: int = 0
    tol: Tolerances = DEFAULT_TOL
    max_iter: int = 20_000
    budget: SamplingParams = DEFAULT_BUDGET
    artifacts: dict = field(default_factory=dict)


def make_budget(overrides: dict | None, seed: int, samples: int | None = None) -> SamplingParams:
    kw = dict(overrides or {})
    names = {f.name for f in dataclasses.fields(SamplingParams)}
    bad = sorted(set(kw) - names)
    if bad:
        raise SchemaError(f"unknown budget field(s): {', '.join(bad)}", "/budget")
    for k in ("scales", "shells"):
        if k in kw:
            kw[k] = tuple(float(v) for v in kw[k])
    if samples is not None:
        kw["n_dirs"] = int(samples)
    kw["seed"] = seed
    return dataclasses.replace(DEFAULT_BUDGET, **kw)


def _need(value, what: str, pointer: str):
    if value is None or (isinstance(value, list) and not value):
        raise SchemaError(f"this operation needs '{what}'", pointer)
    return value


def _point(p: Problem) -> np.ndarray:
    return p.point if p.point is not None else np.zeros(p.dimension)


def _target(p: Problem):
    return _need(p.sets, "sets", "/sets")[p.target - 1]


def _verdict(v) -> tuple[Outcome, dict]:
    return v.outcome, v.to_dict()


def _op_solve(p, ctx):
    res = solve(p.system(), seed=ctx.seed, tol=ctx.tol, max_iter=ctx.max_iter)
    return _STATUS_OUTCOME[res.certificate.status.value], res.to_dict()


def _op_nonoverlap(p, ctx):
    return _verdict(check_nonoverlapping(p.system(), ctx.budget, tol=ctx.tol.zero))


def _op_extremality(p, ctx):
    return _verdict(check_conic_extremality(p.system(), p.shifts, search=True))


def _op_scaling(p, ctx):
    return _verdict(scaling_check(p.system(), p.shifts))


def _op_euler(p, ctx):
    system = p.system()
    return _verdict(limiting_euler_check(list(system.cones), system.weights, tol=ctx.tol.zero))


def _op_qualification(p, ctx):
    rep = qualification_for(_need(p.cones, "cones", "/cones"))
    return rep.outcome.outcome, rep.to_dict()


def _x_star(p: Problem) -> np.ndarray:
    d = _need(p.decomposition, "decomposition", "/decomposition")
    return np.asarray(d["x_star"], dtype=float)


def _op_strict_negativity(p, ctx):
    return _verdict(check_strict_negativity(_need(p.cones, "cones", "/cones"), _x_star(p)))


def _op_decompose(p, ctx):
    cones = _need(p.cones, "cones", "/cones")
    d = p.decomposition or {}
    xs = _x_star(p)
    try:
        if d["mode"] == "fuzzy":
            D = fuzzy_decompose(xs, float(d["epsilon"]), cones, tol=ctx.tol, seed=ctx.seed)
            ok = D.residual <= D.epsilon
        else:
            D = refined_decompose(xs, cones, tol=ctx.tol, seed=ctx.seed)
            ok = D.residual <= ctx.tol.euler
    except QCViolated as e:
        return Outcome.VIOLATED, {"error": "qc_violated", "message": str(e), "qualification": e.report.to_dict()}
    except StrictNegativityFails as e:
        return Outcome.VIOLATED, {"error": "strict_negativity_fails", "witness": to_jsonable(e.witness)}
    except LiftProjectionFailure as e:
        return Outcome.UNKNOWN, {"error": "lift_projection_failure", "message": str(e)}
    return (Outcome.HOLDS if ok else Outcome.UNKNOWN), D.to_dict()


def _op_fan(p, ctx):
    s, xbar = _target(p), _point(p)
    fan = contingent_estimate(s, xbar, ctx.budget)
    ctx.artifacts["fan"] = fan
    out = {"base_point": to_jsonable(xbar), "count": len(fan.samples), "directions": to_jsonable(fan.directions)}
    try:
        fit = fit_fan(fan, s, ctx.budget)
    except ExtremalKitError as e:
        out["fit"] = None
        out["fit_error"] = str(e)
        return Outcome.UNKNOWN, out
    out["fit"] = fit.to_dict()
    return Outcome.HOLDS, out


def _op_normals(p, ctx):
    s, xbar = _target(p), _point(p)
    fan = limiting_normal_estimate(s, xbar, ctx.budget)
    ctx.artifacts["normals"] = fan
    out = {"base_point": to_jsonable(xbar), "rays": to_jsonable(fan.rays)}
    try:
        out["frechet"] = frechet_normal_cone_poly(s, xbar).to_dict()
    except UnsupportedKind:
        out["frechet"] = None
    return Outcome.HOLDS, out


def _op_tne(p, ctx):
    rep = tne_check(_target(p), _point(p), ctx.budget)
    return rep.outcome.outcome, rep.to_dict()


def _op_tan(p, ctx):
    rep = tan_check(_target(p), _point(p), ctx.budget)
    return rep.outcome.outcome, rep.to_dict()


def _pipeline(p, ctx, local: bool):
    sets = _need(p.sets, "sets", "/sets")
    W = p.weight_vector(len(sets)) if p.weights is not None else None
    shifts = None
    if p.shifts is not None and len(p.shifts) == len(sets) and not p.cones:
        shifts = p.shifts
    return contingent_extremal_pipeline(sets, _point(p), shifts=shifts, weights=W, budget=ctx.budget,
                                        tol=ctx.tol, seed=ctx.seed, local=local)


def _op_pipeline(p, ctx):
    rep = _pipeline(p, ctx, local=False)
    if rep.status == CERTIFIED:
        outcome = Outcome.HOLDS
    else:
        outcome = _STATUS_OUTCOME.get(rep.status, Outcome.VIOLATED)
    return outcome, rep.to_dict()


def _op_local_extremality(p, ctx):
    return _verdict(local_extremality_check(_need(p.sets, "sets", "/sets"), _point(p)))


def _op_set_extremality(p, ctx):
    return _verdict(set_extremality_check(_need(p.sets, "sets", "/sets")))


def _op_trivial_witness(p, ctx):
    eps = _need(p.epsilon, "epsilon", "/epsilon")
    tw = trivial_witness(_need(p.sets, "sets", "/sets"), _point(p), eps, ctx.budget)
    return Outcome.HOLDS, tw.to_dict()


_DISPATCH = {name: globals()[f"_op_{name}"] for name in OPERATIONS}


def run_operation(problem: Problem, op: str, ctx: Context) -> dict:
    """Run one named operation; returns ``{"outcome": ..., "result": ...}``."""
    if op not in _DISPATCH:
        raise SchemaError(f"unknown operation {op!r}", "/operations")
    outcome, result = _DISPATCH[op](problem, ctx)
    return {"outcome": outcome.value, "result": to_jsonable(result)}


def exit_code(outcomes) -> int:
    """2 if anything is violated, else 3 if anything is unknown, else 0."""
    outcomes = list(outcomes)
    if Outcome.VIOLATED.value in outcomes:
        return 2
    if Outcome.UNKNOWN.value in outcomes:
        return 3
    return 0
