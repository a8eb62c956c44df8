"""Command-line entry point.

Exit codes: 0 success/holds, 2 violated or not extremal, 3 unknown within
budget, 1 error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import DEFAULT_TOL, ExtremalKitError, SchemaError
from .corpus import CORPUS_IDS, load_example
from .io import Problem, dumps, load_problem, validate
from .runner import Context, exit_code, make_budget, run_operation

CHECK_KINDS = ("nonoverlap", "extremality", "scaling", "euler", "qualification", "strict_negativity",
               "set_extremality", "local_extremality", "trivial_witness")
TANGENCY_KINDS = ("fan", "normals", "tne", "tan", "pipeline")
EXIT_OK, EXIT_ERROR, EXIT_VIOLATED, EXIT_UNKNOWN = 0, 1, 2, 3


@dataclass
class RunConfig:
    command: str
    argument: str | None = None
    input_path: str | None = None
    output_path: str | None = None
    seed: int | None = None
    tol: dict = field(default_factory=dict)
    max_iter: int | None = None
    samples: int | None = None
    budget: dict = field(default_factory=dict)


def parse_tol(text: str | None) -> dict:
    """``1e-9`` sets the Euler and norm residual tolerances; ``k=v,k=v`` sets named fields."""
    if not text:
        return {}
    try:
        if "=" not in text:
            v = float(text)
            return {"euler": v, "norm": v}
        out = {}
        for item in text.split(","):
            k, v = item.split("=", 1)
            out[k.strip()] = float(v)
    except ValueError:
        raise SchemaError(f"cannot parse --tol {text!r}", "/tol") from None
    known = set(asdict(DEFAULT_TOL))
    bad = sorted(set(out) - known)
    if bad:
        raise SchemaError(f"unknown tolerance(s): {', '.join(bad)}", "/tol")
    return out


def parse_budget(text: str | None) -> dict:
    if not text:
        return {}
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"--budget is not valid JSON: {e.msg}", "/budget") from None
    if not isinstance(d, dict):
        raise SchemaError("--budget must be a JSON object", "/budget")
    return d


def _context(cfg: RunConfig, problem: Problem) -> Context:
    seed = cfg.seed if cfg.seed is not None else int(problem.solver.get("seed", 0))
    tol_kw = {}
    if "tol" in problem.solver:
        tol_kw.update(euler=problem.solver["tol"], norm=problem.solver["tol"])
    tol_kw.update(cfg.tol)
    max_iter = cfg.max_iter or int(problem.solver.get("max_iter", 20_000))
    budget = make_budget(cfg.budget, seed, cfg.samples)
    return Context(seed=seed, tol=DEFAULT_TOL.override(**tol_kw), max_iter=max_iter, budget=budget)


def _operations(cfg: RunConfig, problem: Problem) -> list[str]:
    if cfg.command in ("solve",):
        return ["solve"]
    if cfg.command in ("check", "tangency"):
        return [cfg.argument]
    if cfg.command == "decompose":
        d = dict(problem.decomposition or {})
        if not d:
            raise SchemaError("decompose needs a 'decomposition' block", "/decomposition")
        d["mode"] = cfg.argument
        if cfg.argument == "fuzzy" and "epsilon" not in d:
            if problem.epsilon is None:
                raise SchemaError("fuzzy mode needs epsilon", "/decomposition/epsilon")
            d["epsilon"] = problem.epsilon
        problem.decomposition = d
        return ["decompose"]
    if not problem.operations:
        raise SchemaError("the problem lists no operations", "/operations")
    return list(problem.operations)


def _error_info(e: Exception) -> dict:
    info = {"type": type(e).__name__, "message": getattr(e, "message", str(e))}
    if isinstance(e, SchemaError):
        info["pointer"] = e.pointer or "/"
    return info


def lookup(results: dict, path: str):
    """Dotted path into results; a bare operation name means its outcome."""
    parts = path.split(".")
    node = results[parts[0]]
    if len(parts) == 1:
        return node["outcome"]
    for p in parts[1:]:
        node = node[int(p)] if isinstance(node, list) else node[p]
    return node


def _close(got, want, tol: float) -> bool:
    if isinstance(want, (int, float)) and not isinstance(want, bool) or isinstance(want, list):
        try:
            a = np.asarray(got, dtype=float)
            b = np.asarray(want, dtype=float)
        except (TypeError, ValueError):
            return False
        return a.shape == b.shape and bool(np.all(np.abs(a - b) <= tol))
    return got == want


def match_expected(report: dict, expected: dict) -> list[str]:
    mismatches = []
    if "exit_code" in expected and report["exit_code"] != expected["exit_code"]:
        mismatches.append(f"exit_code: expected {expected['exit_code']}, got {report['exit_code']}")
    results = report.get("results", {})
    for path, want in expected.get("labels", {}).items():
        try:
            got = lookup(results, path)
        except (KeyError, IndexError, ValueError, TypeError):
            got = None
        if got != want:
            mismatches.append(f"{path}: expected {want!r}, got {got!r}")
    for item in expected.get("values", []):
        try:
            got = lookup(results, item["path"])
        except (KeyError, IndexError, ValueError, TypeError):
            got = None
        if not _close(got, item["value"], item.get("tol", 0.0)):
            mismatches.append(f"{item['path']}: expected {item['value']!r}, got {got!r}")
    return mismatches


def execute(cfg: RunConfig, doc: dict | None = None) -> tuple[dict, Context | None]:
    """Run a non-batch config; returns the report and the context (for artifacts)."""
    t0 = time.perf_counter()
    report = {"toolkit_version": __version__, "config": asdict(cfg)}
    ctx = None
    try:
        problem = Problem.from_dict(doc) if doc is not None else load_problem(_need_input(cfg))
        ctx = _context(cfg, problem)
        results = {}
        for op in _operations(cfg, problem):
            results[op] = run_operation(problem, op, ctx)
        report["results"] = results
        report["exit_code"] = exit_code(r["outcome"] for r in results.values())
    except (ExtremalKitError, ValueError, OSError) as e:
        report["error"] = _error_info(e)
        report["exit_code"] = EXIT_ERROR
    report["wall_time_s"] = time.perf_counter() - t0
    return report, ctx


def _need_input(cfg: RunConfig) -> str:
    if not cfg.input_path:
        raise SchemaError(f"'{cfg.command}' needs --input", "/")
    return cfg.input_path


def reproduce(cfg: RunConfig) -> tuple[dict, Context | None]:
    try:
        doc, expected = load_example(cfg.argument)
    except SchemaError as e:
        return ({"toolkit_version": __version__, "config": asdict(cfg), "exit_code": EXIT_ERROR,
                 "error": _error_info(e),
                 "wall_time_s": 0.0}, None)
    report, ctx = execute(cfg, doc)
    report["example_id"] = cfg.argument
    report["mismatches"] = match_expected(report, expected)
    report["label_match"] = not report["mismatches"]
    return report, ctx


def _batch_entry(args) -> dict:
    entry, base_dir, cfg = args
    seed = entry.get("seed", cfg.seed)
    sub = RunConfig(
        command="reproduce" if "reproduce" in entry else "run",
        argument=entry.get("reproduce"),
        input_path=str(base_dir / entry["input"]) if "input" in entry else None,
        seed=seed, tol=cfg.tol, max_iter=cfg.max_iter, samples=cfg.samples, budget=cfg.budget,
    )
    if sub.command == "reproduce":
        report, _ = reproduce(sub)
        expected = None
        if "expected" in entry:
            _, expected = load_example(sub.argument)
            expected = {**expected, **entry["expected"]}
    else:
        report, _ = execute(sub)
        expected = entry.get("expected", {})
    if expected is not None:
        report["mismatches"] = match_expected(report, expected)
        report["label_match"] = not report["mismatches"]
    name = entry.get("name") or entry.get("reproduce") or entry.get("input")
    return {"name": name, "exit_code": report["exit_code"], "label_match": report["label_match"],
            "mismatches": report["mismatches"], "report": report}


def batch(cfg: RunConfig, jobs: int = 1) -> dict:
    t0 = time.perf_counter()
    report = {"toolkit_version": __version__, "config": asdict(cfg)}
    try:
        path = Path(cfg.argument)
        with open(path) as fh:
            manifest = json.load(fh)
        validate(manifest, "manifest")
    except (SchemaError, OSError, json.JSONDecodeError) as e:
        report.update(exit_code=EXIT_ERROR, wall_time_s=time.perf_counter() - t0,
                      error=_error_info(e))
        return report
    work = [(e, path.parent, cfg) for e in manifest["entries"]]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(_batch_entry, work))
    else:
        entries = [_batch_entry(w) for w in work]
    report["entries"] = entries
    report["matrix"] = {e["name"]: {"exit_code": e["exit_code"], "label_match": e["label_match"]} for e in entries}
    report["all_matched"] = all(e["label_match"] for e in entries)
    report["exit_code"] = EXIT_OK if report["all_matched"] else EXIT_VIOLATED
    report["wall_time_s"] = time.perf_counter() - t0
    return report


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", dest="input_path", help="problem JSON file")
    common.add_argument("--output", dest="output_path", help="report JSON path (.csv for fan/normal dumps)")
    common.add_argument("--seed", type=int, help="seed for every stochastic step")
    common.add_argument("--tol", help="a float, or name=value pairs separated by commas")
    common.add_argument("--max-iter", type=int, help="solver iteration cap")
    common.add_argument("--samples", type=int, help="number of probe directions")
    common.add_argument("--budget", help="JSON object of sampling overrides")
    common.add_argument("--quiet", action="store_true", help="do not print the report")

    ap = argparse.ArgumentParser(prog="extremalkit", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"extremalkit {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run the operations listed in the problem")
    sub.add_parser("solve", parents=[common], help="solve the shifted cone system")
    sub.add_parser("check", parents=[common], help="run one checker").add_argument("kind", choices=CHECK_KINDS)
    sub.add_parser("decompose", parents=[common], help="decompose a normal to an intersection").add_argument(
        "mode", choices=("fuzzy", "refined"))
    sub.add_parser("tangency", parents=[common], help="cone estimates and tangential checks").add_argument(
        "kind", choices=TANGENCY_KINDS)
    sub.add_parser("reproduce", parents=[common], help="run a corpus example").add_argument(
        "example_id", choices=CORPUS_IDS)
    b = sub.add_parser("batch", parents=[common], help="run a manifest of configs")
    b.add_argument("manifest")
    b.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    return ap


def _emit(report: dict, cfg: RunConfig, ctx: Context | None, quiet: bool) -> None:
    text = dumps(report)
    out = cfg.output_path
    if out and out.endswith(".csv"):
        fan = None
        if ctx is not None:
            fan = ctx.artifacts.get("fan") or ctx.artifacts.get("normals")
        if fan is None:
            print("error: CSV output needs a fan or normals operation", file=sys.stderr)
        else:
            Path(out).write_text(fan.to_csv())
    elif out:
        Path(out).write_text(text)
    if not quiet:
        sys.stdout.write(text)
    if "error" in report:
        err = report["error"]
        where = f" at {err['pointer']}" if "pointer" in err else ""
        print(f"error{where}: {err['message']}", file=sys.stderr)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = RunConfig(
            command=args.command,
            argument=getattr(args, "kind", None) or getattr(args, "mode", None)
            or getattr(args, "example_id", None) or getattr(args, "manifest", None),
            input_path=args.input_path, output_path=args.output_path, seed=args.seed,
            tol=parse_tol(args.tol), max_iter=args.max_iter, samples=args.samples,
            budget=parse_budget(args.budget),
        )
    except SchemaError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    ctx = None
    if cfg.command == "batch":
        report = batch(cfg, jobs=args.jobs)
    elif cfg.command == "reproduce":
        report, ctx = reproduce(cfg)
    else:
        report, ctx = execute(cfg)
    _emit(report, cfg, ctx, args.quiet)
    return int(report["exit_code"])


if __name__ == "__main__":
    sys.exit(main())
