"""Problem documents: schema validation, parsing, serialization."""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np

from .core import SchemaError, to_jsonable
from .sets import SetSpec, from_dict
from .solver import ConeSystem


@functools.lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("extremalkit").joinpath("schema").joinpath(f"{name}.schema.json").read_text()
    return json.loads(text)


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path) or "/"


def _kind_failure(e) -> bool:
    return e.validator == "const" and list(e.relative_path) == ["kind"]


def _narrow(err):
    """Inside a ``oneOf`` over set kinds, report the branch whose ``kind`` matched."""
    while err.validator == "oneOf" and err.context:
        branches: dict = {}
        for sub in err.context:
            branches.setdefault(sub.relative_schema_path[0], []).append(sub)
        live = [errs for errs in branches.values() if not any(_kind_failure(e) for e in errs)]
        if len(live) != 1:
            break
        err = jsonschema.exceptions.best_match(live[0])
    return err


def validate(doc, name: str = "problem") -> None:
    """Raise ``SchemaError`` with the JSON pointer of the most relevant violation."""
    validator = jsonschema.Draft202012Validator(load_schema(name))
    err = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    if err is not None:
        err = _narrow(err)
        raise SchemaError(err.message, _pointer(err.absolute_path))


def _matrix(rows, m: int, n: int, where: str) -> np.ndarray:
    A = np.asarray(rows, dtype=float)
    if A.shape != (m, n):
        raise SchemaError(f"expected a {m}x{n} array, got shape {list(A.shape)}", where)
    return A


def _setspecs(items, dim: int, where: str) -> list[SetSpec]:
    out = []
    for k, d in enumerate(items):
        try:
            s = from_dict(d)
        except (ValueError, KeyError) as e:
            raise SchemaError(str(e), f"{where}/{k}") from None
        if s.dim != dim:
            raise SchemaError(f"set lives in R^{s.dim}, problem dimension is {dim}", f"{where}/{k}")
        out.append(s)
    return out


@dataclass
class Problem:
    dimension: int
    id: str = ""
    description: str = ""
    cones: list = field(default_factory=list)
    tail: SetSpec | None = None
    shifts: np.ndarray | None = None
    weights: dict | None = None
    solver: dict = field(default_factory=dict)
    sets: list = field(default_factory=list)
    point: np.ndarray | None = None
    target: int = 1
    epsilon: float | None = None
    decomposition: dict | None = None
    operations: list = field(default_factory=list)

    @classmethod
    def from_dict(cls, doc: dict) -> "Problem":
        validate(doc, "problem")
        n = doc["dimension"]
        p = cls(n, doc.get("id", ""), doc.get("description", ""))
        p.cones = _setspecs(doc.get("cones", []), n, "/cones")
        if "tail" in doc:
            p.tail = _setspecs([doc["tail"]], n, "/tail")[0]
        if "shifts" in doc:
            if not p.cones:
                raise SchemaError("shifts need cones", "/shifts")
            p.shifts = _matrix(doc["shifts"], len(p.cones), n, "/shifts")
        if "weights" in doc:
            w = doc["weights"]
            if "explicit" in w and len(w["explicit"]) != len(p.cones):
                raise SchemaError(f"expected {len(p.cones)} weights", "/weights/explicit")
            p.weights = dict(w)
        p.solver = dict(doc.get("solver", {}))
        p.sets = _setspecs(doc.get("sets", []), n, "/sets")
        if "point" in doc:
            p.point = _matrix([doc["point"]], 1, n, "/point")[0]
        p.target = int(doc.get("target", 1))
        if p.sets and p.target > len(p.sets):
            raise SchemaError(f"target {p.target} exceeds the number of sets", "/target")
        if "epsilon" in doc:
            p.epsilon = float(doc["epsilon"])
        if "decomposition" in doc:
            d = dict(doc["decomposition"])
            if len(d["x_star"]) != n:
                raise SchemaError(f"expected a vector of length {n}", "/decomposition/x_star")
            if d["mode"] == "fuzzy" and "epsilon" not in d:
                raise SchemaError("fuzzy mode needs epsilon", "/decomposition")
            p.decomposition = d
        p.operations = list(doc.get("operations", []))
        return p

    def to_dict(self) -> dict:
        d: dict = {"dimension": self.dimension}
        if self.id:
            d["id"] = self.id
        if self.description:
            d["description"] = self.description
        if self.cones:
            d["cones"] = [c.to_dict() for c in self.cones]
        if self.tail is not None:
            d["tail"] = self.tail.to_dict()
        if self.shifts is not None:
            d["shifts"] = self.shifts.tolist()
        if self.weights is not None:
            d["weights"] = dict(self.weights)
        if self.solver:
            d["solver"] = dict(self.solver)
        if self.sets:
            d["sets"] = [s.to_dict() for s in self.sets]
        if self.point is not None:
            d["point"] = self.point.tolist()
        if self.target != 1:
            d["target"] = self.target
        if self.epsilon is not None:
            d["epsilon"] = self.epsilon
        if self.decomposition is not None:
            d["decomposition"] = dict(self.decomposition)
        if self.operations:
            d["operations"] = list(self.operations)
        return to_jsonable(d)

    def weight_vector(self, m: int) -> np.ndarray:
        w = self.weights or {"rule": "geometric", "base": 0.5}
        if "explicit" in w:
            return np.asarray(w["explicit"], dtype=float)
        return float(w.get("base", 0.5)) ** np.arange(1, m + 1, dtype=float)

    def system(self) -> ConeSystem:
        if not self.cones:
            raise SchemaError("this operation needs 'cones'", "/cones")
        return ConeSystem.build(self.cones, self.shifts, self.weight_vector(len(self.cones)), tail=self.tail)


def load_problem(path) -> Problem:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise SchemaError(f"invalid JSON: {e.msg} at line {e.lineno}", "/") from None
    return Problem.from_dict(doc)


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, full float precision, no NaN/Infinity literals."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"
