"""Shared value types: tolerances, verdicts and the exception hierarchy."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np


@dataclass(frozen=True)
class Tolerances:
    """Single source of truth for numerical thresholds.

    Every operation that compares floats takes one of these (or falls back to
    ``DEFAULT_TOL``); tests assert against the same values.
    """

    membership: float = 1e-8
    consistency: float = 1e-8
    euler: float = 1e-7
    norm: float = 1e-7
    zero: float = 1e-9
    angular: float = 1e-3
    step: float = 1e-12

    def override(self, **kwargs: float) -> "Tolerances":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


DEFAULT_TOL = Tolerances()


class Outcome(str, enum.Enum):
    HOLDS = "holds"
    VIOLATED = "violated"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Verdict:
    """Three-valued answer shared by every checker.

    ``witness`` carries replay data when the outcome is VIOLATED (a vector,
    an index, or a small dict); ``detail`` holds auxiliary numbers.
    """

    outcome: Outcome
    witness: Any = None
    detail: dict = field(default_factory=dict)

    @classmethod
    def holds(cls, **detail: Any) -> "Verdict":
        return cls(Outcome.HOLDS, None, detail)

    @classmethod
    def violated(cls, witness: Any, **detail: Any) -> "Verdict":
        return cls(Outcome.VIOLATED, witness, detail)

    @classmethod
    def unknown(cls, **detail: Any) -> "Verdict":
        return cls(Outcome.UNKNOWN, None, detail)

    @property
    def is_holds(self) -> bool:
        return self.outcome is Outcome.HOLDS

    @property
    def is_violated(self) -> bool:
        return self.outcome is Outcome.VIOLATED

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "witness": to_jsonable(self.witness),
            "detail": to_jsonable(self.detail),
        }


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy containers and dataclass-like values to JSON types."""
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        # strict JSON has no infinities; keep them readable
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()] if obj.dtype.kind == "f" and not np.all(np.isfinite(obj)) else obj.tolist()
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def as_vec(x: Any, dim: int | None = None) -> np.ndarray:
    v = np.asarray(x, dtype=float).reshape(-1)
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"expected a vector of length {dim}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    return v


def frozen(a: Any) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


# -- exceptions -------------------------------------------------------------


class ExtremalKitError(Exception):
    """Base class for all toolkit errors."""


class NonConvergence(ExtremalKitError):
    pass


class UnsupportedKind(ExtremalKitError):
    pass


class NotConvex(ExtremalKitError):
    pass


class EmptyFan(ExtremalKitError):
    pass


class FitFailure(ExtremalKitError):
    pass


class BudgetExceeded(ExtremalKitError):
    def __init__(self, message: str, state: Any = None):
        super().__init__(message)
        self.state = state


class Diverged(ExtremalKitError):
    """Raised when an iterate escapes the coercivity radius.

    ``direction`` is the normalized escape direction, a candidate common
    nonzero point of the cones.
    """

    def __init__(self, direction: np.ndarray, state: Any = None):
        super().__init__(f"iterates diverged along {np.round(direction, 6).tolist()}")
        self.direction = direction
        self.state = state


class MembershipFailed(ExtremalKitError):
    def __init__(self, index: int, message: str = ""):
        super().__init__(message or f"normal certificate failed for cone {index}")
        self.index = index


class NoNonzeroNormal(ExtremalKitError):
    pass


class QCViolated(ExtremalKitError):
    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report


class LiftProjectionFailure(ExtremalKitError):
    pass


class StrictNegativityFails(ExtremalKitError):
    def __init__(self, witness: np.ndarray):
        super().__init__(f"<x*, x> >= 0 at x = {np.round(witness, 9).tolist()}")
        self.witness = witness


class SchemaError(ExtremalKitError):
    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer
        self.message = message


class NotTangentiallyExtremal(ExtremalKitError):
    """No certifying shifts for the tangent cone system were found within budget."""

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report
