"""Extremal systems of sets and cones: projections, cone estimates, extremality certificates."""

from .core import (DEFAULT_TOL, ExtremalKitError, Outcome, SchemaError, Tolerances, Verdict)
from .cones import (DEFAULT_BUDGET, PolyCone, PolyConeUnion, SamplingParams, contingent_estimate,
                    limiting_normal_estimate, polar)
from .intersection import fuzzy_decompose, qualification_for, refined_decompose
from .io import Problem, dumps, load_problem
from .sets import (Ball, Epigraph, GeneratedCone, Halfspace, HalfplaneGraph, PolyhedralCone, Product,
                   Shifted, SetSpec, UnionOfConvexPieces, WholeSpace, from_dict)
from .solver import ConeSystem, Status, check_conic_extremality, check_nonoverlapping, minimize_phi, solve
from .tangency import contingent_extremal_pipeline, tan_check, tne_check

__version__ = "0.1.0"
