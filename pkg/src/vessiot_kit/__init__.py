"""Vessiot-distribution tools for implicit ordinary differential equations.

Equations ``F(t, u, u', ..., u^(q)) = 0`` are treated as submanifolds of a
jet space.  The package classifies points, integrates generalised solutions,
computes invariant manifolds of the associated vector fields and places
evenly spaced streamlines for phase portraits.
"""
from __future__ import annotations

from .errors import (
    VessiotKitError,
    InputError,
    NumericError,
    SingularityError,
    ExprSyntaxError,
    UndeclaredVariableError,
    DomainError,
    ParameterError,
    RankIndeterminateError,
    NoDirectionError,
    IrregularSingularityError,
    NoConvergenceError,
    SingularJacobianError,
    OrientationFlipError,
    OrientationFlipWarning,
    NotQuasilinearError,
    NotDeterminedError,
    IndeterminateError,
    SelectorSplitsPairError,
    NearDegenerateError,
    SpectraOverlapError,
    ResonanceError,
    DefectiveEigenvalueWarning,
    DivergenceWarning,
    EmptyResultError,
)
from .expr import parse, parse_equation, unparse
from .fields import VectorField
from .integrate import (
    IntegratorConfig,
    StopReason,
    Trajectory,
    geometric_solution,
    integrate_generalized,
    project_to_manifold,
)
from .invman import (
    SpectralSplit,
    TaylorModel,
    embed_manifold,
    reduced_field,
    select_center,
    select_stable,
    select_unstable,
    select_values,
    separatrix_seeds,
    split_spectrum,
    tangency_filter,
    taylor_invariant_manifold,
)
from .jet import JetPoint, JetSpec
from .quasilinear import find_stationary, is_quasilinear, project_field, trace_stationary_curve
from .streamlines import PlacementParams, Portrait, place_2_5d, place_2d, place_3d
from .system import EquationSystem, load_equation_file
from .vessiot import (
    PointKind,
    classify_point,
    continued_direction,
    vessiot_direction,
    vessiot_field,
)

__version__ = "0.1.0"

__all__ = [
    "VessiotKitError",
    "InputError",
    "NumericError",
    "SingularityError",
    "ExprSyntaxError",
    "UndeclaredVariableError",
    "DomainError",
    "ParameterError",
    "RankIndeterminateError",
    "NoDirectionError",
    "IrregularSingularityError",
    "NoConvergenceError",
    "SingularJacobianError",
    "OrientationFlipError",
    "OrientationFlipWarning",
    "NotQuasilinearError",
    "NotDeterminedError",
    "IndeterminateError",
    "SelectorSplitsPairError",
    "NearDegenerateError",
    "SpectraOverlapError",
    "ResonanceError",
    "DefectiveEigenvalueWarning",
    "DivergenceWarning",
    "EmptyResultError",
    "parse",
    "parse_equation",
    "unparse",
    "VectorField",
    "IntegratorConfig",
    "StopReason",
    "Trajectory",
    "geometric_solution",
    "integrate_generalized",
    "project_to_manifold",
    "SpectralSplit",
    "TaylorModel",
    "embed_manifold",
    "reduced_field",
    "select_center",
    "select_stable",
    "select_unstable",
    "select_values",
    "separatrix_seeds",
    "split_spectrum",
    "tangency_filter",
    "taylor_invariant_manifold",
    "JetPoint",
    "JetSpec",
    "find_stationary",
    "is_quasilinear",
    "project_field",
    "trace_stationary_curve",
    "PlacementParams",
    "Portrait",
    "place_2_5d",
    "place_2d",
    "place_3d",
    "EquationSystem",
    "load_equation_file",
    "PointKind",
    "classify_point",
    "continued_direction",
    "vessiot_direction",
    "vessiot_field",
]
