"""Pointwise Vessiot spaces: assembly, rank classification and direction tracking.

At a point ``rho`` of the equation manifold a contact vector
``a * C_trans + sum_alpha b_alpha * C_alpha`` is tangent iff ``A a + B b = 0``
with ``A = C_trans(F)`` and ``B = dF/du_q``.  Everything here works on that
``k x (m+1)`` matrix ``[A | B]``.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    IrregularSingularityError,
    NoConvergenceError,
    NoDirectionError,
    OrientationFlipError,
    OrientationFlipWarning,
    ParameterError,
    RankIndeterminateError,
)
from .expr import ZERO, Expression, add, as_expression, diff, mul, neg, Var
from .fields import VectorField, symbolic_adjugate, symbolic_det
from .jet import JetSpec, contact_trans_vector
from .system import EquationSystem

__all__ = [
    "PointKind",
    "PointClass",
    "VessiotSystem",
    "TangentDirection",
    "assemble_system",
    "classify_point",
    "vessiot_direction",
    "continued_direction",
    "contact_coefficient_exprs",
    "vessiot_field",
]

DEFAULT_RANK_TOL = 1e-8
BAND = 10.0


class PointKind(str, enum.Enum):
    REGULAR = "Regular"
    REGULAR_SINGULAR = "RegularSingular"
    IRREGULAR_SINGULAR = "IrregularSingular"


@dataclass(frozen=True)
class PointClass:
    """Classification result together with the ranks it was derived from."""

    kind: PointKind
    rank_full: int
    rank_B: int
    columns: int
    threshold: float
    singular_values: tuple[float, ...] = ()

    @property
    def nullity(self) -> int:
        return self.columns - self.rank_full

    @staticmethod
    def decide(rank_full: int, rank_B: int, columns: int) -> PointKind:
        if columns - rank_full > 1:
            return PointKind.IRREGULAR_SINGULAR
        if rank_B < rank_full:
            return PointKind.REGULAR_SINGULAR
        return PointKind.REGULAR

    def __post_init__(self):
        if self.decide(self.rank_full, self.rank_B, self.columns) is not self.kind:
            raise ValueError("point class inconsistent with its ranks")


@dataclass(frozen=True, eq=False)
class VessiotSystem:
    A: np.ndarray
    B: np.ndarray
    point: np.ndarray
    jacobian_norm: float

    @property
    def matrix(self) -> np.ndarray:
        return np.column_stack([self.A, self.B])

    @property
    def k(self) -> int:
        return self.B.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True, eq=False)
class TangentDirection:
    """Contact coefficients ``(a, b)`` and their image in ambient coordinates."""

    a: float
    b: np.ndarray
    ambient: np.ndarray
    unit_norm: bool = True

    @property
    def coeffs(self) -> np.ndarray:
        return np.concatenate([[self.a], self.b])

    @classmethod
    def from_coeffs(cls, spec: JetSpec, rho, z, unit_norm: bool = True) -> "TangentDirection":
        z = np.asarray(z, dtype=float)
        c = np.asarray(rho, dtype=float).reshape(-1)
        ambient = np.zeros(spec.n)
        ambient[0] = z[0]
        lo = spec.lower_indices
        ambient[lo] = z[0] * c[lo + 1]
        ambient[spec.top_indices] = z[1:]
        return cls(float(z[0]), z[1:].copy(), ambient, unit_norm)

    def reversed(self) -> "TangentDirection":
        return TangentDirection(-self.a, -self.b, -self.ambient, self.unit_norm)

    def __neg__(self):
        return self.reversed()


def _as_coords(eq: EquationSystem, rho) -> np.ndarray:
    c = np.asarray(rho, dtype=float).reshape(-1)
    if c.shape[0] != eq.n:
        raise ParameterError(f"expected {eq.n} jet coordinates, got {c.shape[0]}")
    return c


def assemble_system(eq: EquationSystem, rho) -> VessiotSystem:
    """``A = C_trans(F)(rho)`` and ``B = dF/du_q(rho)`` from the Jacobian of ``F``."""
    c = _as_coords(eq, rho)
    J = eq.jacobian(c)
    A = J @ contact_trans_vector(eq.spec, c)
    B = J[:, eq.spec.top_indices]
    return VessiotSystem(A, B, c, float(np.linalg.norm(J, 2)))


def _threshold(sigma_max: float, system: VessiotSystem, tol: float) -> float:
    # Scale by |dF| as well: with k = 1 a purely relative threshold could never
    # see the rank of [A|B] drop to zero.
    return tol * max(sigma_max, system.jacobian_norm)


def _rank(s: np.ndarray, thr: float, check_band: bool) -> int:
    if check_band:
        ambiguous = (s > thr / BAND) & (s < thr * BAND)
        if np.any(ambiguous):
            raise RankIndeterminateError(
                f"singular value {s[ambiguous][0]:.3e} within a factor {BAND:g} of threshold {thr:.3e}",
                singular_values=s,
                threshold=thr,
            )
    return int(np.sum(s > thr))


def classify_point(eq: EquationSystem, rho, tol: float = DEFAULT_RANK_TOL) -> PointClass:
    """Regular / RegularSingular / IrregularSingular from the ranks of ``[A|B]`` and ``B``."""
    system = assemble_system(eq, rho)
    M = system.matrix
    s_full = np.linalg.svd(M, compute_uv=False)
    s_B = np.linalg.svd(system.B, compute_uv=False)
    thr = _threshold(s_full[0] if s_full.size else 0.0, system, tol)
    rank_full = _rank(s_full, thr, True)
    rank_B = _rank(s_B, thr, True)
    columns = M.shape[1]
    kind = PointClass.decide(rank_full, rank_B, columns)
    return PointClass(kind, rank_full, rank_B, columns, thr, tuple(s_full.tolist()))


def _sign_fix(z: np.ndarray, tol: float) -> np.ndarray:
    big = np.flatnonzero(np.abs(z) > tol)
    if big.size and z[big[0]] < 0:
        return -z
    return z


def vessiot_direction(eq: EquationSystem, rho, tol: float = DEFAULT_RANK_TOL) -> TangentDirection:
    """Unit nullspace vector of ``[A|B]``; first nonzero component made positive."""
    system = assemble_system(eq, rho)
    M = system.matrix
    _, s, vt = np.linalg.svd(M, full_matrices=True)
    thr = _threshold(s[0] if s.size else 0.0, system, tol)
    rank = _rank(s, thr, True)
    columns = M.shape[1]
    nullity = columns - rank
    if nullity > 1:
        raise IrregularSingularityError(
            f"Vessiot space has dimension {nullity} at {system.point.tolist()}",
            point=system.point,
            nullity=nullity,
        )
    if nullity == 0:
        raise NoDirectionError(f"[A|B] has trivial nullspace (smallest singular value {s[-1]:.3e})")
    z = _sign_fix(vt[-1], tol)
    return TangentDirection.from_coeffs(eq.spec, system.point, z / np.linalg.norm(z))


def continued_direction(
    eq: EquationSystem,
    rho,
    prev: TangentDirection,
    tol: float = 1e-12,
    max_iter: int = 25,
    on_flip: str = "warn",
    rank_tol: float = DEFAULT_RANK_TOL,
) -> TangentDirection:
    """Newton solve of ``A a + B b = 0, |(a, b)| = 1`` warm-started at ``prev``.

    A converged solution pointing against ``prev`` is flipped with an
    ``OrientationFlipWarning`` (``on_flip="warn"``) or rejected with
    ``OrientationFlipError`` (``on_flip="raise"``).
    """
    if on_flip not in ("warn", "raise"):
        raise ParameterError("on_flip must be 'warn' or 'raise'")
    system = assemble_system(eq, rho)
    M = system.matrix
    columns = M.shape[1]
    s = np.linalg.svd(M, compute_uv=False)
    thr = _threshold(s[0] if s.size else 0.0, system, rank_tol)
    if s.size < columns - 1 or s[columns - 2] <= thr:
        raise IrregularSingularityError(
            f"Vessiot space is not one-dimensional at {system.point.tolist()}",
            point=system.point,
            nullity=columns - int(np.sum(s > thr)),
        )
    Ms = M / s[0]
    prev_z = prev.coeffs
    z = prev_z / np.linalg.norm(prev_z)
    square = Ms.shape[0] + 1 == columns
    for _ in range(max_iter):
        r = np.concatenate([Ms @ z, [(z @ z - 1.0) / 2.0]])
        if np.linalg.norm(r) <= tol:
            break
        jac = np.vstack([Ms, z])
        try:
            dz = np.linalg.solve(jac, -r) if square else np.linalg.lstsq(jac, -r, rcond=None)[0]
        except np.linalg.LinAlgError:
            dz = np.linalg.lstsq(jac, -r, rcond=None)[0]
        z = z + dz
    else:
        r = np.concatenate([Ms @ z, [(z @ z - 1.0) / 2.0]])
        if np.linalg.norm(r) > tol:
            raise NoConvergenceError(
                f"direction Newton did not converge in {max_iter} iterations",
                iterate=z,
                residual=float(np.linalg.norm(r)),
            )
    if np.linalg.norm(Ms @ z) > max(tol, 1e3 * np.finfo(float).eps):
        # Least-squares fixpoint of an inconsistent overdetermined system.
        raise NoDirectionError("no consistent direction near the previous one")
    if z @ prev_z < 0:
        if on_flip == "raise":
            raise OrientationFlipError("continued direction reverses orientation; reduce the step size")
        warnings.warn("continued direction flipped to keep orientation", OrientationFlipWarning, stacklevel=2)
        z = -z
    return TangentDirection.from_coeffs(eq.spec, system.point, z)


def contact_coefficient_exprs(eq: EquationSystem) -> tuple[list[Expression], list[list[Expression]]]:
    """Symbolic ``A_i = C_trans(F_i)`` and ``B_{i alpha} = dF_i/du^alpha_q``."""
    spec = eq.spec
    A = []
    for F in eq.equations:
        total = diff(F, "t")
        for a in range(1, spec.m + 1):
            for j in range(spec.q):
                total = add(total, mul(Var(f"u{a}_{j + 1}"), diff(F, f"u{a}_{j}")))
        A.append(total)
    B = [[diff(F, f"u{a}_{spec.q}") for a in range(1, spec.m + 1)] for F in eq.equations]
    return A, B


def vessiot_field(eq: EquationSystem, scale: float = 1.0) -> VectorField:
    """Polynomial-in-``F`` generator of the Vessiot distribution for square systems.

    With ``a = det B`` and ``b = -adj(B) A`` the vector ``a C_trans + b C``
    solves the Vessiot system identically; the field vanishes exactly where
    the distribution is not one-dimensional or vertical with ``det B = 0`` and
    ``adj(B) A = 0``.
    """
    if eq.k != eq.m:
        raise ParameterError(f"symbolic field needs k = m (got k={eq.k}, m={eq.m})")
    spec = eq.spec
    A, B = contact_coefficient_exprs(eq)
    det_b = symbolic_det(B)
    adj = symbolic_adjugate(B)
    factor = as_expression(scale)
    a = mul(factor, det_b)
    comps: list[Expression] = [ZERO] * spec.n
    comps[0] = a
    for alpha in range(1, spec.m + 1):
        for j in range(spec.q):
            comps[spec.index(alpha, j)] = mul(a, Var(f"u{alpha}_{j + 1}"))
        row = adj[alpha - 1]
        b: Expression = ZERO
        for i in range(eq.k):
            b = add(b, mul(row[i], A[i]))
        comps[spec.index(alpha, spec.q)] = mul(factor, neg(b))
    return VectorField(spec.names, tuple(comps), name="vessiot")
