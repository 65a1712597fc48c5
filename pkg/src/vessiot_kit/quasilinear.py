"""Quasi-linear systems: detection, projected field on the lower jet, impasse points.

A system affine in its top-order derivatives reads ``A(t, u_(q-1)) u_q = c``.
Multiplying the Vessiot field by ``det A`` removes the fibre of ``u_q`` and
leaves a field on the jet of order ``q - 1`` whose stationary points are the
impasse points.
"""
from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from .errors import (
    IndeterminateError,
    NoConvergenceError,
    NotDeterminedError,
    NotQuasilinearError,
    ParameterError,
    SingularJacobianError,
)
from .expr import ZERO, Const, Expression, Var, add, compile_functions, diff, jet_variable_names, mul, neg, substitute
from .fields import VectorField, symbolic_adjugate, symbolic_det
from .system import EquationSystem

__all__ = [
    "ProjectedField",
    "is_quasilinear",
    "project_field",
    "find_stationary",
    "stationary_nullspace",
    "scan_stationary",
    "trace_stationary_curve",
]

log = logging.getLogger(__name__)


class ProjectedField(VectorField):
    """Vector field on ``(t, u_(q-1))`` obtained from a quasi-linear system."""


def _is_zero(e: Expression) -> bool:
    return isinstance(e, Const) and e.value == 0.0


def is_quasilinear(eq: EquationSystem, samples: int = 16, seed: int = 0) -> bool:
    """True iff every equation is affine in the order-``q`` derivatives.

    Second partials in the top-order variables are tested for being
    identically zero after light simplification, then cross-checked at random
    points; disagreement raises ``IndeterminateError``.
    """
    spec = eq.spec
    top = [f"u{a}_{spec.q}" for a in range(1, spec.m + 1)]
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(samples, spec.n))
    affine = True
    for F in eq.equations:
        for i, va in enumerate(top):
            first = diff(F, va)
            for vb in top[i:]:
                second = diff(first, vb)
                symbolic = _is_zero(second)
                values = compile_functions([second], spec.names, backend="numpy")(pts)[:, 0]
                values = values[np.isfinite(values)]
                numeric_zero = values.size > 0 and bool(np.all(np.abs(values) <= 1e-9 * (1.0 + np.abs(values).max())))
                if symbolic:
                    continue
                if values.size == 0:
                    raise IndeterminateError(f"cannot sample d2F/d{va}d{vb} on random points")
                if numeric_zero:
                    raise IndeterminateError(
                        f"d2F/d{va}d{vb} does not simplify to zero but vanishes on all samples"
                    )
                affine = False
    return affine


def project_field(eq: EquationSystem) -> ProjectedField:
    """Field ``(det A, det A u_1, ..., adj(A) c)`` on the jet of order ``q - 1``."""
    if not is_quasilinear(eq):
        raise NotQuasilinearError("system is not affine in its top-order derivatives")
    if eq.k != eq.m:
        raise NotDeterminedError(f"projection needs k = m (got k={eq.k}, m={eq.m})")
    spec = eq.spec
    q = spec.q
    top = [f"u{a}_{q}" for a in range(1, spec.m + 1)]
    zero_top = {v: ZERO for v in top}
    A = [[diff(F, v) for v in top] for F in eq.equations]
    c = [neg(substitute(F, zero_top)) for F in eq.equations]
    det_a = symbolic_det(A)
    adj = symbolic_adjugate(A)
    names = jet_variable_names(spec.m, q - 1)
    comps: list[Expression] = [det_a]
    for alpha in range(1, spec.m + 1):
        for j in range(q - 1):
            comps.append(mul(det_a, Var(f"u{alpha}_{j + 1}")))
        top_comp: Expression = ZERO
        for i in range(eq.k):
            top_comp = add(top_comp, mul(adj[alpha - 1][i], c[i]))
        comps.append(top_comp)
    return ProjectedField(names, tuple(comps), name="projected")


def stationary_nullspace(field: VectorField, x, rtol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (columns) of the numerical kernel of the Jacobian at ``x``."""
    J = field.jacobian(x)
    _, s, vt = np.linalg.svd(J)
    rank = int(np.sum(s > rtol * max(s[0], 1e-300))) if s[0] > 0 else 0
    return vt[rank:].T


def find_stationary(
    field: VectorField,
    seed,
    tol: float = 1e-12,
    max_iter: int = 100,
    xtol: float = 1e-12,
) -> np.ndarray:
    """Damped Gauss-Newton search for ``field(x) = 0``.

    Iterates until ``|f| <= tol`` and the step has shrunk below ``xtol``, so
    that roots of higher multiplicity (where ``|f|`` drops faster than the
    distance) are still located accurately.  A stall at an approximate root
    with singular Jacobian raises ``SingularJacobianError`` carrying the
    kernel; any other failure raises ``NoConvergenceError``.
    """
    x = np.array(seed, dtype=float).reshape(-1)
    if x.shape[0] != field.dim:
        raise ParameterError(f"seed has {x.shape[0]} coordinates, field needs {field.dim}")
    f = field(x)
    norm = float(np.linalg.norm(f))
    for _ in range(max_iter):
        if norm == 0.0:
            return x
        J = field.jacobian(x)
        step = np.linalg.lstsq(J, -f, rcond=None)[0]
        lam = 1.0
        while lam > 1e-10:
            trial = x + lam * step
            ft = field(trial)
            nt = float(np.linalg.norm(ft))
            if np.isfinite(nt) and (nt <= (1.0 - 1e-4 * lam) * norm or (norm <= tol and nt <= tol)):
                # inside the tolerance the residual is rounding noise; keep
                # taking steps so the iterate itself converges
                break
            lam *= 0.5
        else:
            if norm <= tol:
                return x
            kernel = stationary_nullspace(field, x)
            if kernel.shape[1] and norm <= np.sqrt(tol):
                raise SingularJacobianError(
                    "Newton stalled at a degenerate stationary point",
                    iterate=x,
                    residual=norm,
                    nullspace=kernel,
                )
            raise NoConvergenceError("damped Newton made no progress", iterate=x, residual=norm)
        x, f, norm = trial, ft, nt
        if norm <= tol and lam * np.linalg.norm(step) <= xtol * (1.0 + np.linalg.norm(x)):
            return x
    if norm <= tol:
        return x
    raise NoConvergenceError(f"no stationary point within {max_iter} iterations", iterate=x, residual=norm)


def scan_stationary(field: VectorField, seeds: Sequence, tol: float = 1e-12, merge: float = 1e-8) -> np.ndarray:
    """Run ``find_stationary`` from each seed, keeping distinct converged points."""
    found: list[np.ndarray] = []
    for s in seeds:
        try:
            x = find_stationary(field, s, tol=tol)
        except NoConvergenceError:
            continue
        if not any(np.linalg.norm(x - y) <= merge for y in found):
            found.append(x)
    return np.array(found).reshape(-1, field.dim)


def trace_stationary_curve(
    field: VectorField,
    start,
    direction=None,
    step: float = 1e-2,
    n_steps: int = 100,
    tol: float = 1e-12,
    bounds=None,
) -> np.ndarray:
    """Pseudo-arclength continuation along a curve of stationary points.

    The tangent is taken from the Jacobian kernel closest to the previous
    tangent (``direction`` seeds the first one).  Each corrector solves the
    field equations together with the hyperplane orthogonal to the tangent.
    """
    x = find_stationary(field, start, tol=tol)
    kernel = stationary_nullspace(field, x)
    if kernel.shape[1] == 0:
        raise NoConvergenceError("start point is an isolated stationary point", iterate=x)
    if direction is None:
        v = kernel[:, -1]
    else:
        d = np.asarray(direction, dtype=float)
        v = kernel @ (kernel.T @ d)
        if np.linalg.norm(v) == 0:
            raise ParameterError("direction is orthogonal to the stationary kernel")
    v = v / np.linalg.norm(v)
    box = None if bounds is None else np.asarray(bounds, dtype=float)
    points = [x]
    for _ in range(n_steps):
        pred = x + step * v
        y = pred.copy()
        for _ in range(100):
            r = np.concatenate([field(y), [v @ (y - pred)]])
            J = np.vstack([field.jacobian(y), v])
            dy = np.linalg.lstsq(J, -r, rcond=None)[0]
            y = y + dy
            if np.linalg.norm(dy) <= 1e-13 * (1.0 + np.linalg.norm(y)):
                break
        if np.linalg.norm(field(y)) > np.sqrt(tol):
            log.info("stationary curve continuation stopped: corrector failed")
            break
        kernel = stationary_nullspace(field, y)
        if kernel.shape[1] == 0:
            break
        chord = y - x
        w = kernel @ (kernel.T @ chord)
        if np.linalg.norm(w) == 0:
            break
        v = w / np.linalg.norm(w)
        x = y
        points.append(x)
        if box is not None and np.any((x < box[:, 0]) | (x > box[:, 1])):
            break
    return np.array(points)
