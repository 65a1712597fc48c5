"""Jet coordinates and the contact structure.

Points of the q-th jet bundle over ``R x R^m`` are stored flat in the ambient
order ``(t, u1_0, ..., u1_q, u2_0, ..., um_q)``, so Jacobians and projections
reduce to index arithmetic.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import ParameterError
from .expr import Expression, diff, evaluate, jet_variable_names

__all__ = [
    "JetSpec",
    "JetPoint",
    "apply_contact_trans",
    "apply_contact_vertical",
    "contact_trans_vector",
    "prolong_section",
    "project_jet",
]


@dataclass(frozen=True)
class JetSpec:
    """Signature of a jet bundle: ``m`` unknowns, derivatives up to order ``q``."""

    m: int
    q: int

    def __post_init__(self):
        if self.m < 1 or self.q < 0:
            raise ParameterError(f"invalid jet signature m={self.m}, q={self.q}")

    @property
    def n(self) -> int:
        return (self.q + 1) * self.m + 1

    @cached_property
    def names(self) -> tuple[str, ...]:
        return jet_variable_names(self.m, self.q)

    def index(self, alpha: int, k: int) -> int:
        """Flat index of ``u^alpha_k`` (alpha is 1-based)."""
        if not (1 <= alpha <= self.m and 0 <= k <= self.q):
            raise IndexError(f"u{alpha}_{k} outside signature (m={self.m}, q={self.q})")
        return 1 + (alpha - 1) * (self.q + 1) + k

    @cached_property
    def top_indices(self) -> np.ndarray:
        return np.array([self.index(a, self.q) for a in range(1, self.m + 1)])

    @cached_property
    def lower_indices(self) -> np.ndarray:
        """Indices of ``u^alpha_j`` with ``j < q`` (shifted by one give ``u^alpha_{j+1}``)."""
        return np.array([self.index(a, j) for a in range(1, self.m + 1) for j in range(self.q)], dtype=int)

    def truncate(self, r: int) -> "JetSpec":
        return JetSpec(self.m, r)


@dataclass(frozen=True, eq=False)
class JetPoint:
    spec: JetSpec
    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float).reshape(-1)
        if c.shape != (self.spec.n,):
            raise ParameterError(f"expected {self.spec.n} jet coordinates, got {c.shape[0]}")
        if not np.all(np.isfinite(c)):
            raise ParameterError("jet coordinates must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @classmethod
    def from_values(cls, spec: JetSpec, t: float, derivatives) -> "JetPoint":
        """Build from ``t`` and an ``(m, q+1)`` array of derivatives."""
        d = np.asarray(derivatives, dtype=float).reshape(spec.m, spec.q + 1)
        return cls(spec, np.concatenate([[t], d.reshape(-1)]))

    @property
    def t(self) -> float:
        return float(self.coords[0])

    def u(self, alpha: int, k: int = 0) -> float:
        return float(self.coords[self.spec.index(alpha, k)])

    @property
    def derivatives(self) -> np.ndarray:
        return self.coords[1:].reshape(self.spec.m, self.spec.q + 1)

    def as_env(self) -> dict[str, float]:
        return dict(zip(self.spec.names, self.coords.tolist()))

    def to_list(self) -> list[float]:
        return self.coords.tolist()

    def __array__(self, dtype=None, copy=None):
        return np.array(self.coords, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, JetPoint):
            return NotImplemented
        return self.spec == other.spec and np.array_equal(self.coords, other.coords)

    def __repr__(self):
        return f"JetPoint({self.spec.m}, {self.spec.q}, {self.coords.tolist()})"


def _coords(rho, spec: JetSpec) -> np.ndarray:
    c = np.asarray(rho, dtype=float).reshape(-1)
    if c.shape[0] != spec.n:
        raise ParameterError(f"expected {spec.n} jet coordinates, got {c.shape[0]}")
    return c


def contact_trans_vector(spec: JetSpec, rho) -> np.ndarray:
    """Ambient components of the transversal contact field at ``rho``."""
    c = _coords(rho, spec)
    v = np.zeros(spec.n)
    v[0] = 1.0
    lo = spec.lower_indices
    v[lo] = c[lo + 1]
    return v


def apply_contact_trans(F: Expression, rho: JetPoint) -> float:
    """``dF/dt + sum_{alpha, j<q} u^alpha_{j+1} dF/du^alpha_j`` at ``rho``."""
    spec = rho.spec
    env = rho.as_env()
    total = evaluate(diff(F, "t"), env)
    for a in range(1, spec.m + 1):
        for j in range(spec.q):
            name = f"u{a}_{j}"
            if name in F.variables:
                total += env[f"u{a}_{j + 1}"] * evaluate(diff(F, name), env)
    return total


def apply_contact_vertical(F: Expression, rho: JetPoint, alpha: int) -> float:
    """``dF/du^alpha_q`` at ``rho``."""
    spec = rho.spec
    if not 1 <= alpha <= spec.m:
        raise ParameterError(f"alpha={alpha} outside 1..{spec.m}")
    return evaluate(diff(F, f"u{alpha}_{spec.q}"), rho.as_env())


def prolong_section(s: Sequence[Sequence[float]], t: float, q: int) -> JetPoint:
    """Prolongation ``j_q s`` at ``t`` of polynomial components.

    ``s[alpha]`` holds ascending power coefficients of the alpha-th component.
    """
    spec = JetSpec(len(s), q)
    derivs = np.zeros((spec.m, q + 1))
    for a, coeffs in enumerate(s):
        c = np.asarray(coeffs, dtype=float)
        for k in range(q + 1):
            derivs[a, k] = P.polyval(t, c) if c.size else 0.0
            c = P.polyder(c) if c.size > 1 else np.zeros(0)
    return JetPoint.from_values(spec, t, derivs)


def project_jet(rho: JetPoint, r: int) -> JetPoint:
    """Forget derivatives above order ``r``."""
    spec = rho.spec
    if not 0 <= r <= spec.q:
        raise ParameterError(f"target order {r} outside 0..{spec.q}")
    if r == spec.q:
        return rho
    return JetPoint.from_values(spec.truncate(r), rho.t, rho.derivatives[:, : r + 1])
