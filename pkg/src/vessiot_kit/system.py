"""Implicit systems ``F(t, u_(q)) = 0`` and their equation files."""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ParameterError
from .expr import Expression, compile_functions, diff, parse_equation
from .jet import JetSpec

__all__ = ["EquationSystem", "load_equation_file"]

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EquationSystem:
    """Left-hand sides of ``F = 0`` with their jet signature.

    ``k >= m`` (not underdetermined) is assumed, not verified; an
    underdetermined input only triggers a warning.
    """

    spec: JetSpec
    equations: tuple[Expression, ...]
    labels: tuple[str, ...] = ()
    parameters: Mapping[str, float] = field(default_factory=dict)
    sources: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "equations", tuple(self.equations))
        if not self.equations:
            raise ParameterError("at least one equation is required")
        if self.spec.q < 1:
            raise ParameterError("order q must be at least 1")
        top = {f"u{a}_{self.spec.q}" for a in range(1, self.spec.m + 1)}
        if not any(e.variables & top for e in self.equations):
            raise ParameterError(f"no equation involves a derivative of order q={self.spec.q}")
        if self.k < self.m:
            warnings.warn(f"underdetermined system (k={self.k} < m={self.m})", stacklevel=3)

    @classmethod
    def from_strings(
        cls,
        equations: Sequence[str],
        m: int,
        q: int,
        parameters: Mapping[str, float] | None = None,
        labels: Sequence[str] = (),
    ) -> "EquationSystem":
        params = dict(parameters or {})
        exprs = tuple(parse_equation(text, (m, q), params) for text in equations)
        return cls(JetSpec(m, q), exprs, tuple(labels), params, tuple(equations))

    @property
    def m(self) -> int:
        return self.spec.m

    @property
    def q(self) -> int:
        return self.spec.q

    @property
    def k(self) -> int:
        return len(self.equations)

    @property
    def n(self) -> int:
        return self.spec.n

    @cached_property
    def gradient_exprs(self) -> tuple[tuple[Expression, ...], ...]:
        return tuple(tuple(diff(F, v) for v in self.spec.names) for F in self.equations)

    @cached_property
    def _residual_fn(self):
        return compile_functions(self.equations, self.spec.names)

    @cached_property
    def _jacobian_fn(self):
        flat = [g for row in self.gradient_exprs for g in row]
        return compile_functions(flat, self.spec.names)

    @cached_property
    def _residual_np(self):
        return compile_functions(self.equations, self.spec.names, backend="numpy")

    @cached_property
    def _jacobian_np(self):
        flat = [g for row in self.gradient_exprs for g in row]
        return compile_functions(flat, self.spec.names, backend="numpy")

    def residual(self, rho) -> np.ndarray:
        return self._residual_fn(np.asarray(rho, dtype=float))

    def jacobian(self, rho) -> np.ndarray:
        """``dF`` at ``rho`` as a ``k x n`` matrix."""
        return self._jacobian_fn(np.asarray(rho, dtype=float)).reshape(self.k, self.n)

    def residual_many(self, points) -> np.ndarray:
        return self._residual_np(points)

    def jacobian_many(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return self._jacobian_np(pts).reshape(pts.shape[:-1] + (self.k, self.n))

    def top_order(self, i: int) -> int:
        """Highest derivative order appearing in equation ``i`` (-1: none)."""
        best = -1
        for name in self.equations[i].variables:
            if name != "t":
                best = max(best, int(name.split("_")[1]))
        return best


def load_equation_file(path: str | Path | Mapping) -> EquationSystem:
    """Read a JSON equation document ``{m, q, equations, parameters?, labels?}``."""
    if isinstance(path, Mapping):
        doc = path
    else:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    if isinstance(doc.get("equations"), str):
        raise ParameterError("'equations' must be a list of strings")
    try:
        m = int(doc["m"])
        q = int(doc["q"])
        equations = list(doc["equations"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParameterError(f"equation file needs integer 'm', 'q' and a list 'equations': {exc}") from None
    return EquationSystem.from_strings(
        equations, m, q, parameters=doc.get("parameters"), labels=doc.get("labels", ())
    )
