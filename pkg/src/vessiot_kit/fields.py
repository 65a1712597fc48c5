"""Autonomous polynomial or elementary vector fields given by expressions."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .errors import ParameterError
from .expr import ONE, ZERO, Expression, add, as_expression, compile_functions, diff, mul, neg, parse, unparse

__all__ = ["VectorField", "symbolic_det", "symbolic_adjugate"]


@dataclass(frozen=True, eq=False)
class VectorField:
    """``x' = f(x)`` with components as expression trees over ``variables``."""

    variables: tuple[str, ...]
    components: tuple[Expression, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.variables) != len(self.components):
            raise ParameterError(
                f"{len(self.components)} components for {len(self.variables)} variables"
            )
        if len(set(self.variables)) != len(self.variables):
            raise ParameterError("duplicate variable names")
        known = set(self.variables)
        for c in self.components:
            extra = c.variables - known
            if extra:
                raise ParameterError(f"component uses unknown variable {sorted(extra)[0]!r}")

    @classmethod
    def from_strings(
        cls,
        variables: Sequence[str],
        components: Sequence[str],
        parameters: Mapping[str, float] | None = None,
        name: str = "",
    ) -> "VectorField":
        exprs = tuple(parse(text, variables, parameters) for text in components)
        return cls(tuple(variables), exprs, name)

    @property
    def dim(self) -> int:
        return len(self.variables)

    @cached_property
    def _fn(self):
        return compile_functions(self.components, self.variables)

    @cached_property
    def _fn_np(self):
        return compile_functions(self.components, self.variables, backend="numpy")

    @cached_property
    def jacobian_exprs(self) -> tuple[tuple[Expression, ...], ...]:
        return tuple(tuple(diff(c, v) for v in self.variables) for c in self.components)

    @cached_property
    def _jac_fn(self):
        return compile_functions([d for row in self.jacobian_exprs for d in row], self.variables)

    def __call__(self, x) -> np.ndarray:
        return self._fn(np.asarray(x, dtype=float))

    def evaluate_many(self, points) -> np.ndarray:
        return self._fn_np(points)

    def jacobian(self, x) -> np.ndarray:
        return self._jac_fn(np.asarray(x, dtype=float)).reshape(self.dim, self.dim)

    def scaled(self, factor: float) -> "VectorField":
        return VectorField(self.variables, tuple(mul(as_expression(factor), c) for c in self.components), self.name)

    def to_dict(self) -> dict:
        return {"variables": list(self.variables), "components": [unparse(c) for c in self.components]}

    @classmethod
    def from_dict(cls, doc: Mapping, parameters: Mapping[str, float] | None = None) -> "VectorField":
        try:
            return cls.from_strings(doc["variables"], doc["components"], parameters, doc.get("name", ""))
        except (KeyError, TypeError) as exc:
            raise ParameterError(f"field needs 'variables' and 'components': {exc}") from None


def _minor(matrix: Sequence[Sequence[Expression]], row: int, col: int) -> list[list[Expression]]:
    return [[e for j, e in enumerate(r) if j != col] for i, r in enumerate(matrix) if i != row]


def symbolic_det(matrix: Sequence[Sequence[Expression]]) -> Expression:
    """Cofactor expansion along the first row (fine for the small ``m`` used here)."""
    size = len(matrix)
    if size == 0:
        return ONE
    if size == 1:
        return matrix[0][0]
    total: Expression = ZERO
    for j, entry in enumerate(matrix[0]):
        term = mul(entry, symbolic_det(_minor(matrix, 0, j)))
        total = add(total, term if j % 2 == 0 else neg(term))
    return total


def symbolic_adjugate(matrix: Sequence[Sequence[Expression]]) -> list[list[Expression]]:
    """Transpose of the cofactor matrix, so that ``adj(M) M = det(M) I``."""
    size = len(matrix)
    if size == 1:
        return [[ONE]]
    adj = [[ZERO] * size for _ in range(size)]
    for i in range(size):
        for j in range(size):
            cof = symbolic_det(_minor(matrix, i, j))
            adj[j][i] = cof if (i + j) % 2 == 0 else neg(cof)
    return adj
