"""Truncated multivariate polynomials on a graded monomial basis.

Coefficients live in arrays whose last axis runs over all monomials of total
degree ``0..N`` in ``p`` variables, ordered by degree and then reverse
lexicographically.  Product and derivative tables are built on demand and
cached per ``(p, N)``.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

__all__ = ["MonomialBasis", "monomial_basis"]


class MonomialBasis:
    def __init__(self, nvars: int, degree: int):
        self.nvars = nvars
        self.degree = degree
        exps: list[tuple[int, ...]] = []
        for d in range(degree + 1):
            block = []
            for combo in combinations_with_replacement(range(nvars), d):
                e = [0] * nvars
                for i in combo:
                    e[i] += 1
                block.append(tuple(e))
            exps.extend(sorted(block, reverse=True))
        self.exponents = np.array(exps, dtype=int).reshape(-1, nvars)
        self.index = {e: i for i, e in enumerate(exps)}
        self.degrees = self.exponents.sum(axis=1) if nvars else np.zeros(len(exps), dtype=int)
        self.size = len(exps)

    def of_degree(self, d: int) -> np.ndarray:
        return np.flatnonzero(self.degrees == d)

    def up_to(self, d: int) -> np.ndarray:
        return np.flatnonzero(self.degrees <= d)

    def _table(self):
        i_idx, j_idx, k_idx = [], [], []
        for i, a in enumerate(self.exponents):
            da = self.degrees[i]
            for j, b in enumerate(self.exponents):
                if da + self.degrees[j] > self.degree:
                    continue
                i_idx.append(i)
                j_idx.append(j)
                k_idx.append(self.index[tuple((a + b).tolist())])
        return np.array(i_idx, dtype=int), np.array(j_idx, dtype=int), np.array(k_idx, dtype=int)

    @property
    def product_table(self):
        if not hasattr(self, "_product"):
            self._product = self._table()
        return self._product

    def mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Truncated product of scalar polynomials or broadcastable stacks."""
        i, j, k = self.product_table
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.ndim == 1 and b.ndim == 1:
            return np.bincount(k, weights=a[i] * b[j], minlength=self.size)
        a, b = np.broadcast_arrays(a, b)
        flat_a = a.reshape(-1, self.size)
        flat_b = b.reshape(-1, self.size)
        out = np.stack([np.bincount(k, weights=x[i] * y[j], minlength=self.size) for x, y in zip(flat_a, flat_b)])
        return out.reshape(a.shape)

    def derivative(self, a: np.ndarray, var: int) -> np.ndarray:
        """``d/dy_var`` of coefficient arrays (last axis is the basis)."""
        a = np.asarray(a, dtype=float)
        out = np.zeros_like(a)
        for idx, e in enumerate(self.exponents):
            if e[var] == 0:
                continue
            lower = list(e)
            lower[var] -= 1
            out[..., self.index[tuple(lower)]] += e[var] * a[..., idx]
        return out

    def variable(self, var: int) -> np.ndarray:
        c = np.zeros(self.size)
        if self.degree >= 1:
            e = [0] * self.nvars
            e[var] = 1
            c[self.index[tuple(e)]] = 1.0
        return c

    def constant(self, value: float = 1.0) -> np.ndarray:
        c = np.zeros(self.size)
        c[0] = value
        return c

    def evaluate(self, coeffs: np.ndarray, y) -> np.ndarray:
        """Evaluate at points ``y`` of shape ``(..., nvars)``."""
        y = np.asarray(y, dtype=float)
        mono = np.prod(y[..., None, :] ** self.exponents, axis=-1)
        return np.tensordot(mono, np.asarray(coeffs, dtype=float), axes=([-1], [-1]))


@lru_cache(maxsize=None)
def monomial_basis(nvars: int, degree: int) -> MonomialBasis:
    return MonomialBasis(nvars, degree)
