"""Invariant manifolds at stationary points.

Spectral splitting uses an ordered real Schur form, block-diagonalised by one
Sylvester solve.  The manifold is the graph ``z = h(y)`` over the selected
eigenspace; ``h`` and the reduced field ``g`` are computed degree by degree
from the homological equation ``Dh(y) g(y) = f_tilde(y, h(y))``, each degree
being a Sylvester equation for the coefficient matrix of ``h_d``.

Centre manifolds need not be unique or analytic; the Taylor model is the
polynomial shared by all of them, and fast coefficient growth is reported
with a ``DivergenceWarning``.
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    DefectiveEigenvalueWarning,
    DivergenceWarning,
    NearDegenerateError,
    ParameterError,
    ResonanceError,
    SelectorSplitsPairError,
    SpectraOverlapError,
)
from .expr import ZERO, Const, Expression, Var, add, diff, evaluate, mul, power
from .fields import VectorField
from .polynomial import monomial_basis
from .system import EquationSystem

__all__ = [
    "EigenInfo",
    "SpectralSplit",
    "TaylorModel",
    "jacobian",
    "tangency_filter",
    "select_stable",
    "select_unstable",
    "select_center",
    "select_values",
    "split_spectrum",
    "solve_sylvester",
    "taylor_invariant_manifold",
    "invariance_residual",
    "reduced_field",
    "embed_manifold",
    "separatrix_seeds",
]

log = logging.getLogger(__name__)

MAX_DEGREE = 10


def jacobian(field: VectorField, xi) -> np.ndarray:
    """Symbolic Jacobian of ``field`` evaluated at ``xi``."""
    return field.jacobian(np.asarray(xi, dtype=float))


@dataclass(frozen=True, eq=False)
class EigenInfo:
    value: complex
    vector: np.ndarray
    tangent: bool
    algebraic: int = 1
    geometric: int = 1


def _clusters(values: np.ndarray, tol: float) -> list[list[int]]:
    groups: list[list[int]] = []
    for i, v in enumerate(values):
        for g in groups:
            if abs(values[g[0]] - v) <= tol:
                g.append(i)
                break
        else:
            groups.append([i])
    return groups


def tangency_filter(J, eq: EquationSystem | None, xi, tol: float = 1e-8) -> list[EigenInfo]:
    """Eigenpairs of ``J`` marked by tangency of their eigenspaces to ``F = 0``.

    A generalised eigenspace counts as tangent when ``dF(xi)`` annihilates all
    of it to ``tol * |dF|``.  Without ``eq`` every direction is tangent.
    """
    J = np.asarray(J, dtype=float)
    n = J.shape[0]
    values, vectors = scipy.linalg.eig(J)
    scale = max(1.0, float(np.linalg.norm(J, 2)))
    dF = None if eq is None else eq.jacobian(xi)
    dF_norm = 0.0 if dF is None else float(np.linalg.norm(dF, 2))
    # defective eigenvalues split by about eps^(1/mult); cluster generously
    groups = _clusters(values, 1e-6 * scale)
    out: list[EigenInfo] = [None] * n  # type: ignore[list-item]
    for g in groups:
        lam = complex(np.mean(values[g]))
        alg = len(g)
        shifted = J - lam * np.eye(n)
        s = np.linalg.svd(shifted, compute_uv=False)
        geo = int(np.sum(s <= 1e-8 * scale))
        geo = max(1, min(geo, alg))
        if geo < alg:
            warnings.warn(
                f"eigenvalue {lam:.6g} is defective (algebraic {alg}, geometric {geo})",
                DefectiveEigenvalueWarning,
                stacklevel=2,
            )
            _, s_pow, vh = np.linalg.svd(np.linalg.matrix_power(shifted, alg))
            space = vh[n - alg :].conj().T
        else:
            space = vectors[:, g]
        if dF is None:
            tangent = True
        else:
            leak = np.linalg.norm(dF @ space, axis=0)
            tangent = bool(np.all(leak <= tol * max(dF_norm, 1e-300) * np.linalg.norm(space, axis=0)))
        for i in g:
            out[i] = EigenInfo(complex(values[i]), vectors[:, i], tangent, alg, geo)
    return out


def select_stable(tol: float = 1e-10) -> Callable[[complex], bool]:
    return lambda lam: lam.real < -tol


def select_unstable(tol: float = 1e-10) -> Callable[[complex], bool]:
    return lambda lam: lam.real > tol


def select_center(tol: float = 1e-8) -> Callable[[complex], bool]:
    return lambda lam: abs(lam.real) <= tol


def select_values(targets: Sequence[complex], tol: float = 1e-8) -> Callable[[complex], bool]:
    """Select eigenvalues within ``tol`` of any target."""
    targets = [complex(t) for t in targets]
    return lambda lam: any(abs(lam - t) <= tol for t in targets)


@dataclass(frozen=True, eq=False)
class SpectralSplit:
    J: np.ndarray
    eigenvalues: np.ndarray
    complement_eigenvalues: np.ndarray
    E: np.ndarray
    E_tilde: np.ndarray
    L: np.ndarray
    L_tilde: np.ndarray
    condition: float

    @property
    def p(self) -> int:
        return self.E.shape[1]

    @property
    def basis(self) -> np.ndarray:
        return np.hstack([self.E, self.E_tilde])

    @property
    def basis_inverse(self) -> np.ndarray:
        return np.linalg.inv(self.basis)


def _normalise_columns(M: np.ndarray) -> np.ndarray:
    M = np.array(M, dtype=float)
    for j in range(M.shape[1]):
        col = M[:, j]
        col = col / np.linalg.norm(col)
        if col[np.argmax(np.abs(col))] < 0:
            col = -col
        M[:, j] = col
    return M


def split_spectrum(J, selector: Callable[[complex], bool], tol: float = 1e-8) -> SpectralSplit:
    """Real bases of the generalised eigenspaces for ``selector`` and its complement."""
    J = np.asarray(J, dtype=float)
    n = J.shape[0]
    if J.shape != (n, n):
        raise ParameterError("J must be square")
    values = scipy.linalg.eigvals(J)
    scale = max(1.0, float(np.linalg.norm(J, 2)))
    chosen = np.array([bool(selector(complex(v))) for v in values], dtype=bool)
    for i, v in enumerate(values):
        if abs(v.imag) > tol * scale:
            j = int(np.argmin(np.abs(values - np.conj(v))))
            if chosen[i] != chosen[j]:
                raise SelectorSplitsPairError(f"selector separates conjugate pair {v:.6g}, {values[j]:.6g}")
    sigma = values[chosen]
    sigma_c = values[~chosen]
    if sigma.size and sigma_c.size:
        gap = float(np.min(np.abs(sigma[:, None] - sigma_c[None, :])))
        if gap < tol * scale:
            raise NearDegenerateError(f"selected and complementary spectra are {gap:.3e} apart")
    p = int(chosen.sum())
    if p in (0, n):
        Z = np.eye(n)
        E = Z[:, :p]
        E_t = Z[:, p:]
    else:
        T, Z, sdim = scipy.linalg.schur(J, output="real", sort=lambda re, im: bool(selector(complex(re, im))))
        if sdim != p:
            raise NearDegenerateError(f"Schur reordering selected {sdim} eigenvalues, expected {p}")
        T11, T12, T22 = T[:p, :p], T[:p, p:], T[p:, p:]
        X = scipy.linalg.solve_sylvester(T11, -T22, -T12)
        E = Z[:, :p]
        E_t = Z[:, :p] @ X + Z[:, p:]
    E = _normalise_columns(E)
    E_t = _normalise_columns(E_t)
    P = np.hstack([E, E_t])
    blocks = np.linalg.solve(P, J @ P) if n else P
    return SpectralSplit(
        J=J,
        eigenvalues=sigma,
        complement_eigenvalues=sigma_c,
        E=E,
        E_tilde=E_t,
        L=blocks[:p, :p],
        L_tilde=blocks[p:, p:],
        condition=float(np.linalg.cond(P)) if n else 1.0,
    )


def solve_sylvester(A, B, C, tol: float = 1e-8) -> np.ndarray:
    """Solve ``A X - X B = C`` for disjoint spectra of ``A`` and ``B``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    C = np.asarray(C, dtype=float).reshape(A.shape[0], B.shape[0])
    if A.size == 0 or B.size == 0:
        return np.zeros((A.shape[0], B.shape[0]))
    ea = scipy.linalg.eigvals(A)
    eb = scipy.linalg.eigvals(B)
    gap = float(np.min(np.abs(ea[:, None] - eb[None, :])))
    scale = max(1.0, float(np.linalg.norm(A, 2) + np.linalg.norm(B, 2)))
    if gap <= tol * scale:
        raise SpectraOverlapError(f"spectra of A and B are {gap:.3e} apart")
    return scipy.linalg.solve_sylvester(A, -B, C)


@dataclass(frozen=True, eq=False)
class TaylorModel:
    """Graph ``z = h(y)`` over ``E`` and reduced field ``y' = g(y)`` through ``degree``.

    ``invariance_residual`` is the largest residual coefficient divided by
    the largest model coefficient (at least 1).
    """

    point: np.ndarray
    E: np.ndarray
    E_tilde: np.ndarray
    degree: int
    h_coeffs: np.ndarray
    g_coeffs: np.ndarray
    invariance_residual: float = 0.0
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def p(self) -> int:
        return self.E.shape[1]

    @property
    def basis(self):
        return monomial_basis(self.p, self.degree)

    def h(self, y) -> np.ndarray:
        return self.basis.evaluate(self.h_coeffs, y)

    def g(self, y) -> np.ndarray:
        return self.basis.evaluate(self.g_coeffs, y)

    def _terms(self, coeffs, lowest):
        b = self.basis
        return [
            (b.exponents[i].tolist(), coeffs[:, i].tolist())
            for i in range(b.size)
            if b.degrees[i] >= lowest
        ]

    def h_terms(self) -> list:
        return self._terms(self.h_coeffs, 2)

    def g_terms(self) -> list:
        return self._terms(self.g_coeffs, 1)

    def coefficient(self, which: str, exponent: Sequence[int]) -> np.ndarray:
        coeffs = self.h_coeffs if which == "h" else self.g_coeffs
        return coeffs[:, self.basis.index[tuple(int(e) for e in exponent)]]

    def to_dict(self) -> dict:
        return {
            "point": self.point.tolist(),
            "basis_E": self.E.tolist(),
            "basis_Etilde": self.E_tilde.tolist(),
            "degree": self.degree,
            "h_coeffs": self.h_terms(),
            "g_coeffs": self.g_terms(),
        }

    def to_json(self, path=None, **kw) -> str:
        text = json.dumps(self.to_dict(), **kw)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_dict(cls, doc: dict) -> "TaylorModel":
        point = np.asarray(doc["point"], dtype=float)
        n = point.shape[0]
        E = np.asarray(doc["basis_E"], dtype=float).reshape(n, -1)
        E_t = np.asarray(doc["basis_Etilde"], dtype=float).reshape(n, -1)
        degree = int(doc["degree"])
        b = monomial_basis(E.shape[1], degree)
        h = np.zeros((E_t.shape[1], b.size))
        g = np.zeros((E.shape[1], b.size))
        for exps, vec in doc["h_coeffs"]:
            h[:, b.index[tuple(exps)]] = vec
        for exps, vec in doc["g_coeffs"]:
            g[:, b.index[tuple(exps)]] = vec
        return cls(point, E, E_t, degree, h, g)


class _FieldTaylor:
    """Taylor coefficients ``d^beta f(xi) / beta!`` from repeated symbolic differentiation."""

    def __init__(self, field: VectorField, xi: np.ndarray, degree: int):
        self.field = field
        self.env = dict(zip(field.variables, xi.tolist()))
        self.basis = monomial_basis(field.dim, degree)
        self._derivs: dict[tuple[int, tuple[int, ...]], Expression] = {}
        self.coeffs = np.zeros((field.dim, self.basis.size))
        for c in range(field.dim):
            for idx, beta in enumerate(self.basis.exponents):
                expr = self._derivative(c, tuple(beta.tolist()))
                if isinstance(expr, Const) and expr.value == 0.0:
                    continue
                self.coeffs[c, idx] = evaluate(expr, self.env) / _factorial(beta)

    def _derivative(self, comp: int, beta: tuple[int, ...]) -> Expression:
        key = (comp, beta)
        if key in self._derivs:
            return self._derivs[key]
        if not any(beta):
            expr = self.field.components[comp]
        else:
            i = next(k for k, b in enumerate(beta) if b)
            lower = list(beta)
            lower[i] -= 1
            expr = diff(self._derivative(comp, tuple(lower)), self.field.variables[i])
        self._derivs[key] = expr
        return expr


def _factorial(beta) -> float:
    out = 1.0
    for b in beta:
        for k in range(2, int(b) + 1):
            out *= k
    return out


def _compose(taylor: _FieldTaylor, delta: np.ndarray, basis) -> np.ndarray:
    """``f(xi + delta(y))`` truncated, with ``delta`` an ``(n, M)`` coefficient array."""
    n = delta.shape[0]
    products: dict[tuple[int, ...], np.ndarray] = {(0,) * n: basis.constant()}

    def monomial(beta):
        if beta in products:
            return products[beta]
        i = next(k for k, b in enumerate(beta) if b)
        lower = list(beta)
        lower[i] -= 1
        val = basis.mul(monomial(tuple(lower)), delta[i])
        products[beta] = val
        return val

    out = np.zeros((taylor.coeffs.shape[0], basis.size))
    for idx, beta in enumerate(taylor.basis.exponents):
        col = taylor.coeffs[:, idx]
        if not np.any(col):
            continue
        out += np.outer(col, monomial(tuple(beta.tolist())))
    return out


def _shift_operator(L: np.ndarray, basis, d: int) -> np.ndarray:
    """Matrix ``K`` with ``D(y^a) L y = sum_b K[a, b] y^b`` on degree-``d`` monomials."""
    idx = basis.of_degree(d)
    pos = {int(i): k for k, i in enumerate(idx)}
    K = np.zeros((idx.size, idx.size))
    for a_pos, a in enumerate(idx):
        alpha = basis.exponents[a]
        for i in range(basis.nvars):
            if alpha[i] == 0:
                continue
            for j in range(basis.nvars):
                if L[i, j] == 0.0:
                    continue
                beta = alpha.copy()
                beta[i] -= 1
                beta[j] += 1
                K[a_pos, pos[basis.index[tuple(beta.tolist())]]] += alpha[i] * L[i, j]
    return K


def taylor_invariant_manifold(
    field: VectorField,
    xi,
    split: SpectralSplit,
    degree: int,
    tol: float = 1e-8,
) -> TaylorModel:
    """Degree-``degree`` Taylor model of the invariant manifold tangent to ``split.E``."""
    if not 2 <= degree <= MAX_DEGREE:
        raise ParameterError(f"degree must be in 2..{MAX_DEGREE}")
    xi = np.asarray(xi, dtype=float).reshape(-1)
    n = field.dim
    p = split.p
    if xi.shape[0] != n or split.E.shape[0] != n:
        raise ParameterError("dimension mismatch between field, point and split")
    if p == 0:
        raise ParameterError("selected eigenspace is empty")
    basis = monomial_basis(p, degree)
    taylor = _FieldTaylor(field, xi, degree)
    P_inv = split.basis_inverse
    L, L_t = split.L, split.L_tilde
    H = np.zeros((n - p, basis.size))
    G = np.zeros((p, basis.size))
    lin = basis.of_degree(1)
    G[:, lin] = L  # variables are ordered like the columns of L
    ident = np.zeros((p, basis.size))
    ident[:, lin] = np.eye(p)

    def transformed(H_cur):
        delta = split.E @ ident + split.E_tilde @ H_cur
        return P_inv @ _compose(taylor, delta, basis)

    prev_norm = None
    for d in range(2, degree + 1):
        idx = basis.of_degree(d)
        phi = transformed(H)
        phi_t = phi[p:]
        drift = np.zeros((n - p, basis.size))
        G_nl = G.copy()
        G_nl[:, lin] = 0.0
        for i in range(p):
            drift += basis.mul(basis.derivative(H, i), G_nl[i])
        R = (phi_t - drift)[:, idx]
        if n > p:
            K = _shift_operator(L, basis, d)
            try:
                H[:, idx] = solve_sylvester(L_t, K, -R, tol=tol)
            except SpectraOverlapError:
                raise ResonanceError("homological operator is singular", degree=d) from None
        G[:, idx] = transformed(H)[:p][:, idx]
        norm = float(np.linalg.norm(H[:, idx])) + float(np.linalg.norm(G[:, idx]))
        if prev_norm is not None and prev_norm > 1e-12 and norm > 1e3 * prev_norm:
            warnings.warn(
                f"Taylor coefficients grow by {norm / prev_norm:.3g} at degree {d}; the manifold may not be analytic",
                DivergenceWarning,
                stacklevel=2,
            )
        if norm > 0:
            prev_norm = norm
    residual = _invariance_residual(basis, transformed(H), H, G, p)
    scale = max(1.0, float(np.abs(H).max(initial=0.0)), float(np.abs(G).max(initial=0.0)))
    return TaylorModel(xi, split.E, split.E_tilde, degree, H, G, residual / scale, split.eigenvalues)


def _invariance_residual(basis, phi, H, G, p) -> float:
    lhs = np.zeros_like(H)
    for i in range(p):
        lhs += basis.mul(basis.derivative(H, i), G[i])
    res_t = lhs - phi[p:]
    res_e = G - phi[:p]
    vals = [np.abs(res_t).max(initial=0.0), np.abs(res_e).max(initial=0.0)]
    return float(max(vals))


def invariance_residual(field: VectorField, model: TaylorModel) -> float:
    """Largest Taylor coefficient of ``Dh g - f_tilde(y, h)`` and ``g - f_E(y, h)`` (absolute)."""
    p = model.p
    basis = model.basis
    taylor = _FieldTaylor(field, model.point, model.degree)
    P_inv = np.linalg.inv(np.hstack([model.E, model.E_tilde]))
    ident = np.zeros((p, basis.size))
    ident[:, basis.of_degree(1)] = np.eye(p)
    phi = P_inv @ _compose(taylor, model.E @ ident + model.E_tilde @ model.h_coeffs, basis)
    return _invariance_residual(basis, phi, model.h_coeffs, model.g_coeffs, p)


def reduced_field(model: TaylorModel, names: Sequence[str] | None = None) -> VectorField:
    """Polynomial field ``y' = g(y)`` on the selected eigenspace."""
    p = model.p
    names = tuple(names) if names else tuple(f"y{i + 1}" for i in range(p))
    basis = model.basis
    comps = []
    for c in range(p):
        total: Expression = ZERO
        for idx, e in enumerate(basis.exponents):
            coef = float(model.g_coeffs[c, idx])
            if coef == 0.0:
                continue
            term: Expression = Const(coef)
            for v, k in zip(names, e):
                if k:
                    term = mul(term, power(Var(v), int(k)))
            total = add(total, term)
        comps.append(total)
    return VectorField(names, tuple(comps), name="reduced")


def embed_manifold(model: TaylorModel, y) -> np.ndarray:
    """Ambient point(s) ``xi + E y + E_tilde h(y)``."""
    y = np.asarray(y, dtype=float)
    return model.point + y @ model.E.T + model.h(y) @ model.E_tilde.T


def separatrix_seeds(
    J, xi, offset: float, eq: EquationSystem | None = None, tol: float = 1e-8
) -> list[np.ndarray]:
    """Points ``xi +- offset v`` along real tangent eigenvectors with nonzero eigenvalue.

    At a saddle these start the stable and unstable separatrices.
    """
    xi = np.asarray(xi, dtype=float)
    scale = max(1.0, float(np.linalg.norm(np.asarray(J, dtype=float), 2)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DefectiveEigenvalueWarning)
        infos = tangency_filter(J, eq, xi, tol)
    seeds = []
    for info in infos:
        if not info.tangent or abs(info.value.imag) > tol * scale or abs(info.value) <= tol * scale:
            continue
        v = np.real(info.vector)
        v = v / np.linalg.norm(v)
        seeds.append(xi + offset * v)
        seeds.append(xi - offset * v)
    return seeds
