"""Independent reference solutions used by several test modules."""
from __future__ import annotations

import numpy as np
from scipy.optimize import brentq


def _arc_primitive(t: float) -> float:
    # d/dt (w - artanh(1/w)) = w for w = sqrt(1 + 2 e^{2t})
    w = np.sqrt(1.0 + 2.0 * np.exp(2.0 * t))
    return w - np.arctanh(1.0 / w)


def exponential_at_arclength(length: float) -> np.ndarray:
    """Point of the prolonged graph of ``e^t`` at ambient arclength ``length`` from (0, 1, 1)."""
    base = _arc_primitive(0.0)
    t = brentq(lambda t: _arc_primitive(t) - base - length, -5, 5, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return np.array([t, np.exp(t), np.exp(t)])


def observed_orders(errors) -> np.ndarray:
    e = np.asarray(errors, dtype=float)
    return np.log2(e[:-1] / e[1:])


def graph_manifold_series(fx: str, fy: str, degree: int):
    """Coefficients of an invariant graph ``y = h(x)`` and its reduced field.

    Undetermined coefficients are substituted into ``h'(x) fx(x, h) = fy(x, h)``
    and solved order by order with sympy; returns ``(h, g)`` as lists indexed
    by the power of ``x`` (``g = fx(x, h(x))`` truncated).
    """
    import sympy as sp

    x, y = sp.symbols("x y")
    f_x = sp.sympify(fx.replace("^", "**"))
    f_y = sp.sympify(fy.replace("^", "**"))
    coeffs = sp.symbols(f"c2:{degree + 1}")
    h = sum(c * x**k for k, c in zip(range(2, degree + 1), coeffs))
    g = sp.expand(f_x.subs(y, h))
    lhs = sp.expand(sp.diff(h, x) * g - f_y.subs(y, h))
    solution: dict = {}
    for k in range(2, degree + 1):
        eq_k = sp.expand(lhs.coeff(x, k).subs(solution))
        c_k = coeffs[k - 2]
        solution[c_k] = sp.solve(eq_k, c_k)[0]
    h_vals = [0.0, 0.0] + [float(solution[c]) for c in coeffs]
    g_poly = sp.Poly(sp.expand(g.subs(solution)), x)
    g_vals = [float(g_poly.coeff_monomial(x**k)) for k in range(degree + 1)]
    return h_vals, g_vals


def sylvester_by_kronecker(A, B, C) -> np.ndarray:
    """Solve ``A X - X B = C`` from the vectorised linear system."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n, m = A.shape[0], B.shape[0]
    op = np.kron(np.eye(m), A) - np.kron(B.T, np.eye(n))
    vec = np.linalg.solve(op, np.asarray(C, dtype=float).reshape(-1, order="F"))
    return vec.reshape((n, m), order="F")
