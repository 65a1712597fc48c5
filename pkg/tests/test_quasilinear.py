from __future__ import annotations

import numpy as np
import pytest

from vessiot_kit.errors import (
    IndeterminateError,
    NoConvergenceError,
    NotDeterminedError,
    NotQuasilinearError,
    SingularJacobianError,
)
from vessiot_kit.fields import VectorField
from vessiot_kit.quasilinear import (
    find_stationary,
    is_quasilinear,
    project_field,
    scan_stationary,
    stationary_nullspace,
    trace_stationary_curve,
)
from vessiot_kit.system import EquationSystem


def impasse_reference(x, a=1.0, b=1.0, c=1.0):
    t, u, du = x
    return np.array([t * t, t * t * du, a * t * du + b * u - c * (du - 1) ** 2])


def test_detection(fold_eq, impasse_eq, exponential_eq):
    assert is_quasilinear(impasse_eq)
    assert is_quasilinear(exponential_eq)
    assert not is_quasilinear(fold_eq)
    system = EquationSystem.from_strings(["u1_2*u2_2 - t", "u2_2 - u1_0"], 2, 2)
    assert not is_quasilinear(system)


def test_hidden_zero_is_indeterminate():
    # (u')^2 - (u')^2 does not simplify structurally but vanishes everywhere
    eq = EquationSystem.from_strings(["u1_1 + sin(u1_1)^2 + cos(u1_1)^2 - 1"], 1, 1)
    with pytest.raises(IndeterminateError):
        is_quasilinear(eq)


def test_projection_matches_closed_form(impasse_eq):
    Y = project_field(impasse_eq)
    assert Y.variables == ("t", "u1_0", "u1_1")
    pts = np.random.default_rng(4).uniform(-2, 2, (100, 3))
    for p in pts:
        ref = impasse_reference(p)
        assert np.linalg.norm(Y(p) - ref) <= 1e-12 * max(1.0, np.linalg.norm(ref))


def test_projection_rejections(fold_eq):
    with pytest.raises(NotQuasilinearError):
        project_field(fold_eq)
    eq = EquationSystem.from_strings(["u1_1 - u1_0", "u1_1 - t"], 1, 1)
    with pytest.raises(NotDeterminedError):
        project_field(eq)


def test_stationary_points_on_parabola(impasse_eq):
    Y = project_field(impasse_eq)
    rng = np.random.default_rng(7)
    for _ in range(20):
        x = find_stationary(Y, rng.uniform(-0.5, 0.5, 3) + [0, 0, 1])
        assert abs(x[0]) <= 1e-9
        assert abs(x[1] - (x[2] - 1) ** 2) <= 1e-9


def test_tip_jacobian(impasse_eq):
    Y = project_field(impasse_eq)
    J = Y.jacobian([0, 0, 1])
    assert np.linalg.matrix_rank(J) == 1
    assert np.allclose(np.linalg.matrix_power(J, 3), 0)
    assert np.allclose(np.linalg.eigvals(J), 0)
    # away from the tip the zero eigenvalue is only double
    J2 = Y.jacobian([0, 0.25, 0.5])
    ev = np.sort(np.abs(np.linalg.eigvals(J2)))
    assert ev[0] < 1e-12 and ev[1] < 1e-12 and ev[2] > 0.1
    assert stationary_nullspace(Y, [0, 0.25, 0.5]).shape[1] == 2


def test_no_stationary_point():
    field = VectorField.from_strings(["t", "u"], ["1", "u"])
    with pytest.raises(NoConvergenceError):
        find_stationary(field, [0.3, 0.4])


def test_degenerate_stall_reports_kernel():
    # x^2 + 1e-7 has no real root; the iteration stalls near x = 0 with J ~ 0
    field = VectorField.from_strings(["x", "y"], ["x^2 + 0.0000001", "y"])
    with pytest.raises(SingularJacobianError) as exc:
        find_stationary(field, [0.3, 0.1])
    assert exc.value.nullspace.shape == (2, 1)


def test_scan_merges_duplicates():
    field = VectorField.from_strings(["x", "y"], ["x^2 - 1", "y"])
    pts = scan_stationary(field, [[2, 0], [3, 1], [-2, 0.5]])
    assert pts.shape == (2, 2)
    assert np.allclose(np.sort(pts[:, 0]), [-1, 1])


def test_trace_parabola(impasse_eq):
    Y = project_field(impasse_eq)
    pts = trace_stationary_curve(
        Y, [0, 0.25, 0.5], direction=[0, -1, 1], step=0.05, n_steps=40, bounds=[(-1, 1), (-1, 2), (-1, 3)]
    )
    assert len(pts) > 20
    assert np.max(np.abs(pts[:, 0])) <= 1e-9
    assert np.max(np.abs(pts[:, 1] - (pts[:, 2] - 1) ** 2)) <= 1e-9
    # the curve passes through the tip
    assert np.min(np.linalg.norm(pts - [0, 0, 1], axis=1)) < 0.05
