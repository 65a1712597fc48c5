from __future__ import annotations

import json

import numpy as np
import pytest

from vessiot_kit.errors import ExprSyntaxError, ParameterError
from vessiot_kit.fields import VectorField, symbolic_adjugate, symbolic_det
from vessiot_kit.expr import Var, evaluate
from vessiot_kit.system import EquationSystem, load_equation_file

from conftest import FOLD


def test_signature(fold_eq, impasse_eq):
    assert (fold_eq.m, fold_eq.q, fold_eq.k, fold_eq.n) == (1, 1, 1, 3)
    assert (impasse_eq.m, impasse_eq.q, impasse_eq.n) == (1, 2, 4)
    assert impasse_eq.top_order(0) == 2


def test_jacobian_matches_finite_differences(fold_eq):
    rng = np.random.default_rng(1)
    for _ in range(10):
        c = rng.uniform(-1, 1, 3)
        J = fold_eq.jacobian(c)
        fd = np.array(
            [(fold_eq.residual(c + 1e-6 * e) - fold_eq.residual(c - 1e-6 * e)) / 2e-6 for e in np.eye(3)]
        ).T
        assert np.allclose(J, fd, atol=1e-7)


def test_vectorised_evaluation(fold_eq):
    pts = np.random.default_rng(2).uniform(-1, 1, (7, 3))
    assert np.allclose(fold_eq.residual_many(pts)[:, 0], [fold_eq.residual(p)[0] for p in pts])
    assert fold_eq.jacobian_many(pts).shape == (7, 1, 3)


def test_load_equation_file(tmp_path):
    path = tmp_path / "eq.json"
    path.write_text(json.dumps({"m": 1, "q": 1, "equations": [FOLD], "labels": ["fold"]}))
    eq = load_equation_file(path)
    assert eq.labels == ("fold",)
    with pytest.raises(ParameterError):
        load_equation_file({"m": 1, "q": 1, "equations": FOLD})
    with pytest.raises(ParameterError):
        load_equation_file({"m": 1, "equations": [FOLD]})
    with pytest.raises(ExprSyntaxError):
        load_equation_file({"m": 1, "q": 1, "equations": ["u1_1 +* 2"]})


def test_underdetermined_warns():
    with pytest.warns(UserWarning):
        EquationSystem.from_strings(["u1_1 - u2_1"], 2, 1)


def test_vector_field_basics():
    f = VectorField.from_strings(["x", "y"], ["x*y", "a*y"], {"a": 2.0})
    assert f(np.array([2.0, 3.0])).tolist() == [6.0, 6.0]
    assert np.allclose(f.jacobian([2.0, 3.0]), [[3.0, 2.0], [0.0, 2.0]])
    assert f.scaled(0.5)([2.0, 3.0]).tolist() == [3.0, 3.0]
    again = VectorField.from_dict(f.to_dict())
    assert np.allclose(again.evaluate_many([[1.0, 1.0], [2.0, 3.0]]), [[1.0, 2.0], [6.0, 6.0]])
    with pytest.raises(ParameterError):
        VectorField.from_strings(["x", "x"], ["1", "1"])
    with pytest.raises(ParameterError):
        VectorField.from_dict({"variables": ["x"]})


def test_symbolic_determinant_and_adjugate():
    rng = np.random.default_rng(3)
    names = [f"m{i}{j}" for i in range(3) for j in range(3)]
    mat = [[Var(f"m{i}{j}") for j in range(3)] for i in range(3)]
    vals = rng.normal(size=(3, 3))
    env = dict(zip(names, vals.ravel()))
    det = evaluate(symbolic_det(mat), env)
    adj = np.array([[evaluate(e, env) for e in row] for row in symbolic_adjugate(mat)])
    assert det == pytest.approx(np.linalg.det(vals), rel=1e-12)
    assert np.allclose(adj @ vals, det * np.eye(3), atol=1e-12)
