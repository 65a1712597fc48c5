from __future__ import annotations

import warnings

import numpy as np
import pytest

from vessiot_kit.system import EquationSystem

FOLD = "(1+t^2)*u1_1^2 + u1_0^2 - (1+sin(2*t)/2)^2"
IMPASSE = "t^2*u1_2 = a*t*u1_1 + b*u1_0 - c*(u1_1-1)^2"


def radius(t):
    return 1.0 + np.sin(2.0 * t) / 2.0


def radius_dot(t):
    return np.cos(2.0 * t)


def radius_ddot(t):
    return -2.0 * np.sin(2.0 * t)


def fold_point(t, sign=1.0, angle=None):
    """Point on the fold surface; ``angle`` parametrises the ellipse in (u, u')."""
    r = radius(t)
    if angle is None:
        return np.array([t, sign * r, 0.0])
    return np.array([t, r * np.cos(angle), r * np.sin(angle) / np.sqrt(1 + t * t)])


@pytest.fixture(scope="session")
def fold_eq():
    return EquationSystem.from_strings([FOLD], 1, 1)


@pytest.fixture(scope="session")
def impasse_eq():
    return EquationSystem.from_strings([IMPASSE], 1, 2, {"a": 1, "b": 1, "c": 1})


@pytest.fixture(scope="session")
def exponential_eq():
    return EquationSystem.from_strings(["u1_1 - u1_0"], 1, 1)


@pytest.fixture(scope="session")
def sphere_eq():
    return EquationSystem.from_strings(["t^2 + u1_0^2 + u1_1^2 - 1"], 1, 1)


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


# --- acceptance reporting ----------------------------------------------------

_VERDICTS: list[str] = []


class Verdict:
    def __init__(self, number: int):
        self.number = number
        self.recorded = False

    def __call__(self, checks: dict[str, bool], detail: str = "") -> None:
        failed = [name for name, ok in checks.items() if not ok]
        status = "FAIL" if failed else "PASS"
        text = detail if not failed else f"failed: {', '.join(failed)}; {detail}"
        line = f"criterion {self.number}: {status}  {text}"
        _VERDICTS.append(line)
        print(line)
        self.recorded = True
        assert not failed, line


@pytest.fixture
def verdict(request):
    number = int(request.node.name.split("_")[2])
    v = Verdict(number)
    yield v
    if not v.recorded:
        line = f"criterion {number}: FAIL  raised before all checks ran"
        _VERDICTS.append(line)
        print(line)


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
