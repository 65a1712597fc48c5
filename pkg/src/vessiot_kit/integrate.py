"""Generalised solutions: fixed-step RK4 along the Vessiot direction with projection.

The integrated field is the ambient image of the continued Vessiot direction,
rescaled to unit Euclidean length so that the step size is arclength in jet
coordinates.  After each step the point is pulled back onto ``F = 0`` by a
minimal-norm Gauss-Newton correction whenever the residual exceeds half the
manifold tolerance.
"""
from __future__ import annotations

import csv
import enum
import json
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DomainError,
    IrregularSingularityError,
    NoConvergenceError,
    NoDirectionError,
    NumericError,
    OrientationFlipError,
    ParameterError,
    SingularJacobianError,
)
from .jet import JetPoint
from .system import EquationSystem
from .vessiot import DEFAULT_RANK_TOL, TangentDirection, continued_direction, vessiot_direction

__all__ = [
    "StopReason",
    "IntegratorConfig",
    "Trajectory",
    "step",
    "project_to_manifold",
    "integrate_generalized",
    "geometric_solution",
]

log = logging.getLogger(__name__)


class StopReason(str, enum.Enum):
    BOUNDARY = "Boundary"
    MAX_STEPS = "MaxSteps"
    NEAR_SINGULARITY = "NearSingularity"
    NO_CONVERGENCE = "NoConvergence"


@dataclass
class IntegratorConfig:
    """Integration parameters.

    ``bounds`` is a sequence of ``(lo, hi)`` pairs, one per ambient
    coordinate (``None`` disables the box test); infinite limits are allowed.
    """

    step_size: float = 1e-2
    manifold_tol: float = 1e-9
    bounds: Sequence[Sequence[float]] | None = None
    max_steps: int = 10_000
    singular_points: Sequence[Sequence[float]] = field(default_factory=list)
    d_s: float = 0.0
    projection_max_iter: int = 20
    rank_tol: float = DEFAULT_RANK_TOL
    direction_tol: float = 1e-12
    on_flip: str = "warn"

    def __post_init__(self):
        if not self.step_size > 0:
            raise ParameterError("step_size must be positive")
        if not self.manifold_tol > 0:
            raise ParameterError("manifold_tol must be positive")
        if self.d_s < 0:
            raise ParameterError("d_s must be non-negative")
        if self.max_steps < 0:
            raise ParameterError("max_steps must be non-negative")
        if self.bounds is not None:
            b = np.asarray(self.bounds, dtype=float)
            if b.ndim != 2 or b.shape[1] != 2 or np.any(b[:, 0] > b[:, 1]):
                raise ParameterError("bounds must be (lo, hi) pairs with lo <= hi")

    def box(self, n: int) -> np.ndarray | None:
        if self.bounds is None:
            return None
        b = np.asarray(self.bounds, dtype=float)
        if b.shape[0] != n:
            raise ParameterError(f"bounds need {n} coordinate ranges, got {b.shape[0]}")
        return b

    def singular_array(self, n: int) -> np.ndarray:
        pts = np.asarray(self.singular_points, dtype=float).reshape(-1, n) if len(self.singular_points) else np.zeros((0, n))
        return pts


@dataclass(eq=False)
class Trajectory:
    eq: EquationSystem
    points: np.ndarray
    directions: list[TangentDirection]
    stop_reason: StopReason
    arclength: np.ndarray

    def __len__(self):
        return self.points.shape[0]

    @property
    def samples(self) -> list[JetPoint]:
        return [JetPoint(self.eq.spec, p) for p in self.points]

    def records(self):
        for s, p, d in zip(self.arclength, self.points, self.directions):
            yield {"s": float(s), "point": p.tolist(), "direction": d.ambient.tolist()}

    def to_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records():
                fh.write(json.dumps(rec) + "\n")

    def to_csv(self, path) -> None:
        names = self.eq.spec.names
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["s", *names, *(f"d_{v}" for v in names)])
            for s, p, d in zip(self.arclength, self.points, self.directions):
                w.writerow([repr(float(s)), *map(repr, p.tolist()), *map(repr, d.ambient.tolist())])


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _rk4(eq, c, prev, h, cfg):
    kw = dict(tol=cfg.direction_tol, on_flip=cfg.on_flip, rank_tol=cfg.rank_tol)
    d1 = continued_direction(eq, c, prev, **kw)
    f1 = _unit(d1.ambient)
    d2 = continued_direction(eq, c + 0.5 * h * f1, d1, **kw)
    f2 = _unit(d2.ambient)
    d3 = continued_direction(eq, c + 0.5 * h * f2, d2, **kw)
    f3 = _unit(d3.ambient)
    d4 = continued_direction(eq, c + h * f3, d3, **kw)
    f4 = _unit(d4.ambient)
    return c + (h / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4), d1, d4


def step(
    eq: EquationSystem, rho, prev: TangentDirection, h: float, cfg: IntegratorConfig | None = None
) -> tuple[JetPoint, TangentDirection]:
    """One RK4 step of size ``h``; returns the unprojected point and the stage-1 direction."""
    cfg = cfg or IntegratorConfig(step_size=abs(h) or 1.0)
    c = np.asarray(rho, dtype=float).reshape(-1)
    new, d1, _ = _rk4(eq, c, prev, h, cfg)
    return JetPoint(eq.spec, new), d1


def _project(eq, c, tol, max_iter, free=None):
    c = np.array(c, dtype=float)
    cols = np.arange(eq.n) if free is None else np.flatnonzero(free)
    for _ in range(max_iter + 1):
        F = eq.residual(c)
        norm = float(np.linalg.norm(F))
        if not np.isfinite(norm):
            raise NoConvergenceError("residual is not finite during projection", iterate=c, residual=norm)
        if norm <= tol:
            return c
        J = eq.jacobian(c)[:, cols]
        u, s, vt = np.linalg.svd(J, full_matrices=True)
        rank = int(np.sum(s > 1e-12 * max(1.0, s[0] if s.size else 0.0)))
        if rank < J.shape[0]:
            raise SingularJacobianError(
                "dF dF^T is rank-deficient during projection",
                iterate=c,
                residual=norm,
                nullspace=u[:, rank:],
            )
        c[cols] -= J.T @ np.linalg.solve(J @ J.T, F)
    raise NoConvergenceError(
        f"projection did not reach |F| <= {tol:g} in {max_iter} iterations", iterate=c, residual=norm
    )


def project_to_manifold(eq: EquationSystem, rho, tol: float = 1e-9, max_iter: int = 20, free=None) -> JetPoint:
    """Minimal-norm Gauss-Newton correction onto ``F = 0``.

    ``free`` optionally masks the coordinates that may move.
    """
    return JetPoint(eq.spec, _project(eq, rho, tol, max_iter, free))


def _outside(c, box) -> bool:
    return box is not None and bool(np.any((c < box[:, 0]) | (c > box[:, 1])))


def _near(c, singular, d_s) -> bool:
    return singular.shape[0] > 0 and d_s > 0 and float(np.min(np.linalg.norm(singular - c, axis=1))) < d_s


def integrate_generalized(
    eq: EquationSystem,
    rho0,
    initial_dir: TangentDirection | None = None,
    cfg: IntegratorConfig | None = None,
) -> Trajectory:
    """Trace the generalised solution through ``rho0`` until a stop criterion fires."""
    cfg = cfg or IntegratorConfig()
    box = cfg.box(eq.n)
    singular = cfg.singular_array(eq.n)
    c = np.asarray(rho0, dtype=float).reshape(-1)
    if c.shape[0] != eq.n:
        raise ParameterError(f"expected {eq.n} jet coordinates, got {c.shape[0]}")
    if np.linalg.norm(eq.residual(c)) > cfg.manifold_tol:
        c = _project(eq, c, cfg.manifold_tol, cfg.projection_max_iter)
    if initial_dir is None:
        d = vessiot_direction(eq, c, cfg.rank_tol)
    else:
        d = continued_direction(eq, c, initial_dir, cfg.direction_tol, on_flip=cfg.on_flip, rank_tol=cfg.rank_tol)
    points = [c]
    dirs = [d]
    arc = [0.0]
    h = cfg.step_size
    reason = StopReason.MAX_STEPS
    if _outside(c, box):
        reason = StopReason.BOUNDARY
    elif _near(c, singular, cfg.d_s):
        reason = StopReason.NEAR_SINGULARITY
    else:
        for _ in range(cfg.max_steps):
            try:
                new, _, d4 = _rk4(eq, c, d, h, cfg)
                if np.linalg.norm(eq.residual(new)) > 0.5 * cfg.manifold_tol:
                    # overshoot the tolerance so projected samples sit well inside it
                    new = _project(eq, new, 1e-2 * cfg.manifold_tol, cfg.projection_max_iter)
                d = continued_direction(eq, new, d4, cfg.direction_tol, on_flip=cfg.on_flip, rank_tol=cfg.rank_tol)
            except IrregularSingularityError as exc:
                log.info("stopping near irregular singularity: %s", exc)
                reason = StopReason.NEAR_SINGULARITY
                break
            except (NumericError, DomainError, NoDirectionError, OrientationFlipError) as exc:
                log.info("stopping after numeric failure: %s", exc)
                reason = StopReason.NO_CONVERGENCE
                break
            arc.append(arc[-1] + float(np.linalg.norm(new - c)))
            c = new
            points.append(c)
            dirs.append(d)
            if _outside(c, box):
                reason = StopReason.BOUNDARY
                break
            if _near(c, singular, cfg.d_s):
                reason = StopReason.NEAR_SINGULARITY
                break
    return Trajectory(eq, np.array(points), dirs, reason, np.array(arc))


def geometric_solution(traj: Trajectory) -> np.ndarray:
    """Project samples to ``(t, u^1, ..., u^m)``, keeping their order."""
    spec = traj.eq.spec
    cols = [0] + [spec.index(a, 0) for a in range(1, spec.m + 1)]
    return traj.points[:, cols]
