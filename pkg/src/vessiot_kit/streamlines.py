"""Evenly spaced streamlines in the plane, on surfaces in 3-space and in volumes.

Placement follows the classical seed-and-grow scheme: a streamline is grown
in both directions from a seed until it leaves the region, comes closer than
``d_test`` to a sample of another line (or to a much earlier sample of its
own), or enters the ``d_s`` ball of a singular point.  Candidate seeds are
offset by ``d_sep`` orthogonally to the line at every sample and consumed in
FIFO order, each batch shuffled by a seeded generator.  A final pass over a
``d_sep / 2`` probe lattice seeds every remaining hole, so that the region is
covered to within ``d_sep``.
"""
from __future__ import annotations

import json
import logging
import math
from collections import defaultdict, deque
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import EmptyResultError, NumericError, ParameterError, SingularityError
from .export import svg_polylines
from .fields import VectorField
from .integrate import IntegratorConfig, _project, _rk4
from .system import EquationSystem
from .vessiot import continued_direction, vessiot_direction

__all__ = [
    "PlacementParams",
    "Streamline",
    "Portrait",
    "SpatialIndex",
    "place_2d",
    "place_2_5d",
    "place_3d",
    "hexagon_offsets",
    "probe_lattice",
    "surface_probes",
    "depth_attributes",
]

log = logging.getLogger(__name__)


@dataclass
class PlacementParams:
    """Parameters of a placement run.

    ``region`` is a list of ``(lo, hi)`` pairs, one per ambient coordinate.
    ``sample_spacing`` is the arclength between stored samples (default
    ``d_sep``).  Extra ``seeds`` are grown before the regular seed queue and
    only need to keep ``d_test`` from existing samples.
    """

    d_sep: float
    d_test: float
    h: float
    region: Sequence[Sequence[float]]
    d_s: float = 0.0
    seed: Sequence[float] | None = None
    singular_points: Sequence[Sequence[float]] = ()
    rng_seed: int = 0
    sample_spacing: float | None = None
    max_samples: int = 100_000
    manifold_tol: float = 1e-9
    seeds: Sequence[Sequence[float]] = ()
    fill: bool = True

    def __post_init__(self):
        if not 0 < self.d_test < self.d_sep:
            raise ParameterError("need 0 < d_test < d_sep")
        if self.d_s < 0:
            raise ParameterError("d_s must be non-negative")
        if not 0 < self.h <= self.d_test:
            raise ParameterError("need 0 < h <= d_test")
        if self.sample_spacing is not None and not self.sample_spacing >= self.h:
            raise ParameterError("sample_spacing must be at least h")
        r = np.asarray(self.region, dtype=float)
        if r.ndim != 2 or r.shape[1] != 2 or np.any(r[:, 0] >= r[:, 1]):
            raise ParameterError("region must be a list of (lo, hi) pairs with lo < hi")
        if self.max_samples < 1:
            raise ParameterError("max_samples must be positive")

    @property
    def box(self) -> np.ndarray:
        return np.asarray(self.region, dtype=float)

    @property
    def dim(self) -> int:
        return self.box.shape[0]

    @property
    def spacing(self) -> float:
        return self.d_sep if self.sample_spacing is None else float(self.sample_spacing)

    @property
    def steps_per_sample(self) -> int:
        return max(1, math.ceil(self.spacing / self.h - 1e-9))

    def singular_array(self) -> np.ndarray:
        if len(self.singular_points) == 0:
            return np.zeros((0, self.dim))
        return np.asarray(self.singular_points, dtype=float).reshape(-1, self.dim)

    def to_dict(self) -> dict:
        doc = asdict(self)
        for key in ("region", "seed", "singular_points", "seeds"):
            if doc[key] is not None:
                doc[key] = np.asarray(doc[key], dtype=float).tolist()
        return doc


@dataclass(eq=False)
class Streamline:
    points: np.ndarray
    end_reasons: tuple[str, str] = ("", "")
    attributes: np.ndarray | None = None

    def __len__(self):
        return self.points.shape[0]

    def to_dict(self) -> dict:
        doc = {"points": self.points.tolist(), "ends": list(self.end_reasons)}
        if self.attributes is not None:
            doc["attributes"] = self.attributes.tolist()
        return doc


@dataclass(eq=False)
class Portrait:
    """Placement result: the streamlines plus run statistics."""

    streamlines: list[Streamline]
    params: PlacementParams
    stats: dict = field(default_factory=dict)

    def __iter__(self) -> Iterator[Streamline]:
        return iter(self.streamlines)

    def __len__(self):
        return len(self.streamlines)

    def __getitem__(self, i):
        return self.streamlines[i]

    def all_points(self) -> np.ndarray:
        if not self.streamlines:
            return np.zeros((0, self.params.dim))
        return np.vstack([s.points for s in self.streamlines])

    def to_dict(self) -> dict:
        return {"params": self.params.to_dict(), "streamlines": [s.to_dict() for s in self.streamlines]}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text

    def to_svg(self, path=None, axes: tuple[int, int] = (0, 1), stroke_width: float = 1.0) -> str:
        box = self.params.box
        region = [box[axes[0]], box[axes[1]]]
        lines = [s.points[:, list(axes)] for s in self.streamlines]
        widths = [None if s.attributes is None else s.attributes[:, 2] for s in self.streamlines]
        opac = [None if s.attributes is None else s.attributes[:, 1] for s in self.streamlines]
        sing = self.params.singular_array()
        markers = sing[:, list(axes)] if sing.size else ()
        text = svg_polylines(lines, region, stroke_width, widths, opac, markers)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


class SpatialIndex:
    """Uniform grid of cubic cells; neighbourhood queries scan ``3^dim`` cells."""

    def __init__(self, cell: float, dim: int):
        if cell <= 0:
            raise ParameterError("cell size must be positive")
        self.cell = float(cell)
        self.dim = dim
        self.cells: dict[tuple[int, ...], list[int]] = defaultdict(list)
        self.points: list[tuple[float, ...]] = []
        self.line: list[int] = []
        self.arclength: list[float] = []
        self._offsets = list(np.ndindex(*([3] * dim)))

    def __len__(self):
        return len(self.points)

    def key(self, p) -> tuple[int, ...]:
        return tuple(int(math.floor(x / self.cell)) for x in p)

    def insert(self, p, line: int = -1, s: float = 0.0) -> int:
        tp = tuple(float(x) for x in p)
        idx = len(self.points)
        self.points.append(tp)
        self.line.append(line)
        self.arclength.append(float(s))
        self.cells[self.key(tp)].append(idx)
        return idx

    def candidates(self, p, radius: float | None = None) -> Iterator[int]:
        reach = 1 if radius is None or radius <= self.cell else math.ceil(radius / self.cell)
        base = self.key(p)
        if reach == 1:
            offsets = self._offsets
            for off in offsets:
                yield from self.cells.get(tuple(b + o - 1 for b, o in zip(base, off)), ())
        else:
            for off in np.ndindex(*([2 * reach + 1] * self.dim)):
                yield from self.cells.get(tuple(b + o - reach for b, o in zip(base, off)), ())

    def within(self, p, radius: float) -> list[int]:
        tp = tuple(float(x) for x in p)
        return [i for i in self.candidates(tp, radius) if math.dist(tp, self.points[i]) < radius]

    def any_within(self, p, radius: float) -> bool:
        tp = tuple(float(x) for x in p)
        return any(math.dist(tp, self.points[i]) < radius for i in self.candidates(tp, radius))

    def nearest(self, p, radius: float) -> float:
        """Distance to the nearest stored point, or ``inf`` beyond ``radius``."""
        tp = tuple(float(x) for x in p)
        best = math.inf
        for i in self.candidates(tp, radius):
            d = math.dist(tp, self.points[i])
            if d < best:
                best = d
        return best if best <= radius else math.inf


# ---------------------------------------------------------------------------
# tracers: advance a state by one step of arclength h


class _FieldTracer:
    """Unit-speed RK4 on ``f / |f|`` for planar and volumetric fields."""

    def __init__(self, field: VectorField, h: float):
        self.field = field
        self.h = h

    def _dir(self, x, sign):
        v = self.field(x)
        n = float(np.linalg.norm(v))
        if not np.isfinite(n) or n <= 1e-14:
            return None
        return sign * v / n

    def start(self, p, sign):
        p = np.asarray(p, dtype=float)
        return None if self._dir(p, sign) is None else (p, sign)

    def advance(self, state):
        x, sign = state
        h = self.h
        try:
            k1 = self._dir(x, sign)
            if k1 is None:
                return None
            k2 = self._dir(x + 0.5 * h * k1, sign)
            if k2 is None:
                return None
            k3 = self._dir(x + 0.5 * h * k2, sign)
            if k3 is None:
                return None
            k4 = self._dir(x + h * k3, sign)
            if k4 is None:
                return None
        except NumericError:
            return None
        return (x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4), sign)

    @staticmethod
    def point(state):
        return state[0]

    def tangent(self, state):
        return self._dir(state[0], 1.0)


class _SurfaceTracer:
    """Vessiot direction field of a first-order scalar equation, kept on ``F = 0``."""

    def __init__(self, eq: EquationSystem, h: float, tol: float):
        self.eq = eq
        self.h = h
        self.tol = tol
        self.cfg = IntegratorConfig(step_size=h, manifold_tol=tol)

    def start(self, p, sign):
        try:
            d = vessiot_direction(self.eq, p)
        except (NumericError, SingularityError):
            return None
        if sign < 0:
            d = d.reversed()
        return (np.asarray(p, dtype=float), d)

    def advance(self, state):
        c, d = state
        try:
            new, _, d4 = _rk4(self.eq, c, d, self.h, self.cfg)
            if np.linalg.norm(self.eq.residual(new)) > 0.5 * self.tol:
                new = _project(self.eq, new, 1e-2 * self.tol, 20)
            d_new = continued_direction(self.eq, new, d4)
        except (NumericError, SingularityError):
            return None
        return (new, d_new)

    @staticmethod
    def point(state):
        return state[0]

    def tangent(self, state):
        v = state[1].ambient
        return v / np.linalg.norm(v)


# ---------------------------------------------------------------------------
# seed candidates


def _planar_offsets(p, tangent, d_sep):
    normal = np.array([-tangent[1], tangent[0]])
    return [p + d_sep * normal, p - d_sep * normal]


def _orthonormal_pair(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(v)))] = 1.0
    e1 = np.cross(v, axis)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(v, e1)
    return e1, e2 / np.linalg.norm(e2)


def hexagon_offsets(p, tangent, d_sep) -> list[np.ndarray]:
    """Six points at 60 degree spacing on the circle of radius ``d_sep`` normal to ``tangent``."""
    v = np.asarray(tangent, dtype=float)
    v = v / np.linalg.norm(v)
    e1, e2 = _orthonormal_pair(v)
    p = np.asarray(p, dtype=float)
    return [p + d_sep * (math.cos(k * math.pi / 3) * e1 + math.sin(k * math.pi / 3) * e2) for k in range(6)]


def _surface_offset(eq: EquationSystem, p, tangent, d_sep, sign, tol, max_iter=30):
    """Point on ``F = 0`` at distance ``d_sep`` from ``p``, sideways from ``tangent``.

    Solves for ``(s, c)`` with ``F(p + s w + c n) = 0`` and ``s^2 + c^2 = d_sep^2``
    where ``n`` is the unit normal and ``w = n x tangent``.
    """
    grad = eq.jacobian(p)[0]
    n = grad / np.linalg.norm(grad)
    w = np.cross(n, tangent)
    w /= np.linalg.norm(w)
    s, c = sign * d_sep, 0.0
    for _ in range(max_iter):
        q = p + s * w + c * n
        F = float(eq.residual(q)[0])
        G = 0.5 * (s * s + c * c - d_sep * d_sep)
        if abs(F) <= 1e-2 * tol and abs(G) <= 1e-14 * d_sep * d_sep:
            return q
        g = eq.jacobian(q)[0]
        J = np.array([[g @ w, g @ n], [s, c]])
        try:
            ds, dc = np.linalg.solve(J, [-F, -G])
        except np.linalg.LinAlgError:
            return None
        s += ds
        c += dc
        if not (np.isfinite(s) and np.isfinite(c)) or abs(c) > d_sep:
            return None
    return None


# ---------------------------------------------------------------------------
# probe lattices


def probe_lattice(region, spacing: float) -> np.ndarray:
    """Grid of points with the given spacing anchored at the region's lower corner."""
    box = np.asarray(region, dtype=float)
    axes = [
        np.minimum(lo + spacing * np.arange(int(math.floor((hi - lo) / spacing + 1e-9)) + 1), hi)
        for lo, hi in box
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def surface_probes(eq: EquationSystem, region, spacing: float, tol: float = 1e-9) -> np.ndarray:
    """Lattice points within ``spacing`` of ``F = 0`` projected onto it (inside ``region``)."""
    box = np.asarray(region, dtype=float)
    grid = probe_lattice(region, spacing)
    F = eq.residual_many(grid)[:, 0]
    G = np.linalg.norm(eq.jacobian_many(grid)[:, 0, :], axis=1)
    with np.errstate(all="ignore"):
        near = np.isfinite(F) & (np.abs(F) <= spacing * G)
    out = []
    for p in grid[near]:
        try:
            q = _project(eq, p, 1e-2 * tol, 20)
        except NumericError:
            continue
        if np.linalg.norm(q - p) <= spacing and np.all(q >= box[:, 0]) and np.all(q <= box[:, 1]):
            out.append(q)
    return np.array(out).reshape(-1, box.shape[0])


# ---------------------------------------------------------------------------
# placement driver


class _Placer:
    def __init__(self, tracer, params: PlacementParams, offsets: Callable, probes: Callable):
        self.tracer = tracer
        self.params = params
        self.offsets = offsets
        self.probes = probes
        self.box = params.box
        self.index = SpatialIndex(params.d_sep, params.dim)
        sing = params.singular_array()
        self.singular = SpatialIndex(max(params.d_s, params.d_sep), params.dim)
        for s in sing:
            self.singular.insert(s)
        self.rng = np.random.default_rng(params.rng_seed)
        self.lines: list[Streamline] = []
        self.queue: deque = deque()
        self.stats = {"seed_failures": 0, "fill_seeds": 0, "rejected_seeds": 0}
        self.own_gap = 2 * params.d_test + params.spacing

    def inside(self, p) -> bool:
        return bool(np.all(p >= self.box[:, 0]) and np.all(p <= self.box[:, 1]))

    def near_singular(self, p) -> bool:
        return self.params.d_s > 0 and self.singular.any_within(p, self.params.d_s)

    def admissible(self, p, min_dist) -> bool:
        return (
            p is not None
            and self.inside(p)
            and not self.near_singular(p)
            and not self.index.any_within(p, min_dist)
        )

    def blocked(self, p, line_id, s) -> bool:
        tp = tuple(float(x) for x in p)
        idx = self.index
        d_test = self.params.d_test
        for i in idx.candidates(tp):
            if math.dist(tp, idx.points[i]) < d_test:
                if idx.line[i] != line_id or abs(idx.arclength[i] - s) >= self.own_gap:
                    return True
        return False

    def _half(self, line_id, p0, sign):
        """Grow one half; returns sample points (excluding the seed), their states and the end reason."""
        params = self.params
        state = self.tracer.start(p0, sign)
        if state is None:
            return [], [], "stationary"
        samples, states = [], []
        last = np.asarray(p0, dtype=float)
        last_sample = last
        s = 0.0
        steps = 0
        reason = "max_length"
        cap = params.max_samples * params.steps_per_sample
        pending = None
        while steps < cap and len(self.index) < params.max_samples:
            nxt = self.tracer.advance(state)
            if nxt is None:
                reason = "stationary"
                break
            p = self.tracer.point(nxt)
            if not self.inside(p):
                reason = "boundary"
                break
            if self.near_singular(p):
                reason = "singularity"
                break
            s_new = s + sign * float(np.linalg.norm(p - last))
            if self.blocked(p, line_id, s_new):
                reason = "separation"
                break
            state, last, s = nxt, p, s_new
            steps += 1
            pending = (p, nxt, s)
            if steps % params.steps_per_sample == 0:
                self.index.insert(p, line_id, s)
                samples.append(p)
                states.append(nxt)
                last_sample = p
                pending = None
        if pending is not None and np.linalg.norm(pending[0] - last_sample) >= 0.5 * params.spacing:
            self.index.insert(pending[0], line_id, pending[2])
            samples.append(pending[0])
            states.append(pending[1])
        return samples, states, reason

    def grow(self, p0):
        line_id = len(self.lines)
        p0 = np.asarray(p0, dtype=float)
        self.index.insert(p0, line_id, 0.0)
        seed_state = self.tracer.start(p0, 1.0)
        fwd, fwd_states, r_fwd = self._half(line_id, p0, 1.0)
        bwd, bwd_states, r_bwd = self._half(line_id, p0, -1.0)
        points = [*reversed(bwd), p0, *fwd]
        line = Streamline(np.array(points), (r_bwd, r_fwd))
        self.lines.append(line)
        states = [*reversed(bwd_states), seed_state, *fwd_states]
        batch = []
        for p, st in zip(points, states):
            if st is None:
                continue
            tangent = self.tracer.tangent(st)
            if tangent is None:
                continue
            batch.extend(self.offsets(p, tangent))
        if batch:
            order = self.rng.permutation(len(batch))
            self.queue.extend(batch[i] for i in order)

    def drain(self):
        tol = self.params.d_sep * (1 - 1e-6)
        while self.queue and len(self.index) < self.params.max_samples:
            cand = self.queue.popleft()
            if cand is None:
                self.stats["seed_failures"] += 1
                continue
            if self.admissible(cand, tol):
                self.grow(cand)
            else:
                self.stats["rejected_seeds"] += 1

    def run(self, first) -> list[Streamline]:
        params = self.params
        if first is None or not self.admissible(first, params.d_test):
            raise EmptyResultError("initial seed is outside the region or too close to a singular point")
        self.grow(first)
        self.drain()
        for extra in params.seeds:
            extra = self.prepare(extra)
            if self.admissible(extra, params.d_test):
                self.grow(extra)
                self.drain()
        if params.fill:
            for probe in self.probes():
                if len(self.index) >= params.max_samples:
                    break
                if self.admissible(probe, params.d_sep):
                    self.stats["fill_seeds"] += 1
                    self.grow(probe)
                    self.drain()
        return self.lines

    def prepare(self, p):
        return np.asarray(p, dtype=float)


def _finish(placer: _Placer) -> Portrait:
    stats = dict(placer.stats)
    stats["lines"] = len(placer.lines)
    stats["samples"] = len(placer.index)
    return Portrait(placer.lines, placer.params, stats)


def _default_seed(params: PlacementParams) -> np.ndarray:
    return params.box.mean(axis=1) if params.seed is None else np.asarray(params.seed, dtype=float)


def place_2d(field: VectorField, params: PlacementParams) -> Portrait:
    """Evenly spaced streamlines of a planar field."""
    if field.dim != 2 or params.dim != 2:
        raise ParameterError("place_2d needs a planar field and a rectangle")
    placer = _Placer(
        _FieldTracer(field, params.h),
        params,
        lambda p, t: _planar_offsets(p, t, params.d_sep),
        lambda: probe_lattice(params.box, 0.5 * params.d_sep),
    )
    placer.run(_default_seed(params))
    return _finish(placer)


def place_3d(field: VectorField, params: PlacementParams) -> Portrait:
    """Evenly spaced streamlines of a field in a box, seeded on hexagons."""
    if field.dim != 3 or params.dim != 3:
        raise ParameterError("place_3d needs a 3-dimensional field and box")
    placer = _Placer(
        _FieldTracer(field, params.h),
        params,
        lambda p, t: hexagon_offsets(p, t, params.d_sep),
        lambda: probe_lattice(params.box, 0.5 * params.d_sep),
    )
    placer.run(_default_seed(params))
    return _finish(placer)


def place_2_5d(eq: EquationSystem, params: PlacementParams) -> Portrait:
    """Evenly spaced generalised solutions on the surface of a first-order scalar equation.

    Distances are Euclidean in jet coordinates; ``singular_points`` must list
    the irregular singularities in the region.
    """
    if (eq.k, eq.m, eq.q) != (1, 1, 1) or params.dim != 3:
        raise ParameterError("place_2_5d needs one first-order scalar equation and a box in (t, u, u')")
    tol = params.manifold_tol

    def offsets(p, t):
        return [_surface_offset(eq, p, t, params.d_sep, sign, tol) for sign in (1.0, -1.0)]

    placer = _Placer(
        _SurfaceTracer(eq, params.h, tol),
        params,
        offsets,
        lambda: surface_probes(eq, params.box, 0.5 * params.d_sep, tol),
    )

    def prepare(p):
        try:
            return _project(eq, p, 1e-2 * tol, 20)
        except NumericError:
            return None

    placer.prepare = prepare
    first = prepare(_default_seed(params)) if params.seed is not None else None
    if first is None:
        probes = surface_probes(eq, params.box, 0.5 * params.d_sep, tol)
        first = next((q for q in probes if placer.admissible(q, params.d_test)), None)
    placer.run(first)
    return _finish(placer)


def depth_attributes(
    portrait: Portrait | Sequence[Streamline], camera, view_direction,
    alpha_range=(1.0, 0.25), width_range=(2.0, 0.5),
) -> list[Streamline]:
    """Per-sample ``(colour, alpha, width)`` affine in normalised view depth.

    Nearest samples get the first entries of the ranges, farthest the second;
    the colour scalar is the normalised depth itself.
    """
    lines = list(portrait)
    cam = np.asarray(camera, dtype=float)
    v = np.asarray(view_direction, dtype=float)
    v = v / np.linalg.norm(v)
    depths = [(s.points - cam) @ v for s in lines]
    if not depths:
        return []
    allv = np.concatenate(depths)
    lo, hi = float(allv.min()), float(allv.max())
    span = hi - lo
    out = []
    for s, d in zip(lines, depths):
        z = (d - lo) / span if span > 1e-12 * max(1.0, abs(hi)) else np.zeros_like(d)
        alpha = alpha_range[0] + (alpha_range[1] - alpha_range[0]) * z
        width = width_range[0] + (width_range[1] - width_range[0]) * z
        out.append(Streamline(s.points, s.end_reasons, np.column_stack([z, alpha, width])))
    return out
