"""Command-line front end: ``vessiot-kit <command> --config run.json``.

The configuration is a JSON document with an ``equation`` entry (path or
inline object) and one section per command; ``--set key=value`` overrides
entries of the command section (values are parsed as JSON when possible).
Outputs are written with a ``.partial`` suffix and renamed only when the
command succeeds.

Exit codes: 0 success, 2 configuration or parse error, 3 numerical failure,
4 violated singularity precondition.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import (
    InputError,
    NumericError,
    ParameterError,
    SingularityError,
    VessiotKitError,
)
from .export import svg_polylines
from .fields import VectorField
from .integrate import IntegratorConfig, StopReason, _project, geometric_solution, integrate_generalized
from .invman import (
    embed_manifold,
    jacobian,
    reduced_field,
    select_center,
    select_stable,
    select_unstable,
    select_values,
    separatrix_seeds,
    split_spectrum,
    taylor_invariant_manifold,
)
from .quasilinear import find_stationary, is_quasilinear, project_field, scan_stationary, trace_stationary_curve
from .streamlines import PlacementParams, Portrait, depth_attributes, place_2_5d, place_2d, place_3d
from .system import EquationSystem, load_equation_file
from .vessiot import classify_point, vessiot_direction, vessiot_field

__all__ = ["main", "load_config"]

log = logging.getLogger("vessiot_kit")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_SINGULAR = 4

COMMANDS = ("check", "classify", "integrate", "invman", "portrait")


# ---------------------------------------------------------------------------
# configuration


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path: str | None, command: str, overrides=(), equation: str | None = None,
                out: str | None = None, seed: int | None = None) -> dict:
    """Merge the config file, its command section and command-line flags (flags win)."""
    doc: dict = {}
    base = Path.cwd()
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"config {path}: {exc}") from None
        base = Path(path).resolve().parent
    if not isinstance(doc, dict):
        raise ParameterError("config must be a JSON object")
    section = dict(doc.get(command, {}))
    for item in overrides:
        if "=" not in item:
            raise ParameterError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        target = section
        parts = key.split(".")
        for part in parts[:-1]:
            target = target.setdefault(part, {})
        target[parts[-1]] = _parse_value(value)
    cfg = {
        "equation": equation if equation is not None else doc.get("equation"),
        "field": doc.get("field"),
        "out": out if out is not None else doc.get("out", "."),
        "seed": seed if seed is not None else int(doc.get("seed", 0)),
        "base": base,
        "section": section,
    }
    return cfg


def _resolve(base: Path, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else base / p


def _equation(cfg) -> EquationSystem:
    spec = cfg["equation"]
    if spec is None:
        raise ParameterError("config has no 'equation'")
    if isinstance(spec, Mapping):
        return load_equation_file(spec)
    path = _resolve(cfg["base"], spec)
    if not path.exists():
        raise ParameterError(f"equation file {path} does not exist")
    return load_equation_file(path)


def _field(cfg, spec=None, scale: float = 1.0) -> VectorField:
    """Field from ``"vessiot"``, ``"projected"`` or an inline ``{variables, components}``."""
    spec = spec if spec is not None else cfg["section"].get("field", cfg.get("field"))
    if spec is None or spec == "vessiot":
        return vessiot_field(_equation(cfg), scale)
    if spec == "projected":
        return project_field(_equation(cfg))
    if isinstance(spec, Mapping):
        return VectorField.from_dict(spec, spec.get("parameters"))
    raise ParameterError(f"unknown field specification {spec!r}")


class _Outputs:
    """Collects output files under ``.partial`` names until ``commit``."""

    def __init__(self, outdir: Path):
        self.dir = outdir
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []

    def path(self, name: str) -> Path:
        final = self.dir / name
        self.files.append(final)
        return final.with_name(final.name + ".partial")

    def write(self, name: str, text: str) -> Path:
        with open(self.path(name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        return self.dir / name

    def commit(self) -> list[Path]:
        for final in self.files:
            os.replace(final.with_name(final.name + ".partial"), final)
        return self.files


def _threads() -> int:
    raw = os.environ.get("VESSIOT_KIT_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ParameterError(f"VESSIOT_KIT_THREADS={raw!r} is not an integer") from None
    if n < 0:
        raise ParameterError("VESSIOT_KIT_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# commands


def cmd_check(cfg, stdout=sys.stdout) -> int:
    eq = _equation(cfg)
    quasi = is_quasilinear(eq)
    print(f"quasi-linear: {str(quasi).lower()}, q={eq.q}, m={eq.m}", file=stdout)
    print(f"equations: k={eq.k}, ambient dimension n={eq.n}", file=stdout)
    for i, F in enumerate(eq.equations):
        label = eq.labels[i] if i < len(eq.labels) else f"F{i + 1}"
        print(f"  {label}: top order {eq.top_order(i)}: {F} = 0", file=stdout)
    return EXIT_OK


def _grid_nodes(eq: EquationSystem, sec) -> tuple[list[np.ndarray], np.ndarray]:
    names = eq.spec.names
    sweep = sec.get("sweep", {})
    fixed = sec.get("fixed", {})
    guess = sec.get("guess", {})
    for key in [*sweep, *fixed, *guess]:
        if key not in names:
            raise ParameterError(f"unknown jet coordinate {key!r}")
    axes = []
    for key, spec in sweep.items():
        if not (isinstance(spec, list) and len(spec) == 3):
            raise ParameterError(f"sweep {key!r} must be [lo, hi, count]")
        axes.append((names.index(key), np.linspace(float(spec[0]), float(spec[1]), int(spec[2]))))
    base = np.array([float(guess.get(v, 1.0)) for v in names])
    for key, value in fixed.items():
        base[names.index(key)] = float(value)
    free = np.ones(len(names), dtype=bool)
    for idx, _ in axes:
        free[idx] = False
    for key in fixed:
        free[names.index(key)] = False
    nodes = []
    for combo in itertools.product(*[vals for _, vals in axes]) if axes else []:
        p = base.copy()
        for (idx, _), v in zip(axes, combo):
            p[idx] = v
        nodes.append(p)
    return nodes, free


def cmd_classify(cfg, stdout=sys.stdout) -> int:
    eq = _equation(cfg)
    sec = cfg["section"]
    tol = float(sec.get("tol", 1e-8))
    ftol = float(sec.get("manifold_tol", 1e-9))
    nodes, free = _grid_nodes(eq, sec)

    def work(p):
        try:
            q = _project(eq, p, ftol, 20, free if free.any() else None)
        except (NumericError, InputError) as exc:
            log.warning("projection failed at %s: %s", p.tolist(), exc)
            return p, "ProjectionFailed", "", ""
        try:
            pc = classify_point(eq, q, tol)
        except NumericError as exc:
            log.warning("classification failed at %s: %s", q.tolist(), exc)
            return q, "Indeterminate", "", ""
        return q, pc.kind.value, pc.rank_full, pc.rank_B

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        rows = list(pool.map(work, nodes))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*eq.spec.names, "class", "rank_full", "rank_B"])
    for q, kind, rf, rb in rows:
        w.writerow([*(repr(float(x)) for x in q), kind, rf, rb])
    out = _Outputs(_resolve(cfg["base"], cfg["out"]))
    out.write("classify.csv", buf.getvalue())
    out.commit()
    counts: dict[str, int] = {}
    for row in rows:
        counts[row[1]] = counts.get(row[1], 0) + 1
    print(json.dumps({"nodes": len(rows), "classes": counts}, sort_keys=True), file=stdout)
    return EXIT_OK


def _padded_region(points: np.ndarray, pad: float = 0.05):
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    return [(float(a - pad * s), float(b + pad * s)) for a, b, s in zip(lo, hi, span)]


def cmd_integrate(cfg, stdout=sys.stdout) -> int:
    eq = _equation(cfg)
    sec = cfg["section"]
    if "start" not in sec:
        raise ParameterError("integrate needs a 'start' point")
    icfg = IntegratorConfig(
        step_size=float(sec.get("step_size", 1e-2)),
        manifold_tol=float(sec.get("manifold_tol", 1e-9)),
        bounds=sec.get("bounds"),
        max_steps=int(sec.get("max_steps", 10_000)),
        singular_points=sec.get("singular_points", []),
        d_s=float(sec.get("d_s", 0.0)),
    )
    start = np.asarray(sec["start"], dtype=float)
    initial = None
    if sec.get("reverse"):
        c = _project(eq, start, icfg.manifold_tol, icfg.projection_max_iter)
        initial = vessiot_direction(eq, c, icfg.rank_tol).reversed()
        start = c
    traj = integrate_generalized(eq, start, initial, icfg)
    out = _Outputs(_resolve(cfg["base"], cfg["out"]))
    traj.to_jsonl(out.path("trajectory.jsonl"))
    traj.to_csv(out.path("trajectory.csv"))
    if sec.get("svg", True):
        geo = geometric_solution(traj)
        out.write("geometric.svg", svg_polylines([geo[:, :2]], _padded_region(geo[:, :2])))
    out.commit()
    print(json.dumps({"samples": len(traj), "stop_reason": traj.stop_reason.value}), file=stdout)
    return {
        StopReason.BOUNDARY: EXIT_OK,
        StopReason.MAX_STEPS: EXIT_OK,
        StopReason.NEAR_SINGULARITY: EXIT_SINGULAR,
        StopReason.NO_CONVERGENCE: EXIT_NUMERIC,
    }[traj.stop_reason]


def _selector(spec):
    if spec in (None, "center", "centre"):
        return select_center()
    if spec == "stable":
        return select_stable()
    if spec == "unstable":
        return select_unstable()
    if isinstance(spec, Mapping) and "values" in spec:
        vals = [complex(v[0], v[1]) if isinstance(v, list) else complex(v) for v in spec["values"]]
        return select_values(vals, float(spec.get("tol", 1e-8)))
    raise ParameterError(f"unknown selector {spec!r}")


def _reduced_params(spec, rng_seed: int, p: int) -> PlacementParams:
    radius = float(spec.get("radius", 0.5))
    return PlacementParams(
        d_sep=float(spec.get("d_sep", 0.1 * radius)),
        d_test=float(spec.get("d_test", 0.05 * radius)),
        h=float(spec.get("h", 0.01 * radius)),
        region=[(-radius, radius)] * p,
        d_s=float(spec.get("d_s", 0.0)),
        seed=spec.get("seed"),
        rng_seed=rng_seed,
    )


def cmd_invman(cfg, stdout=sys.stdout) -> int:
    sec = cfg["section"]
    field = _field(cfg, sec.get("field"), float(sec.get("scale", 1.0)))
    if "point" not in sec:
        raise ParameterError("invman needs a stationary 'point'")
    portrait = sec.get("portrait")
    if portrait:
        _reduced_params(portrait, cfg["seed"], 2)  # validate before any work
    xi = np.asarray(sec["point"], dtype=float)
    if sec.get("refine", True):
        xi = find_stationary(field, xi)
    split = split_spectrum(jacobian(field, xi), _selector(sec.get("selector")))
    model = taylor_invariant_manifold(field, xi, split, int(sec.get("degree", 4)))
    out = _Outputs(_resolve(cfg["base"], cfg["out"]))
    out.write("taylor_model.json", json.dumps(model.to_dict(), sort_keys=True))
    if portrait and model.p == 2:
        params = _reduced_params(portrait, cfg["seed"], 2)
        result = place_2d(reduced_field(model), params)
        embedded = [embed_manifold(model, s.points) for s in result]
        doc = {
            "params": params.to_dict(),
            "reduced": [s.to_dict() for s in result],
            "embedded": [e.tolist() for e in embedded],
        }
        out.write("reduced_portrait.json", json.dumps(doc, sort_keys=True))
        out.write("reduced_portrait.svg", result.to_svg())
    elif portrait:
        log.warning("reduced portrait skipped: selected eigenspace has dimension %d, not 2", model.p)
    out.commit()
    print(
        json.dumps(
            {
                "point": xi.tolist(),
                "dim_E": model.p,
                "degree": model.degree,
                "invariance_residual": model.invariance_residual,
            }
        ),
        file=stdout,
    )
    return EXIT_OK


def _singular_points(cfg, sec, field: VectorField | None) -> list:
    pts = [list(map(float, p)) for p in sec.get("singular_points", [])]
    scan = sec.get("stationary_scan")
    if scan:
        if field is None:
            raise ParameterError("stationary_scan needs a field")
        pts.extend(scan_stationary(field, scan["seeds"]).tolist())
    curve = sec.get("stationary_curve")
    if curve:
        if field is None:
            raise ParameterError("stationary_curve needs a field")
        d = np.asarray(curve["direction"], dtype=float)
        for sign in (1.0, -1.0):
            branch = trace_stationary_curve(
                field,
                curve["start"],
                direction=sign * d,
                step=float(curve.get("step", 1e-2)),
                n_steps=int(curve.get("n_steps", 100)),
                bounds=curve.get("bounds", sec.get("region")),
            )
            pts.extend(branch.tolist())
    return pts


def cmd_portrait(cfg, stdout=sys.stdout) -> int:
    sec = cfg["section"]
    mode = sec.get("mode", "2d")
    if mode not in ("2d", "2.5d", "3d"):
        raise ParameterError(f"mode must be 2d, 2.5d or 3d, not {mode!r}")
    eq = _equation(cfg) if mode == "2.5d" else None
    field = None if mode == "2.5d" else _field(cfg, sec.get("field"), float(sec.get("scale", 1.0)))
    if mode == "2.5d":
        sep_field = vessiot_field(eq, 0.5) if eq.k == eq.m else None
    else:
        sep_field = field
    singular = _singular_points(cfg, sec, sep_field)
    seeds = [list(map(float, s)) for s in sec.get("seeds", [])]
    offset = sec.get("separatrix_offset")
    if offset and sep_field is not None:
        for p in sec.get("saddles", []):
            J = jacobian(sep_field, p)
            seeds.extend(s.tolist() for s in separatrix_seeds(J, p, float(offset), eq))
    try:
        params = PlacementParams(
            d_sep=float(sec["d_sep"]),
            d_test=float(sec["d_test"]),
            h=float(sec["h"]),
            region=sec["region"],
            d_s=float(sec.get("d_s", 0.0)),
            seed=sec.get("seed"),
            singular_points=singular,
            rng_seed=cfg["seed"],
            sample_spacing=sec.get("sample_spacing"),
            max_samples=int(sec.get("max_samples", 100_000)),
            manifold_tol=float(sec.get("manifold_tol", 1e-9)),
            seeds=seeds,
            fill=bool(sec.get("fill", True)),
        )
    except KeyError as exc:
        raise ParameterError(f"portrait needs {exc.args[0]!r}") from None
    if mode == "2d":
        result = place_2d(field, params)
    elif mode == "3d":
        result = place_3d(field, params)
    else:
        result = place_2_5d(eq, params)
    out = _Outputs(_resolve(cfg["base"], cfg["out"]))
    if mode == "3d":
        box = params.box
        centre = box.mean(axis=1)
        extent = float(np.linalg.norm(box[:, 1] - box[:, 0]))
        cam = sec.get("camera", {})
        view = np.asarray(cam.get("view_direction", [-1.0, -1.0, -1.0]), dtype=float)
        position = np.asarray(cam.get("position", centre - extent * view / np.linalg.norm(view)), dtype=float)
        result = Portrait(depth_attributes(result, position, view), params, result.stats)
    out.write("streamlines.json", result.to_json())
    if mode in ("2d", "2.5d"):
        out.write("streamlines.svg", result.to_svg())
    out.commit()
    print(json.dumps(result.stats, sort_keys=True), file=stdout)
    return EXIT_OK


_DISPATCH = {
    "check": cmd_check,
    "classify": cmd_classify,
    "integrate": cmd_integrate,
    "invman": cmd_invman,
    "portrait": cmd_portrait,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vessiot-kit", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--equation", help="equation file (overrides the config entry)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="PRNG seed for seed selection")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override an entry of the command section")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None, stdout=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    stdout = stdout or sys.stdout
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.command, args.overrides, args.equation, args.out, args.seed)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return _DISPATCH[args.command](cfg, stdout=stdout)
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SingularityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except (NumericError, VessiotKitError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
