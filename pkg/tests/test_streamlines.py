from __future__ import annotations

import json

import numpy as np
import pytest

from vessiot_kit.errors import EmptyResultError, ParameterError
from vessiot_kit.fields import VectorField
from vessiot_kit.streamlines import (
    PlacementParams,
    SpatialIndex,
    depth_attributes,
    hexagon_offsets,
    place_2_5d,
    place_2d,
    place_3d,
    probe_lattice,
    surface_probes,
)

from portrait_checks import inspect

UNIFORM = VectorField.from_strings(["x", "y"], ["1", "0"])
ROTATION = VectorField.from_strings(["x", "y"], ["-y", "x"])


def test_param_validation():
    base = dict(d_sep=0.1, d_test=0.05, h=0.01, region=[(0, 1), (0, 1)])
    PlacementParams(**base)
    for bad in (dict(d_test=0.1), dict(d_test=0.0), dict(h=0.06), dict(d_s=-1), dict(region=[(0, 0), (0, 1)]),
                dict(sample_spacing=0.001)):
        with pytest.raises(ParameterError):
            PlacementParams(**{**base, **bad})


def test_spatial_index():
    idx = SpatialIndex(0.1, 2)
    for p in [(0.0, 0.0), (0.05, 0.0), (0.5, 0.5)]:
        idx.insert(p)
    assert idx.within((0.01, 0.0), 0.06) == [0, 1]
    assert idx.any_within((0.45, 0.5), 0.06)
    assert not idx.any_within((0.3, 0.3), 0.1)
    assert idx.nearest((0.0, 0.3), 0.5) == pytest.approx(0.3)
    assert idx.nearest((0.0, 0.3), 0.2) == np.inf


def test_probe_lattice_covers_corners():
    pts = probe_lattice([(0, 1), (0, 0.25)], 0.1)
    assert pts.shape == (11 * 3, 2)
    assert pts[:, 0].max() == 1.0 and pts[:, 1].max() == 0.2


def test_hexagon_offsets_are_normal():
    t = np.array([1.0, 2.0, 2.0]) / 3
    pts = hexagon_offsets([0, 0, 0], t, 0.2)
    assert len(pts) == 6
    for q in pts:
        assert np.linalg.norm(q) == pytest.approx(0.2)
        assert abs(q @ t) < 1e-14


def test_uniform_field_packs_parallel_lines():
    p = PlacementParams(d_sep=0.1, d_test=0.05, h=0.01, region=[(0, 1), (0, 1)], seed=(0.5, 0.5))
    port = place_2d(UNIFORM, p)
    heights = sorted({round(float(s.points[0, 1]), 9) for s in port})
    assert heights == pytest.approx(np.linspace(0, 1, 11).tolist())
    for s in port:
        assert np.ptp(s.points[:, 1]) < 1e-12
        assert s.end_reasons == ("boundary", "boundary")
    rep = inspect(port, p, probe_lattice(p.box, 0.05))
    assert rep.separation_violations == 0 and rep.uncovered_probes == 0


def test_rotation_excludes_centre():
    p = PlacementParams(d_sep=0.1, d_test=0.05, h=0.01, region=[(-1, 1), (-1, 1)], d_s=0.1,
                        singular_points=[(0, 0)], seed=(0.5, 0))
    port = place_2d(ROTATION, p)
    rep = inspect(port, p, probe_lattice(p.box, 0.05))
    assert rep.separation_violations == 0 and rep.uncovered_probes == 0
    assert rep.singular_distance >= 0.1


def test_closed_orbits_stop_on_themselves():
    p = PlacementParams(d_sep=0.2, d_test=0.1, h=0.01, region=[(-1, 1), (-1, 1)], seed=(0.5, 0), fill=False)
    port = place_2d(ROTATION, p)
    first = port[0]
    # the circle closes up: the two halves meet on the far side
    assert first.end_reasons == ("separation", "separation")
    radii = np.linalg.norm(first.points, axis=1)
    assert np.ptp(radii) < 1e-9


def test_determinism_and_seed_sensitivity():
    field = VectorField.from_strings(["x", "y"], ["1 + y", "sin(3*x)"])
    kw = dict(d_sep=0.1, d_test=0.05, h=0.01, region=[(0, 1), (0, 1)])
    a = place_2d(field, PlacementParams(**kw, rng_seed=3)).to_json()
    b = place_2d(field, PlacementParams(**kw, rng_seed=3)).to_json()
    c = place_2d(field, PlacementParams(**kw, rng_seed=4)).to_json()
    assert a == b
    assert a != c


def test_volume_portrait():
    field = VectorField.from_strings(["x", "y", "z"], ["1", "0", "0"])
    p = PlacementParams(d_sep=0.2, d_test=0.1, h=0.02, region=[(0, 1)] * 3, seed=(0.5, 0.5, 0.5))
    port = place_3d(field, p)
    rep = inspect(port, p, probe_lattice(p.box, 0.1))
    assert rep.separation_violations == 0 and rep.uncovered_probes == 0
    lines = depth_attributes(port, camera=[-1, 0.5, 0.5], view_direction=[1, 0, 0])
    attrs = np.vstack([s.attributes for s in lines])
    assert attrs[:, 0].min() == 0 and attrs[:, 0].max() == 1
    assert np.allclose(attrs[:, 1], 1 - 0.75 * attrs[:, 0])
    assert np.allclose(attrs[:, 2], 2 - 1.5 * attrs[:, 0])
    # depth only depends on x here, so it grows along every line
    assert all(np.all(np.diff(s.attributes[:, 0]) > 0) for s in lines if len(s) > 1)


def test_surface_probes_lie_on_sphere(sphere_eq):
    pts = surface_probes(sphere_eq, [(-1.1, 1.1)] * 3, 0.2)
    assert len(pts) > 50
    assert np.max(np.abs(sphere_eq.residual_many(pts))) < 1e-10


def test_sphere_portrait_is_small_and_on_surface(sphere_eq):
    p = PlacementParams(d_sep=0.3, d_test=0.15, h=0.02, region=[(-1.1, 1.1)] * 3, d_s=0.1,
                        singular_points=[(0, 1, 0), (0, -1, 0)], seed=(0.6, 0, 0.8))
    port = place_2_5d(sphere_eq, p)
    pts = port.all_points()
    assert np.max(np.abs(sphere_eq.residual_many(pts))) <= 1e-9
    rep = inspect(port, p, surface_probes(sphere_eq, p.box, 0.15))
    assert rep.separation_violations == 0 and rep.uncovered_probes == 0
    assert rep.singular_distance >= 0.1


def test_bad_inputs(sphere_eq, impasse_eq):
    p = PlacementParams(d_sep=0.1, d_test=0.05, h=0.01, region=[(0, 1), (0, 1)], seed=(2, 2))
    with pytest.raises(EmptyResultError):
        place_2d(UNIFORM, p)
    with pytest.raises(ParameterError):
        place_3d(UNIFORM, p)
    with pytest.raises(ParameterError):
        place_2_5d(impasse_eq, PlacementParams(d_sep=0.1, d_test=0.05, h=0.01, region=[(0, 1)] * 3))


def test_exports(tmp_path):
    p = PlacementParams(d_sep=0.25, d_test=0.1, h=0.05, region=[(0, 1), (0, 1)], seed=(0.5, 0.5),
                        singular_points=[(0.9, 0.9)])
    port = place_2d(UNIFORM, p)
    doc = json.loads(port.to_json(tmp_path / "p.json"))
    assert set(doc) == {"params", "streamlines"}
    assert doc["params"]["d_sep"] == 0.25
    svg = port.to_svg(tmp_path / "p.svg")
    assert svg.count("<polyline") == len(port)
    assert 'viewBox="0 -1 1 1"' in svg and "<circle" in svg
