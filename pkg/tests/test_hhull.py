from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resetsg.hhull import (
    HHull,
    certify_inclusion,
    contains,
    gap_metric,
    geodesic_midpoint,
    hhull,
    hull_svg,
    lift,
    load_hull,
    save_hull,
)
from resetsg.region import EXTERIOR, INTERIOR, DiscConstraint, RegionSG

coord = st.floats(-3.0, 3.0, allow_nan=False, allow_infinity=False)
point = st.builds(complex, coord, coord)
point_sets = st.lists(point, min_size=1, max_size=25)
PROPERTY = settings(max_examples=100, deadline=None)


def _convex_combos(h: HHull, rng, count=20):
    """Random points inside the hull, built in the lifted plane."""
    w = rng.dirichlet(np.ones(len(h.lifted)), count) @ h.lifted
    return w[:, 0] + 1j * np.sqrt(np.maximum(w[:, 1] - w[:, 0] ** 2, 0.0))


def test_lift_examples():
    np.testing.assert_allclose(lift(1j), [0.0, 1.0])
    np.testing.assert_allclose(lift(1 + 1j), [1.0, 2.0])
    np.testing.assert_allclose(lift(0.81), [0.81, 0.6561])
    np.testing.assert_allclose(lift(1 - 1j), lift(1 + 1j))


def test_vertical_segment():
    h = hhull([1j, 2j])
    assert len(h.edges) == 1 and h.edges[0].kind == "vertical"
    assert contains(h, 1.5j)
    assert contains(h, -1.5j)
    assert not contains(h, 1 + 1j)
    assert not contains(h, 2.5j)


def test_single_arc():
    h = hhull([1j, 1 + 1j])
    (e,) = h.edges
    assert e.kind == "arc"
    # equidistant centre on the real axis: c^2 + 1 = (1 - c)^2 + 1
    assert e.center == pytest.approx(0.5, abs=1e-12)
    assert e.radius == pytest.approx(math.sqrt(1.25), abs=1e-12)
    assert abs(1j - e.center) == pytest.approx(abs(1 + 1j - e.center), abs=1e-12)
    m = geodesic_midpoint(1j, 1 + 1j)
    assert abs(m - e.center) == pytest.approx(e.radius, abs=1e-12)
    assert contains(h, m)
    # the straight chord lies below the arc, so it is outside the hull
    assert not contains(h, 0.5 + 1j)


def test_triangle_edges_are_real_centred_arcs():
    pts = [0.5 + 1j, 2 + 0.5j, 1.2 + 2j]
    h = hhull(pts)
    assert len(h.vertices) == 3 and len(h.edges) == 3
    for e in h.edges:
        assert e.kind == "arc"
        assert abs(e.start - e.center) == pytest.approx(e.radius, abs=1e-12)
        assert abs(e.end - e.center) == pytest.approx(e.radius, abs=1e-12)
        for z in e.points(10):
            assert abs(z - e.center) == pytest.approx(e.radius, abs=1e-9)
    assert contains(h, (0.5 + 1j + 2 + 0.5j + 1.2 + 2j) / 3)


def test_singleton_and_duplicates():
    h = hhull([1 + 1j, 1 + 1j, 1 - 1j])
    assert len(h) == 1 and h.edges == []
    assert contains(h, 1 + 1j) and contains(h, 1 - 1j)
    assert not contains(h, 1 + 1.01j)


def test_real_axis_samples():
    h = hhull([0.2, 0.81])
    assert len(h) == 2 and h.lifted_area == 0.0
    # the geodesic joining two real points is a semicircle; its top is in the hull
    assert contains(h, geodesic_midpoint(0.2, 0.81))
    assert contains(h, 0.81)
    assert not contains(h, 0.5)
    tri = hhull([0.81, 0.5 + 0.5j, 1 + 0.3j])
    assert contains(tri, 0.81)


def test_near_duplicates_merged():
    h = hhull([0j, 1j, 1e-124 + 0j])
    assert len(h) == 2
    assert contains(h, 0.5j)


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        hhull([1j, complex(math.nan, 0)])


@PROPERTY
@given(point_sets)
def test_idempotence(pts):
    h = hhull(pts)
    again = hhull(h.vertices)
    assert len(again) == len(h)
    key = lambda a: a[np.lexsort((a[:, 1], a[:, 0]))]
    np.testing.assert_allclose(key(again.lifted), key(h.lifted), atol=1e-9)


@PROPERTY
@given(point_sets, point_sets, st.integers(0, 2**31 - 1))
def test_monotonicity(s, extra, seed):
    hs, ht = hhull(s), hhull(s + extra)
    assert np.all(contains(ht, hs.vertices))
    if len(hs) >= 3:
        assert np.all(contains(ht, _convex_combos(hs, np.random.default_rng(seed))))


@PROPERTY
@given(point_sets)
def test_containment(pts):
    assert np.all(contains(hhull(pts), np.array(pts)))


@PROPERTY
@given(point_sets, st.lists(point, min_size=1, max_size=20))
def test_conjugate_symmetry(pts, probes):
    h = hhull(pts)
    z = np.array(probes)
    np.testing.assert_array_equal(contains(h, z), contains(h, z.conjugate()))


@PROPERTY
@given(st.floats(-5.0, 5.0), st.floats(0.05, 5.0), st.floats(0.01, math.pi - 0.01), st.floats(0.01, math.pi - 0.01))
def test_lift_collinearity(c, r, a0, a1):
    phi = np.linspace(a0, a1, 10)
    w = lift(c + r * np.exp(1j * phi))
    line = 2 * c * w[:, 0] + (r * r - c * c)
    assert np.max(np.abs(w[:, 1] - line)) <= 1e-9 * (1 + c * c + r * r)


def test_certificate_examples():
    unit = RegionSG((DiscConstraint(INTERIOR, 0.0, 1.0),))
    cert = certify_inclusion([0.5], unit, slack=0.0)
    assert cert.verdict and cert.margins[0] == pytest.approx(0.5)
    cert = certify_inclusion([2.0], unit, slack=0.0)
    assert not cert.verdict and cert.violating == [0]
    with pytest.raises(ValueError):
        certify_inclusion([], unit)


def test_certificate_spot_checks():
    rng = np.random.default_rng(3)
    reg = RegionSG((DiscConstraint(INTERIOR, 0.5, 1.0), DiscConstraint(EXTERIOR, -1.0, 0.5)))
    z = 0.5 + 0.9 * np.exp(1j * rng.uniform(0, math.pi, 50)) * rng.uniform(0, 1, 50)
    z = z[reg.contains(z)]
    cert = certify_inclusion(z, reg, slack=0.0)
    assert cert.verdict and cert.spot_checks == 256 and cert.spot_failures == 0
    cert = certify_inclusion(z, reg.scaled(0.5), slack=0.0)
    assert not cert.verdict


def test_gap_metric_examples():
    window = (-1.0, 2.0, -1.5, 1.5)
    disc = RegionSG((DiscConstraint(INTERIOR, 0.5, 1.0),))
    # a real-centred disc is h-convex, so a dense fill of it hulls back to the disc
    xs, ys = np.meshgrid(np.linspace(-0.5, 1.5, 201), np.linspace(0.0, 1.0, 101))
    fill = (xs + 1j * ys).ravel()
    fill = fill[disc.contains(fill)]
    assert gap_metric(hhull(fill), disc, window, 401) >= 0.99
    annulus = RegionSG((DiscConstraint(INTERIOR, 0.5, 1.0), DiscConstraint(EXTERIOR, 0.5, 0.5)))
    assert gap_metric(hhull([0.5 + 0.75j]), annulus, window, 401) <= 1e-3
    empty = RegionSG((DiscConstraint(INTERIOR, 0.51, 0.0),))
    with pytest.raises(ValueError):
        gap_metric(hhull([1j]), empty, window, 101)


def test_json_round_trip(tmp_path):
    h = hhull([0.5 + 1j, 2 + 0.5j, 1.2 + 2j, 0.3])
    save_hull(h, tmp_path / "h.json", {"config_hash": "abc"})
    data = json.loads((tmp_path / "h.json").read_text())
    assert data["config_hash"] == "abc" and len(data["edges"]) == len(h.edges)
    back = load_hull(tmp_path / "h.json")
    np.testing.assert_array_equal(back.lifted, h.lifted)
    np.testing.assert_allclose(back.vertices, h.vertices)


def test_svg_export():
    text = hull_svg(hhull([0.5 + 1j, 2 + 0.5j, 1.2 + 2j]), (-1, 3, -3, 3)).to_string()
    assert "<svg" in text and "path" in text


def test_nearly_collinear_vertex_kept_inside():
    pts = [0j, 3j, 1e-5j, -0.5 + 0j]
    assert np.all(contains(hhull(pts), np.array(pts)))
