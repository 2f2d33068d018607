import warnings
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from saddlescope import henon
from saddlescope.greens import classify_grid
from saddlescope.manifold import trace
from saddlescope.render import EmptySceneWarning, SvgScene, clip_polyline, grid_rects, render_scene
from saddlescope.tangency import near_contacts, raw_charts

from conftest import A_STAR

NS = "{http://www.w3.org/2000/svg}"
WINDOW = (-1.0, -0.5, 2.0, 1.5)

pts = st.lists(st.tuples(st.floats(-3, 4), st.floats(-3, 4)), min_size=2, max_size=30)


def inside(p, w, tol=1e-9):
    return w[0] - tol <= p[0] <= w[2] + tol and w[1] - tol <= p[1] <= w[3] + tol


def on_segment(x, a, b, tol=1e-9):
    ab, ax = b - a, x - a
    cross = abs(ab[0] * ax[1] - ab[1] * ax[0])
    t = np.dot(ax, ab) / max(np.dot(ab, ab), 1e-300)
    return cross <= tol * (1 + np.linalg.norm(ab)) and -tol <= t <= 1 + tol


@given(pts)
def test_clip_output_inside_window(points):
    for piece in clip_polyline(points, WINDOW):
        assert len(piece) >= 2
        assert all(inside(p, WINDOW) for p in piece)


@given(pts)
def test_clip_keeps_interior_vertices(points):
    P = np.array(points)
    pieces = clip_polyline(P, WINDOW)
    kept = np.vstack(pieces) if pieces else np.empty((0, 2))
    for k, p in enumerate(P):
        strict = WINDOW[0] < p[0] < WINDOW[2] and WINDOW[1] < p[1] < WINDOW[3]
        has_neighbour = len(P) > 1
        if strict and has_neighbour:
            assert np.any(np.all(kept == p, axis=1))


@given(pts)
def test_clip_points_lie_on_input(points):
    P = np.array(points)
    for piece in clip_polyline(P, WINDOW):
        for x in piece:
            assert any(on_segment(x, P[k], P[k + 1]) for k in range(len(P) - 1))


def test_clip_splits_at_boundary():
    pieces = clip_polyline([(-2, 0), (0, 0), (3, 0)], WINDOW)
    assert len(pieces) == 1
    assert np.allclose(pieces[0], [(-1, 0), (0, 0), (2, 0)])
    pieces = clip_polyline([(0, 0), (0, 3), (1, 3), (1, 0)], WINDOW)
    assert len(pieces) == 2


def test_transform_corners():
    s = SvgScene(WINDOW, width=300)
    assert s.height == 200
    assert s.to_screen(-1.0, 1.5) == pytest.approx((0.0, 0.0))
    assert s.to_screen(2.0, -0.5) == pytest.approx((300.0, 200.0))


def test_empty_scene_is_valid_svg():
    with pytest.warns(EmptySceneWarning):
        scene = render_scene(window=WINDOW)
    root = ET.fromstring(scene.to_svg())
    assert root.tag == NS + "svg"
    assert len(root.findall(f".//{NS}rect")) == 1
    assert not root.findall(f".//{NS}polyline")


def test_markers_outside_window_are_dropped():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptySceneWarning)
        scene = render_scene(window=WINDOW, saddles=[(10.0, 10.0)], events=[(0.5, 0.5)])
    root = ET.fromstring(scene.to_svg())
    assert not root.findall(f".//{NS}circle")
    assert len(root.findall(f".//{NS}path")) == 1


def test_grid_rects_cover_mask(f6):
    g = classify_grid(f6, (-4, -4, 4, 4), 32)
    area = sum((r[2] - r[0]) * (r[3] - r[1]) for r in grid_rects(g))
    hx, hy = g.cell_size
    assert area == pytest.approx(g.k_mask.sum() * hx * hy)


def figure(a, grid=False):
    f = henon(a, 0.8)
    w = (-3.9, -3.9, 3.9, 3.9)
    cu, cs = raw_charts(f)
    au, as_ = trace(cu, 2000.0, window=w), trace(cs, 2000.0, window=w)
    events = near_contacts(au, as_, w, dist_tol=1e-3)
    field_ = classify_grid(f, w, 64) if grid else None
    return render_scene([au, as_], events, field_, w, saddles=[cu.saddle.point])


def test_figure_horseshoe():
    root = ET.fromstring(figure(6.0, grid=True).to_svg())
    groups = {g.get("id"): g for g in root.findall(f"{NS}g")}
    assert groups["stable"].findall(f"{NS}polyline") and groups["unstable"].findall(f"{NS}polyline")
    assert len(groups["saddles"].findall(f"{NS}circle")) == 1
    assert not groups["tangencies"].findall(f"{NS}path")
    assert groups["k-grid"].findall(f"{NS}rect")
    for pl in root.iter(NS + "polyline"):
        xy = np.array([p.split(",") for p in pl.get("points").split()], float)
        assert xy.min() >= 0 and xy[:, 0].max() <= 800 and xy[:, 1].max() <= 800


def test_figure_boundary_has_tangency_marker():
    root = ET.fromstring(figure(A_STAR).to_svg())
    crosses = [p for p in root.iter(NS + "path") if p.get("class") == "cross"]
    assert len(crosses) >= 1
