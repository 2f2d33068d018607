"""SVG scenes of manifold traces, K-grids and markers.

World coordinates are y-up; SVG is y-down.  A window ``(x0, y0, x1, y1)``
drawn at ``width x height`` pixels uses the single affine map

    sx = (x - x0) * width / (x1 - x0)
    sy = (y1 - y) * height / (y1 - y0)

and the same transform is written into each file's header comment.
"""

from __future__ import annotations

import warnings
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

import numpy as np

from . import __version__

STYLE = {
    "unstable": {"stroke": "#c0392b", "stroke-width": "1", "fill": "none"},
    "stable": {"stroke": "#2461a8", "stroke-width": "1", "fill": "none"},
    "grid": {"fill": "#9a9a9a", "stroke": "none"},
    "saddle": {"fill": "#000000", "stroke": "none"},
    "tangency": {"stroke": "#1e8449", "stroke-width": "2", "fill": "none"},
}


class EmptySceneWarning(UserWarning):
    """No layer of the scene intersects the window."""


def _clip_segment(p, q, window):
    """Liang-Barsky: parameters ``(t0, t1)`` of the visible part, or None."""
    x0, y0, x1, y1 = window
    dx, dy = q[0] - p[0], q[1] - p[1]
    t0, t1 = 0.0, 1.0
    for num, den in ((p[0] - x0, -dx), (x1 - p[0], dx), (p[1] - y0, -dy), (y1 - p[1], dy)):
        if den == 0:
            if num < 0:
                return None
            continue
        with np.errstate(over="ignore"):
            t = num / den
        if den < 0:
            t0 = max(t0, t)
        else:
            t1 = min(t1, t)
        if t0 > t1:
            return None
    return t0, t1


def clip_polyline(points, window) -> list[np.ndarray]:
    """Split a polyline into the pieces inside ``window``.

    Vertices inside the window are kept; segments leaving or entering it are
    cut at the boundary.  Non-finite vertices break the line.
    """
    P = np.asarray(points, dtype=float)
    pieces: list[list] = []
    cur: list = []

    def flush():
        nonlocal cur
        if len(cur) >= 2:
            pieces.append(np.array(cur))
        cur = []

    for k in range(len(P) - 1):
        p, q = P[k], P[k + 1]
        if not (np.isfinite(p).all() and np.isfinite(q).all()):
            flush()
            continue
        span = _clip_segment(p, q, window)
        if span is None:
            flush()
            continue
        t0, t1 = span
        # endpoints inside the window are kept bit-for-bit
        a = p if t0 == 0.0 else p + t0 * (q - p)
        b = q if t1 == 1.0 else p + t1 * (q - p)
        if not cur or not np.array_equal(cur[-1], a):
            flush()
            cur.append(a)
        cur.append(b)
        if t1 < 1.0:
            flush()
    flush()
    return pieces


@dataclass
class SvgScene:
    window: tuple[float, float, float, float]
    width: int = 800
    grid: list[tuple[float, float, float, float]] = field(default_factory=list)
    stable: list[np.ndarray] = field(default_factory=list)
    unstable: list[np.ndarray] = field(default_factory=list)
    saddles: list[tuple[float, float]] = field(default_factory=list)
    tangencies: list[tuple[float, float]] = field(default_factory=list)

    @property
    def height(self) -> int:
        x0, y0, x1, y1 = self.window
        return max(1, int(round(self.width * (y1 - y0) / (x1 - x0))))

    def to_screen(self, x, y):
        x0, y0, x1, y1 = self.window
        sx = (np.asarray(x) - x0) * self.width / (x1 - x0)
        sy = (y1 - np.asarray(y)) * self.height / (y1 - y0)
        return sx, sy

    def inside(self, pt) -> bool:
        x0, y0, x1, y1 = self.window
        return x0 <= pt[0] <= x1 and y0 <= pt[1] <= y1

    def is_empty(self) -> bool:
        return not (self.grid or self.stable or self.unstable
                    or any(map(self.inside, self.saddles)) or any(map(self.inside, self.tangencies)))

    def to_svg(self) -> str:
        x0, y0, x1, y1 = self.window
        w, h = self.width, self.height
        root = ET.Element("svg", {
            "xmlns": "http://www.w3.org/2000/svg",
            "width": str(w), "height": str(h), "viewBox": f"0 0 {w} {h}",
        })
        root.append(ET.Comment(f" saddlescope {__version__} "))
        root.append(ET.Comment(
            f" world window ({x0!r}, {y0!r}, {x1!r}, {y1!r}); "
            f"sx = (x - {x0!r}) * {w} / {x1 - x0!r}; sy = ({y1!r} - y) * {h} / {y1 - y0!r} "))
        ET.SubElement(root, "rect", {"x": "0", "y": "0", "width": str(w), "height": str(h), "fill": "#ffffff"})

        g = ET.SubElement(root, "g", {"id": "k-grid", **STYLE["grid"]})
        for (ax, ay, bx, by) in self.grid:
            sx0, sy1 = self.to_screen(ax, ay)
            sx1, sy0 = self.to_screen(bx, by)
            ET.SubElement(g, "rect", {"x": _f(sx0), "y": _f(sy0), "width": _f(sx1 - sx0), "height": _f(sy1 - sy0)})

        for role in ("stable", "unstable"):
            g = ET.SubElement(root, "g", {"id": role, **STYLE[role]})
            for piece in getattr(self, role):
                sx, sy = self.to_screen(piece[:, 0], piece[:, 1])
                pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in zip(sx, sy))
                ET.SubElement(g, "polyline", {"points": pts})

        g = ET.SubElement(root, "g", {"id": "saddles", **STYLE["saddle"]})
        for pt in filter(self.inside, self.saddles):
            sx, sy = self.to_screen(*pt)
            ET.SubElement(g, "circle", {"cx": _f(sx), "cy": _f(sy), "r": "4"})

        g = ET.SubElement(root, "g", {"id": "tangencies", **STYLE["tangency"]})
        for pt in filter(self.inside, self.tangencies):
            sx, sy = self.to_screen(*pt)
            d = f"M{_f(sx - 6)},{_f(sy - 6)} L{_f(sx + 6)},{_f(sy + 6)} M{_f(sx - 6)},{_f(sy + 6)} L{_f(sx + 6)},{_f(sy - 6)}"
            ET.SubElement(g, "path", {"class": "cross", "d": d})

        ET.indent(root)
        return ET.tostring(root, encoding="unicode", xml_declaration=False) + "\n"


def _f(v) -> str:
    s = f"{float(v):.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def grid_rects(field_, mask=None):
    """Merge horizontal runs of K cells into world-coordinate rectangles."""
    mask = field_.k_mask if mask is None else mask
    x0, y0, _, _ = field_.rect
    hx, hy = field_.cell_size
    rects = []
    for i, row in enumerate(mask):
        edges = np.flatnonzero(np.diff(np.r_[0, row.astype(np.int8), 0]))
        for a, b in zip(edges[::2], edges[1::2]):
            rects.append((x0 + a * hx, y0 + i * hy, x0 + b * hx, y0 + (i + 1) * hy))
    return rects


def render_scene(arcs=(), events=(), grid=None, window=(0.0, 0.0, 1.0, 1.0), saddles=(), width: int = 800) -> SvgScene:
    """Build a clipped scene.

    ``arcs`` are ArcSample objects (their chart kind picks the layer) or
    ``(kind, points)`` pairs; ``events`` are tangency events or points.
    """
    scene = SvgScene(tuple(float(v) for v in window), width)
    for arc in arcs:
        if isinstance(arc, tuple):
            kind, pts = arc
        else:
            kind, pts = arc.chart.kind, arc.points
        getattr(scene, kind).extend(clip_polyline(pts, scene.window))
    if grid is not None:
        x0, y0, x1, y1 = scene.window
        for r in grid_rects(grid):
            c = (max(r[0], x0), max(r[1], y0), min(r[2], x1), min(r[3], y1))
            if c[0] < c[2] and c[1] < c[3]:
                scene.grid.append(c)
    scene.saddles.extend(tuple(map(float, p)) for p in saddles)
    for e in events:
        pt = getattr(getattr(e, "intersection", e), "point", e)
        scene.tangencies.append((float(pt[0]), float(pt[1])))
    if scene.is_empty():
        warnings.warn("no layer intersects the window", EmptySceneWarning, stacklevel=2)
    return scene
