"""Stable/unstable intersections, contact classification and the tangency hunter.

Intersections are found by a segment-pair sweep over two traced polylines and
refined by Newton's method on ``psi_u(zu) - psi_s(zs) = 0`` using the charts
themselves.  A near-zero angle triggers the curvature test: an order-2
contact has equal tangents and different curvatures.

The hunter follows one lens (two crossings bounding a region with no other
crossing on either arc) from the transverse end of a parameter bracket,
bisects on the number of crossings left in it (2 while the lens exists, 0
after it has closed) and finishes with Newton in ``(zu, zs, a)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import BadBracket, DegenerateContact, FoldTrackingLost, RefinementFailure
from .manifold import STABLE, UNSTABLE, ArcSample, StepControl, _sign_fix, local_chart, trace, trace_interval
from .map_core import PolyDiffeo, henon
from .parallel import worker_count
from .periodic import PeriodicPoint, find_fixed_points

ANGLE_EPS = 1e-4
KAPPA_MIN = 1e-3
MERGE_TOL = 1e-8
SOLVE_TOL = 1e-9
NEWTON_SWITCH = 1e-4

TRANSVERSE = "transverse"
CANDIDATE = "tangency-candidate"


@dataclass
class IntersectionEvent:
    point: tuple[float, float]
    zeta_u: float
    zeta_s: float
    angle: float
    kind: str
    residual: float = 0.0
    refined: bool = True
    sign: int = 0

    def to_dict(self) -> dict:
        return {
            "type": self.kind,
            "x": self.point[0],
            "y": self.point[1],
            "zeta_u": self.zeta_u,
            "zeta_s": self.zeta_s,
            "angle": self.angle,
            "refined": self.refined,
        }


@dataclass
class TangencyEvent:
    intersection: IntersectionEvent
    curvature_u: float
    curvature_s: float
    contact_order: int = 2
    parameter: tuple[float, float] | None = None
    meta: dict = field(default_factory=dict)

    @property
    def curvature_gap(self) -> float:
        return abs(self.curvature_u - self.curvature_s)

    def to_dict(self) -> dict:
        d = self.intersection.to_dict()
        d.update(type="tangency", kappa_u=self.curvature_u, kappa_s=self.curvature_s,
                 a=None, b=None)
        if self.parameter is not None:
            d["a"], d["b"] = self.parameter
        return d


def to_json_lines(events: Sequence) -> str:
    """One JSON object per event: type, x, y, zeta_u, zeta_s, angle, kappa_u, kappa_s, a, b."""
    lines = []
    for evt in events:
        d = evt.to_dict()
        row = {k: d.get(k) for k in ("type", "x", "y", "zeta_u", "zeta_s", "angle", "kappa_u", "kappa_s", "a", "b")}
        lines.append(json.dumps(row, sort_keys=False))
    return "".join(line + "\n" for line in lines)


# -- geometry -----------------------------------------------------------------

def _cross(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def line_angle(u, v) -> float:
    """Unsigned angle between the lines spanned by ``u`` and ``v`` (in ``[0, pi/2]``)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    c = abs(float(_cross(u, v)))
    d = abs(float(np.dot(u, v)))
    return math.atan2(c, d)


def signed_curvature(d1, d2) -> float:
    """``(u'v'' - v'u'') / (u'^2 + v'^2)^(3/2)``."""
    (u1, v1), (u2, v2) = d1, d2
    return float((u1 * v2 - v1 * u2) / (u1 * u1 + v1 * v1) ** 1.5)


def _in_window(P, window):
    if window is None:
        return np.ones(P.shape[0], dtype=bool)
    x0, y0, x1, y1 = window
    return (P[:, 0] >= x0) & (P[:, 0] <= x1) & (P[:, 1] >= y0) & (P[:, 1] <= y1)


def _segments(arc: ArcSample, window, zeta_range=None):
    P = arc.points
    A, B = P[:-1], P[1:]
    keep = np.isfinite(A).all(1) & np.isfinite(B).all(1)
    if window is not None:
        x0, y0, x1, y1 = window
        lo, hi = np.minimum(A, B), np.maximum(A, B)
        keep &= (hi[:, 0] >= x0) & (lo[:, 0] <= x1) & (hi[:, 1] >= y0) & (lo[:, 1] <= y1)
    if zeta_range is not None:
        z = arc.params
        keep &= (z[:-1] >= zeta_range[0]) & (z[1:] <= zeta_range[1])
    return np.flatnonzero(keep)


def segment_crossings(P: np.ndarray, Q: np.ndarray, iu=None, js=None):
    """All crossings of polylines ``P`` and ``Q``.

    Segments are half-open (start vertex included, end vertex excluded) so a
    crossing exactly at a shared vertex is counted once.  Returns arrays
    ``(i, j, t, s)`` with the crossing at ``P[i] + t (P[i+1]-P[i])``.
    """
    iu = np.arange(P.shape[0] - 1) if iu is None else np.asarray(iu)
    js = np.arange(Q.shape[0] - 1) if js is None else np.asarray(js)
    empty = (np.zeros(0, int), np.zeros(0, int), np.zeros(0), np.zeros(0))
    if iu.size == 0 or js.size == 0:
        return empty
    A, B = P[iu], P[iu + 1]
    C, D = Q[js], Q[js + 1]
    mid_q = 0.5 * (C + D)
    half_q = 0.5 * np.linalg.norm(D - C, axis=1)
    tree = cKDTree(mid_q)
    mid_p = 0.5 * (A + B)
    radius = 0.5 * np.linalg.norm(B - A, axis=1) + half_q.max() + 1e-12
    cand = tree.query_ball_point(mid_p, radius, workers=worker_count())
    ii = np.repeat(np.arange(iu.size), [len(c) for c in cand])
    if ii.size == 0:
        return empty
    jj = np.concatenate([np.asarray(c, dtype=int) for c in cand])
    r = B[ii] - A[ii]
    q = D[jj] - C[jj]
    w = C[jj] - A[ii]
    den = _cross(r, q)
    ok = den != 0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(ok, _cross(w, q) / den, -1.0)
        s = np.where(ok, _cross(w, r) / den, -1.0)
    hit = ok & (t >= 0) & (t < 1) & (s >= 0) & (s < 1)
    order = np.lexsort((jj[hit], ii[hit]))
    return iu[ii[hit]][order], js[jj[hit]][order], t[hit][order], s[hit][order]


# -- refinement -----------------------------------------------------------------

def _jet1(chart, z):
    (x, y), (dx, dy) = chart.jet(np.array([z], dtype=float), 1)
    return np.array([x[0], y[0]]), np.array([dx[0], dy[0]])


def refine_pair(chart_u, chart_s, zu: float, zs: float, iters: int = 40, tol: float = SOLVE_TOL):
    """Newton on ``psi_u(zu) - psi_s(zs) = 0``; returns ``(zu, zs, residual, ok)``."""
    best = (zu, zs, math.inf)
    for _ in range(iters):
        pu, du = _jet1(chart_u, zu)
        ps, ds = _jet1(chart_s, zs)
        F = pu - ps
        res = float(np.linalg.norm(F))
        if res < best[2]:
            best = (zu, zs, res)
        if res < 1e-14 * max(1.0, float(np.abs(pu).max())):
            break
        J = np.column_stack([du, -ds])
        try:
            dz = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(dz)):
            break
        zu, zs = zu + float(dz[0]), zs + float(dz[1])
    zu, zs, res = best
    return zu, zs, res, res < tol


def intersections(arc_u: ArcSample, arc_s: ArcSample, window=None, angle_eps: float = ANGLE_EPS,
                  zeta_range_u=None, zeta_range_s=None, refine: bool = True) -> list[IntersectionEvent]:
    """Refined crossings of two traces inside ``window``.

    Candidates whose Newton refinement fails are kept with ``refined=False``
    (kind ``tangency-candidate`` when the polyline angle is small).
    """
    iu = _segments(arc_u, window, zeta_range_u)
    js = _segments(arc_s, window, zeta_range_s)
    I, J, T, S = segment_crossings(arc_u.points, arc_s.points, iu, js)
    events: list[IntersectionEvent] = []
    for i, j, t, s in zip(I, J, T, S):
        zu = arc_u.params[i] + t * (arc_u.params[i + 1] - arc_u.params[i])
        zs = arc_s.params[j] + s * (arc_s.params[j + 1] - arc_s.params[j])
        seg_u = arc_u.points[i + 1] - arc_u.points[i]
        seg_s = arc_s.points[j + 1] - arc_s.points[j]
        sign = int(np.sign(_cross(seg_u, seg_s)))
        ok = False
        res = math.nan
        if refine:
            zu2, zs2, res, ok = refine_pair(arc_u.chart, arc_s.chart, zu, zs)
            # Newton may only polish, never jump to a different crossing
            span_u = abs(arc_u.params[i + 1] - arc_u.params[i])
            span_s = abs(arc_s.params[j + 1] - arc_s.params[j])
            if ok and abs(zu2 - zu) <= 2 * span_u + 1e-12 and abs(zs2 - zs) <= 2 * span_s + 1e-12:
                zu, zs = zu2, zs2
            else:
                ok = False
        pu, du = _jet1(arc_u.chart, zu)
        _, ds = _jet1(arc_s.chart, zs)
        angle = line_angle(du, ds) if ok else line_angle(seg_u, seg_s)
        kind = TRANSVERSE if angle >= angle_eps else CANDIDATE
        point = (float(pu[0]), float(pu[1])) if ok else tuple(float(v) for v in arc_u.points[i] + t * seg_u)
        events.append(IntersectionEvent(point, float(zu), float(zs), angle, kind, float(res), ok, sign))
    return _merge(events)


def near_contacts(arc_u: ArcSample, arc_s: ArcSample, window=None, dist_tol: float = 1e-7,
                  angle_max: float = 0.05) -> list[IntersectionEvent]:
    """Closest approaches of the two traces that are (nearly) tangential contacts.

    At a tangency parameter computed to finite precision the two crossings
    of a closing lens may already have merged or not yet appeared in floating
    point, so the crossing sweep can miss the contact.  Here every pair of
    nearly parallel vertices closer than a few sample steps is polished to a
    local minimum of ``|psi_u(zu) - psi_s(zs)|``; minima below ``dist_tol``
    are returned as tangency candidates.
    """
    P, Q = arc_u.points, arc_s.points
    ok_u = np.flatnonzero(_in_window(P, window) & np.isfinite(P).all(1))
    ok_s = np.flatnonzero(_in_window(Q, window) & np.isfinite(Q).all(1))
    if ok_u.size == 0 or ok_s.size == 0:
        return []
    reach = 2 * max(np.linalg.norm(np.diff(P[ok_u], axis=0), axis=1).max(initial=0.0),
                    np.linalg.norm(np.diff(Q[ok_s], axis=0), axis=1).max(initial=0.0))
    dist, idx = cKDTree(Q[ok_s]).query(P[ok_u], distance_upper_bound=reach, workers=worker_count())
    near = np.isfinite(dist)
    # local minima of the distance along the unstable trace
    cand = []
    for k in np.flatnonzero(near):
        left = dist[k - 1] if k > 0 else math.inf
        right = dist[k + 1] if k + 1 < dist.size else math.inf
        if dist[k] <= left and dist[k] <= right:
            i, j = ok_u[k], ok_s[idx[k]]
            if line_angle(arc_u.derivs[i], arc_s.derivs[j]) < angle_max:
                cand.append((i, j))
    out = []
    for i, j in cand:
        zu, zs = float(arc_u.params[i]), float(arc_s.params[j])
        for _ in range(60):
            (pu, du, ddu) = (np.array([v[0][0], v[1][0]]) for v in arc_u.chart.jet(np.array([zu]), 2))
            (ps, ds, dds) = (np.array([v[0][0], v[1][0]]) for v in arc_s.chart.jet(np.array([zs]), 2))
            r = pu - ps
            grad = np.array([r @ du, -(r @ ds)])
            H = np.array([[du @ du + r @ ddu, -(du @ ds)], [-(du @ ds), ds @ ds - r @ dds]])
            try:
                step = np.linalg.solve(H, -grad)
            except np.linalg.LinAlgError:
                break
            zu, zs = zu + step[0], zs + step[1]
            if np.abs(step).max() < 1e-15 * max(1.0, abs(zu), abs(zs)):
                break
        pu, du = _jet1(arc_u.chart, zu)
        ps, ds = _jet1(arc_s.chart, zs)
        gap = float(np.linalg.norm(pu - ps))
        if gap < dist_tol:
            out.append(IntersectionEvent((float(pu[0]), float(pu[1])), zu, zs, line_angle(du, ds),
                                         CANDIDATE, gap, True))
    return _merge(out)


def _merge(events, tol=MERGE_TOL):
    out: list[IntersectionEvent] = []
    for evt in sorted(events, key=lambda e: (e.zeta_u, e.zeta_s)):
        if out and abs(evt.zeta_u - out[-1].zeta_u) < tol and abs(evt.zeta_s - out[-1].zeta_s) < tol:
            continue
        if out and math.dist(evt.point, out[-1].point) < tol and evt.refined and out[-1].refined:
            continue
        out.append(evt)
    return out


# -- contact classification ------------------------------------------------------

def classify_contact(evt: IntersectionEvent, arcs, angle_eps: float = ANGLE_EPS,
                     kappa_min: float = KAPPA_MIN):
    """``"transverse"`` or a :class:`TangencyEvent`.

    ``arcs`` is a pair of curves (charts, or anything with ``jet(z, 2)``)
    evaluated at ``evt.zeta_u`` and ``evt.zeta_s``.  Curvatures are signed with
    respect to a common orientation of the shared tangent line, so the test is
    symmetric in the two arcs.
    """
    cu, cs = (a.chart if isinstance(a, ArcSample) else a for a in arcs)
    _, du, ddu = cu.jet(np.array([evt.zeta_u], dtype=float), 2)
    _, ds, dds = cs.jet(np.array([evt.zeta_s], dtype=float), 2)
    du = (float(du[0][0]), float(du[1][0]))
    ds = (float(ds[0][0]), float(ds[1][0]))
    ddu = (float(ddu[0][0]), float(ddu[1][0]))
    dds = (float(dds[0][0]), float(dds[1][0]))
    angle = line_angle(du, ds)
    if angle >= angle_eps:
        return TRANSVERSE
    ku = signed_curvature(du, ddu)
    ks = signed_curvature(ds, dds)
    if du[0] * ds[0] + du[1] * ds[1] < 0:
        ks = -ks  # reversing a parametrization flips the signed curvature
    gap = abs(ku - ks)
    tevt = TangencyEvent(evt, ku, ks)
    if gap <= kappa_min:
        raise DegenerateContact(tevt, gap)
    return tevt


# -- the hunter --------------------------------------------------------------------

def non_flipping_fixed_point(f: PolyDiffeo) -> PeriodicPoint:
    pts = [p for p in find_fixed_points(f, 1) if p.least_period == 1 and p.flip_class == "non-flipping"]
    if len(pts) != 1:
        raise FoldTrackingLost(f"expected one non-flipping fixed point, found {len(pts)}")
    return pts[0]


def raw_charts(f: PolyDiffeo, saddle: PeriodicPoint | None = None, saddle_s: PeriodicPoint | None = None):
    """Unnormalized unstable/stable charts (unit eigenvector, fixed sign).

    These depend smoothly on the map, which the finite-difference Newton step
    in parameter space needs.
    """
    p = saddle or non_flipping_fixed_point(f)
    q = saddle_s or p
    return _sign_fix(local_chart(f, p, UNSTABLE)), _sign_fix(local_chart(f, q, STABLE))


@dataclass
class Lens:
    """Two crossings bounding a lens, in log coordinates ``tau = log|zeta| / log|mu|``.

    Positions of features along a manifold scale like ``mu**k`` with the
    fundamental-domain index ``k``, so ``tau`` barely moves when the map
    changes while the raw ``zeta`` can drift by large factors.
    """

    sign_u: int
    sign_s: int
    tau_u: tuple[float, float]
    tau_s: tuple[float, float]
    pad_u: float
    pad_s: float

    def range_u(self, chart):
        return _zeta_range(chart, self.sign_u, self.tau_u, self.pad_u)

    def range_s(self, chart):
        return _zeta_range(chart, self.sign_s, self.tau_s, self.pad_s)

    def recentered(self, events, charts) -> "Lens":
        tu = sorted(_tau(e.zeta_u, charts[0]) for e in events)
        ts = sorted(_tau(e.zeta_s, charts[1]) for e in events)
        return Lens(self.sign_u, self.sign_s, tuple(tu), tuple(ts), self.pad_u, self.pad_s)


def _tau(z, chart):
    return math.log(abs(z)) / math.log(abs(chart.mu))


def _zeta_range(chart, sign, tau, pad):
    m = abs(chart.mu)
    lo, hi = sign * m ** (tau[0] - pad), sign * m ** (tau[1] + pad)
    return (min(lo, hi), max(lo, hi))


@dataclass
class HuntResult:
    event: TangencyEvent
    a_star: float
    b: float
    bracket: tuple[float, float]
    widths: list[float]
    newton_steps: int
    residual: float
    error_estimate: float


def _arc_inside(arc, z1, z2, window):
    lo, hi = min(z1, z2), max(z1, z2)
    sel = (arc.params >= lo) & (arc.params <= hi)
    return bool(np.all(_in_window(arc.points[sel], window)))


def find_lenses(events: list[IntersectionEvent], charts, min_sep: float = 0.0, arcs=None,
                window=None) -> list[Lens]:
    """Pairs of crossings adjacent along both traces (no other crossing between).

    With ``arcs`` and ``window`` given, both connecting arcs must stay inside
    the window, otherwise the pair only looks adjacent because the traces
    between them were clipped.  Sorted by increasing ``zeta_u`` separation.
    """
    ev = [e for e in events if e.zeta_u != 0.0 and e.zeta_s != 0.0]
    by_u = sorted(range(len(ev)), key=lambda k: ev[k].zeta_u)
    by_s = sorted(range(len(ev)), key=lambda k: ev[k].zeta_s)
    rank_s = {k: r for r, k in enumerate(by_s)}
    found = []
    for a, b in zip(by_u[:-1], by_u[1:]):
        if abs(rank_s[a] - rank_s[b]) != 1:
            continue
        e1, e2 = ev[a], ev[b]
        if np.sign(e1.zeta_u) != np.sign(e2.zeta_u) or np.sign(e1.zeta_s) != np.sign(e2.zeta_s):
            continue
        if math.dist(e1.point, e2.point) < min_sep:
            continue
        if arcs is not None and not (_arc_inside(arcs[0], e1.zeta_u, e2.zeta_u, window)
                                     and _arc_inside(arcs[1], e1.zeta_s, e2.zeta_s, window)):
            continue
        tu = sorted(_tau(e.zeta_u, charts[0]) for e in (e1, e2))
        ts = sorted(_tau(e.zeta_s, charts[1]) for e in (e1, e2))
        lens = Lens(int(np.sign(e1.zeta_u)), int(np.sign(e1.zeta_s)), tuple(tu), tuple(ts),
                    tu[1] - tu[0], ts[1] - ts[0])
        found.append((abs(e1.zeta_u - e2.zeta_u), lens))
    found.sort(key=lambda item: item[0])
    return [lens for _, lens in found]


def _lens_events(f, lens: Lens, step: StepControl, saddle_sel, check_interior: bool = False):
    cu, cs = raw_charts(f, *saddle_sel(f))
    au = trace_interval(cu, *lens.range_u(cu), step=step)
    as_ = trace_interval(cs, *lens.range_s(cs), step=step)
    events = [e for e in intersections(au, as_) if e.refined or e.kind == CANDIDATE]
    if check_interior and not events:
        # an empty lens only counts if the two arcs are closest away from the
        # ends of the tracked intervals; otherwise the fold has slipped out
        dist, idx = cKDTree(as_.points).query(au.points)
        i = int(np.argmin(dist))
        j = int(idx[i])
        edge_u = min(i, au.params.size - 1 - i) < 0.02 * au.params.size
        edge_s = min(j, as_.params.size - 1 - j) < 0.02 * as_.params.size
        if edge_u or edge_s:
            raise FoldTrackingLost("closest approach of the tracked arcs is at the edge of the lens window")
    return events, (cu, cs)


def _default_selector(f):
    p = non_flipping_fixed_point(f)
    return p, p


def _tangency_residual(family, a, zu, zs, saddle_sel):
    cu, cs = raw_charts(family(a), *saddle_sel(family(a)))
    pu, du, ddu = (np.array([v[0][0], v[1][0]]) for v in cu.jet(np.array([zu]), 2))
    ps, ds, dds = (np.array([v[0][0], v[1][0]]) for v in cs.jet(np.array([zs]), 2))
    F = np.array([pu[0] - ps[0], pu[1] - ps[1], float(_cross(du, ds))])
    return F, (du, ds, ddu, dds)


def hunt_boundary(b: float, a_lo: float, a_hi: float,
                  family: Callable[[float], PolyDiffeo] | None = None,
                  saddle_selector=None, window=None, zeta_max: float = 2000.0,
                  newton_switch: float = NEWTON_SWITCH, step: StepControl | None = None,
                  max_newton: int = 20, progress=None) -> HuntResult:
    """Locate the parameter where a lens at the transverse end ``a_hi`` closes.

    ``family(a)`` defaults to the Henon map ``henon(a, b)``; ``saddle_selector``
    maps a map to ``(unstable saddle, stable saddle)`` and defaults to the
    non-flipping fixed point twice (the homoclinic case).  The tracked lens is
    the one with smallest ``zeta_u`` separation among lenses inside ``window``
    at ``a_hi``.
    """
    family = family or (lambda a: henon(a, b))
    sel = saddle_selector or _default_selector
    ctl = step or StepControl()
    say = progress or (lambda msg: None)

    f_hi = family(a_hi)
    cu, cs = raw_charts(f_hi, *sel(f_hi))
    if window is None:
        from .greens import filtration_radius
        R = filtration_radius(f_hi).R
        window = (-R, -R, R, R)
    au = trace(cu, zeta_max, ctl, window=window)
    as_ = trace(cs, zeta_max, ctl, window=window)
    events = [e for e in intersections(au, as_, window) if e.refined]
    lenses = find_lenses(events, (cu, cs), min_sep=10 * ctl.max_step, arcs=(au, as_), window=window)
    if not lenses:
        raise BadBracket(f"no lens of crossings at a_hi = {a_hi}")
    lens = lenses[0]
    say(f"tracking lens tau_u in {lens.tau_u}, tau_s in {lens.tau_s}")

    def count(a, check=True):
        return _lens_events(family(a), lens, ctl, sel, check_interior=check)

    if len(count(a_hi)[0]) != 2:
        raise BadBracket(f"lens at a_hi = {a_hi} does not hold exactly 2 crossings")
    try:
        n_lo = len(count(a_lo)[0])
    except FoldTrackingLost:
        n_lo = 0  # far below the boundary the fold has moved away entirely
    if n_lo != 0:
        raise BadBracket(f"lens at a_lo = {a_lo} still holds crossings")

    lo, hi = a_lo, a_hi
    widths = [hi - lo]
    while hi - lo > newton_switch:
        mid = 0.5 * (lo + hi)
        evs, charts = count(mid)
        say(f"a = {mid:.10f}: {len(evs)} crossing(s) in lens")
        if len(evs) == 2:
            hi = mid
            lens = lens.recentered(evs, charts)
        elif len(evs) == 0:
            lo = mid
        elif len(evs) == 1:
            # the pair has merged below the crossing resolution: mid sits on the fold
            say(f"a = {mid:.10f}: crossings merged, switching to Newton")
            hi = mid
            widths.append(hi - lo)
            break
        else:
            raise FoldTrackingLost(f"{len(evs)} crossings in the tracked lens at a = {mid}")
        widths.append(hi - lo)

    # Newton in (zeta_u, zeta_s, a) from the midpoint of the lens
    a = 0.5 * (lo + hi)
    cu, cs = raw_charts(family(a), *sel(family(a)))
    zu = 0.5 * sum(lens.range_u(cu))
    zs = 0.5 * sum(lens.range_s(cs))
    h = 1e-7
    steps = 0
    F = None
    for steps in range(1, max_newton + 1):
        F, (du, ds, ddu, dds) = _tangency_residual(family, a, zu, zs, sel)
        Fp, _ = _tangency_residual(family, a + h, zu, zs, sel)
        Fm, _ = _tangency_residual(family, a - h, zu, zs, sel)
        J = np.zeros((3, 3))
        J[:2, 0] = du
        J[:2, 1] = -ds
        J[2, 0] = float(_cross(ddu, ds))
        J[2, 1] = float(_cross(du, dds))
        J[:, 2] = (Fp - Fm) / (2 * h)
        delta = np.linalg.solve(J, -F)
        zu, zs, a = zu + delta[0], zs + delta[1], a + delta[2]
        if abs(delta[2]) < 1e-13 and np.linalg.norm(F) < 1e-12:
            break
    F, _ = _tangency_residual(family, a, zu, zs, sel)
    res = float(np.linalg.norm(F))
    if not (res < SOLVE_TOL and lo - newton_switch <= a <= hi + newton_switch):
        raise RefinementFailure(f"tangency Newton did not converge (residual {res:.3g}, a = {a})")

    f_star = family(a)
    cu, cs = raw_charts(f_star, *sel(f_star))
    pu, du = _jet1(cu, zu)
    _, ds = _jet1(cs, zs)
    evt = IntersectionEvent((float(pu[0]), float(pu[1])), float(zu), float(zs), line_angle(du, ds),
                            CANDIDATE, res, True)
    tev = classify_contact(evt, (cu, cs))
    if tev == TRANSVERSE:
        raise RefinementFailure("converged point is not tangential")
    tev.parameter = (float(a), float(b))
    # the only error left is the Newton residual propagated through the a-column
    err = float(abs(np.linalg.solve(J, F)[2])) if np.all(np.isfinite(J)) else math.nan
    return HuntResult(tev, float(a), float(b), (lo, hi), widths, steps, res, err)
