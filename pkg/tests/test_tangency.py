import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from saddlescope import henon
from saddlescope.errors import BadBracket, DegenerateContact
from saddlescope.manifold import StepControl, trace
from saddlescope.tangency import (ANGLE_EPS, TRANSVERSE, IntersectionEvent, TangencyEvent,
                                  classify_contact, hunt_boundary, intersections, near_contacts,
                                  raw_charts, signed_curvature, to_json_lines)

from conftest import A_STAR


class Curve:
    """Analytic curve ``t -> base + t*e1 + c(t)*e2`` for classify_contact."""

    def __init__(self, c, angle=0.0, base=(0.0, 0.0), speed=1.0):
        self.c = c  # coefficients of c(t) = c0 + c1 t + c2 t^2 + c3 t^3
        self.rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
        self.base = np.asarray(base, float)
        self.speed = speed

    def jet(self, z, nderiv=2):
        t = self.speed * np.asarray(z, float)
        c0, c1, c2, c3 = self.c
        h = c0 + c1 * t + c2 * t ** 2 + c3 * t ** 3
        dh = self.speed * (c1 + 2 * c2 * t + 3 * c3 * t ** 2)
        ddh = self.speed ** 2 * (2 * c2 + 6 * c3 * t)
        local = [(t, h), (np.full_like(t, self.speed), dh), (np.zeros_like(t), ddh)]
        out = []
        for k, (u, v) in enumerate(local[: nderiv + 1]):
            shift = self.base if k == 0 else 0.0
            vec = self.rot @ np.vstack([u, v])
            out.append((vec[0] + (shift[0] if k == 0 else 0.0), vec[1] + (shift[1] if k == 0 else 0.0)))
        return out


def event_at_origin():
    return IntersectionEvent((0.0, 0.0), 0.0, 0.0, 0.0, "candidate", 0.0, True)


def test_parabolas_curvature_gap():
    out = classify_contact(event_at_origin(), (Curve((0, 0, 1, 0)), Curve((0, 0, 2, 0))))
    assert isinstance(out, TangencyEvent)
    assert out.curvature_u == pytest.approx(2.0)
    assert out.curvature_s == pytest.approx(4.0)
    assert out.curvature_gap == pytest.approx(2.0)


def test_transverse_lines():
    out = classify_contact(event_at_origin(), (Curve((0, 0, 0, 0)), Curve((0, 0.5, 0, 0))))
    assert out == TRANSVERSE


def test_same_curvature_is_degenerate():
    with pytest.raises(DegenerateContact) as err:
        classify_contact(event_at_origin(), (Curve((0, 0, 1, 0)), Curve((0, 0, 1, 5))))
    assert err.value.curvature_gap < 1e-12


def test_reversed_parametrization_keeps_gap():
    a = Curve((0, 0, 1, 0))
    b = Curve((0, 0, 2, 0), speed=-3.0)
    assert classify_contact(event_at_origin(), (a, b)).curvature_gap == pytest.approx(2.0)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 2 * math.pi), st.floats(0.2, 5),
       st.sampled_from([-1.0, 1.0]))
def test_classify_symmetric(k1, k2, angle, speed, flip):
    a = Curve((0, 0, k1, 0), angle)
    b = Curve((0, 0, k2, 0.7), angle, speed=flip * speed)
    e = event_at_origin()
    try:
        ab = classify_contact(e, (a, b))
    except DegenerateContact:
        with pytest.raises(DegenerateContact):
            classify_contact(e, (b, a))
        assert abs(k1 - k2) * 2 <= 1e-3 + 1e-9
        return
    ba = classify_contact(e, (b, a))
    assert ab.curvature_gap == pytest.approx(ba.curvature_gap, rel=1e-12, abs=1e-12)
    assert ab.curvature_gap == pytest.approx(2 * abs(k1 - k2), rel=1e-9, abs=1e-12)


def test_signed_curvature_circle():
    # unit-speed circle of radius r, counterclockwise
    r, t = 2.5, 0.7
    d1 = (-math.sin(t), math.cos(t))
    d2 = (-math.cos(t) / r, -math.sin(t) / r)
    assert signed_curvature(d1, d2) == pytest.approx(1 / r)


# -- crossings of the manifold traces ------------------------------------------------

def brute_force_crossings(P, Q, window):
    """All proper segment crossings inside ``window`` by exhaustive pair tests."""
    A, B = P[:-1], P[1:]
    C, D = Q[:-1], Q[1:]
    found = []
    r = D - C
    for lo in range(0, len(A), 400):
        a, b = A[lo:lo + 400, None, :], B[lo:lo + 400, None, :]
        s = b - a
        den = s[..., 0] * r[None, :, 1] - s[..., 1] * r[None, :, 0]
        qa = C[None] - a
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (qa[..., 0] * r[None, :, 1] - qa[..., 1] * r[None, :, 0]) / den
            u = (qa[..., 0] * s[..., 1] - qa[..., 1] * s[..., 0]) / den
        hit = (t >= 0) & (t < 1) & (u >= 0) & (u < 1)
        for i, j in zip(*np.nonzero(hit)):
            x = a[i, 0] + t[i, j] * s[i, 0]
            if window[0] <= x[0] <= window[2] and window[1] <= x[1] <= window[3]:
                found.append(x)
    return np.array(found)


@pytest.fixture(scope="module")
def arcs6(f6):
    cu, cs = raw_charts(f6)
    w = (-3.0, -3.0, 0.5, 0.5)
    return cu, cs, w, trace(cu, 2000.0, window=w), trace(cs, 2000.0, window=w)


def test_crossing_count_matches_brute_force(arcs6):
    cu, cs, w, au, as_ = arcs6
    events = intersections(au, as_, w)
    fine = StepControl(max_step=1e-3)
    bu, bs = trace(cu, 2000.0, fine, window=w), trace(cs, 2000.0, fine, window=w)
    ref = brute_force_crossings(bu.points, bs.points, w)
    assert len(events) == len(ref) >= 1
    got = np.array([e.point for e in events])
    for x in ref:
        assert np.min(np.linalg.norm(got - x, axis=1)) < 1e-3


def test_crossings_refined_onto_both_charts(arcs6):
    cu, cs, w, au, as_ = arcs6
    for e in intersections(au, as_, w):
        assert e.refined and e.kind == TRANSVERSE and e.angle > ANGLE_EPS
        pu = np.array(cu(np.array([e.zeta_u]))).ravel()
        ps = np.array(cs(np.array([e.zeta_s]))).ravel()
        assert np.linalg.norm(pu - ps) < 1e-9
        assert np.allclose(pu, e.point, atol=1e-9)


def test_saddle_is_an_intersection(f6, gev6):
    R = gev6.filtration.R
    w = (-R, -R, R, R)
    cu, cs = raw_charts(f6)
    events = intersections(trace(cu, 2000.0, window=w), trace(cs, 2000.0, window=w), w)
    at_p = [e for e in events if e.zeta_u == 0.0 and e.zeta_s == 0.0]
    assert len(at_p) == 1
    assert np.allclose(at_p[0].point, cu.saddle.point)
    others = [e for e in events if e not in at_p]
    assert others and all(e.kind == TRANSVERSE for e in others)


def test_no_contacts_at_horseshoe(f6, gev6):
    R = gev6.filtration.R
    w = (-R, -R, R, R)
    cu, cs = raw_charts(f6)
    au, as_ = trace(cu, 2000.0, window=w), trace(cs, 2000.0, window=w)
    assert near_contacts(au, as_, w) == []


def test_boundary_contacts_are_isolated_tangencies():
    f = henon(A_STAR, 0.8)
    R = 3.97
    w = (-R, -R, R, R)
    cu, cs = raw_charts(f)
    au, as_ = trace(cu, 2000.0, window=w), trace(cs, 2000.0, window=w)
    # at the published parameter the lens is open or closed by ~1e-5, so use
    # the figure-scale contact distance
    contacts = near_contacts(au, as_, w, dist_tol=1e-3)
    assert len(contacts) == 2
    for e in contacts:
        t = classify_contact(e, (cu, cs))
        assert t != TRANSVERSE and t.curvature_gap > 1e-3
    # a tangency and its image are separated by a fundamental domain, far beyond 1e-4
    zu = sorted(abs(e.zeta_u) for e in contacts)
    assert zu[1] - zu[0] > 1e-4


def test_bad_bracket():
    with pytest.raises(BadBracket):
        hunt_boundary(0.8, 5.0, 6.0)


def test_hunt_bracket_where_bisection_hits_the_fold():
    # with a_hi = 5 the bisection lands 1.5e-5 above the boundary, where the pair merges
    res = hunt_boundary(0.8, 4.5, 5.0)
    assert abs(res.a_star - 4.643478711361086) < 1e-9


def test_json_lines_fields():
    e = IntersectionEvent((1.0, 2.0), 0.5, -0.25, 1e-9, "candidate", 0.0, True)
    t = TangencyEvent(e, 0.1, 2.0, parameter=(4.6, 0.8))
    row = json.loads(to_json_lines([t]))
    assert list(row) == ["type", "x", "y", "zeta_u", "zeta_s", "angle", "kappa_u", "kappa_s", "a", "b"]
    assert row["type"] == "tangency" and row["a"] == 4.6
