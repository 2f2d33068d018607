import json
from collections import deque

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import brentq

from saddlescope import henon
from saddlescope.maxent_verify import (FAIL, INCONCLUSIVE, PASS, CheckResult, VerdictReport,
                                       cantor_check, component_diameters, maxent_check,
                                       one_sided_check, tangency_search, ulam_derivative,
                                       ulam_oracle, ulam_periodic_points, verify)


def ulam_iterate(x, n):
    for _ in range(n):
        x = 2 - x * x
    return x


def sign_change_roots(n):
    """Independent oracle: roots of f^n(x) - x by sign changes on a fine grid plus brentq."""
    g = lambda x: ulam_iterate(x, n) - x
    # roots crowd at the ends of [-2, 2]; a grid uniform in arccos spreads them
    # out, and the irrational offset keeps nodes off the algebraic roots
    th = np.linspace(0, np.pi, 64 * 2 ** n + 1)[1:] - np.sqrt(2) * 1e-7
    xs = -2 * np.cos(th)
    vals = g(xs)
    roots = [-2.0]  # g(-2) = 0 exactly and g > 0 just to the right (slope 4^n - 1)
    for k in np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:])):
        roots.append(brentq(g, xs[k], xs[k + 1], xtol=1e-15))
    return np.array(roots)


@pytest.mark.parametrize("n", range(1, 9))
def test_ulam_points_match_sign_change_oracle(n):
    ours = ulam_periodic_points(n)
    ref = sign_change_roots(n)
    assert ours.size == ref.size == 2 ** n
    assert np.allclose(np.sort(ref), ours, atol=1e-9)


@pytest.mark.parametrize("n", range(1, 9))
def test_ulam_multipliers(n):
    for x in ulam_periodic_points(n):
        expect = 4.0 ** n if abs(x + 2) < 1e-12 else 2.0 ** n
        assert abs(ulam_derivative(x, n)) == pytest.approx(expect, rel=1e-9)


def test_ulam_check_passes():
    assert ulam_oracle(8).status == PASS


def flood_fill_components(mask):
    """Plain BFS with 8-neighbours; returns lists of (row, col) cells."""
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for start in zip(*np.nonzero(mask)):
        if seen[start]:
            continue
        seen[start] = True
        queue, cells = deque([start]), []
        while queue:
            i, j = queue.popleft()
            cells.append((i, j))
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    a, b = i + di, j + dj
                    if 0 <= a < mask.shape[0] and 0 <= b < mask.shape[1] and mask[a, b] and not seen[a, b]:
                        seen[a, b] = True
                        queue.append((a, b))
        comps.append(cells)
    return comps


@given(arrays(bool, (12, 12), elements=st.booleans()))
def test_components_match_flood_fill(mask):
    labels, diam = component_diameters(mask, cell=0.5)
    comps = flood_fill_components(mask)
    assert diam.size == len(comps)
    ref = []
    for cells in comps:
        c = np.array(cells, float)
        d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(-1)).max()
        ref.append(0.5 * d)
    assert np.allclose(sorted(diam), sorted(ref))


def test_cantor_at_horseshoe(f6):
    fixed = [(3.5096, 3.5096), (-1.7096, -1.7096)]
    res = cantor_check(f6, markers=fixed)
    assert res.status == PASS
    d = [r["max_diameter"] for r in res.evidence["levels"]]
    assert all(b < a for a, b in zip(d, d[1:]))
    assert res.evidence["levels"][-1]["max_diameter_cells"] < 10
    a, b = res.evidence["marker_components"]
    assert a > 0 and b > 0 and a != b


def test_maxent_check(f6):
    assert maxent_check(f6, 6).status == PASS
    bad = maxent_check(henon(0.5, 0.8), 4)
    assert bad.status == FAIL and bad.witness["n"] == 2


def test_one_sided_check(f6):
    res = one_sided_check(f6)
    assert res.status == PASS
    assert res.evidence["doubly_one_sided"] == [pytest.approx((3.5096, 3.5096), abs=1e-4)]


def test_tangency_search_hyperbolic(f6):
    res = tangency_search(f6)
    assert res.status == PASS
    assert res.evidence["tangencies"] == []
    assert res.evidence["intersections"] >= 2


def test_report_exit_codes_and_json():
    def rep(*statuses):
        checks = {f"c{k}": CheckResult(f"c{k}", s) for k, s in enumerate(statuses)}
        return VerdictReport("family=henon\n", checks, "x")
    assert rep(PASS, PASS).exit_code == 0
    assert rep(PASS, FAIL, INCONCLUSIVE).exit_code == 1
    assert rep(PASS, INCONCLUSIVE).exit_code == 2
    r = rep(PASS, FAIL)
    assert json.loads(r.to_json())["overall"] == FAIL
    assert r.to_json() == rep(PASS, FAIL).to_json()


def test_verify_fails_outside_maximal_entropy():
    report = verify(henon(0.5, 0.8), n_max=4)
    assert report.exit_code == 1
    assert report.label == "not maximal entropy"
    assert report.checks["maxent"].witness["error"] == "ComplexPeriodicPoint"


def test_one_sided_pattern_orientation_reversing():
    res = one_sided_check(henon(6.0, -0.5))
    assert res.status == PASS
    fixed = [r for r in res.evidence["table"] if r["least_period"] == 1]
    u = [r for r in fixed if r["unstable"].startswith("one-sided")]
    s = [r for r in fixed if r["stable"].startswith("one-sided")]
    assert len(u) == len(s) == 1 and u[0]["point"] != s[0]["point"]
