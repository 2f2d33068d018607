"""The nine acceptance criteria at their stated tolerances.

Each test is tagged ``acceptance(n, title)``; the terminal summary prints one
PASS/FAIL line per criterion.
"""

import time

import numpy as np
import pytest

from saddlescope import cli, henon
from saddlescope.greens import GreenEvaluator
from saddlescope.manifold import STABLE, UNSTABLE, build_chart, circle_max, one_sided_test, trace
from saddlescope.maxent_verify import PASS, cantor_check, maxent_check, tangency_search, ulam_oracle
from saddlescope.periodic import check_bounds, find_fixed_points
from saddlescope.tangency import classify_contact, hunt_boundary, non_flipping_fixed_point, raw_charts

from conftest import A_STAR, quadratic_fixed_points, quadratic_multipliers

PUBLISHED_A = A_STAR


def note(request, text):
    request.node.acceptance_detail = text


@pytest.fixture(scope="module")
def census6():
    t = time.perf_counter()
    f = henon(6.0, 0.8)
    pts = {n: find_fixed_points(f, n) for n in range(1, 11)}
    return pts, time.perf_counter() - t


@pytest.fixture(scope="module")
def hunt():
    t = time.perf_counter()
    res = hunt_boundary(0.8, 4.0, 6.0)
    return res, time.perf_counter() - t


@pytest.mark.acceptance(1, "Ulam-von Neumann oracle")
def test_criterion_1_ulam(request):
    t = time.perf_counter()
    res = ulam_oracle(8, tol=1e-9)
    dt = time.perf_counter() - t
    note(request, f"{dt:.3f} s")
    assert res.status == PASS
    assert res.evidence["counts"] == {n: 2 ** n for n in range(1, 9)}
    assert dt < 1.0


@pytest.mark.acceptance(2, "fixed-point census henon(6, 0.8), n <= 10")
def test_criterion_2_census(request, census6):
    pts, dt = census6
    note(request, f"{dt:.1f} s")
    for n, found in pts.items():
        assert len(found) == 2 ** n
        assert max(p.residual for p in found) < 1e-10
        assert all(p.real_multipliers and p.is_saddle for p in found)
    assert dt < 30.0


@pytest.mark.acceptance(3, "strict multiplier bounds, analytic cross-check at n = 1")
def test_criterion_3_bounds(request, census6):
    pts, _ = census6
    rep = check_bounds([p for n in pts for p in pts[n]], 2)
    assert rep.ok
    margins = [min(r["margin_u"], r["margin_s"]) for r in rep.rows]
    note(request, f"{len(rep.rows)} orbits, min log-margin {min(margins):.4f}")
    assert min(margins) > 0
    by_class = {p.flip_class: p for p in pts[1]}
    for cls, (lu, ls) in (("non-flipping", (6.90331, 0.11589)), ("flipping", (-3.16657, -0.25263))):
        p = by_class[cls]
        oracle = sorted(quadratic_multipliers(p.point[0], 0.8), key=abs, reverse=True)
        assert (p.lambda_u, p.lambda_s) == pytest.approx(oracle, abs=1e-9)
        assert (p.lambda_u, p.lambda_s) == pytest.approx((lu, ls), abs=1e-4)
    xs = sorted(p.point[0] for p in pts[1])
    assert xs == pytest.approx(quadratic_fixed_points(6.0, 0.8), abs=1e-12)


@pytest.mark.acceptance(4, "non-flipping point doubly one-sided, flipping point two-sided")
def test_criterion_4_one_sided(request):
    t = time.perf_counter()
    f = henon(6.0, 0.8)
    gev = GreenEvaluator(f)
    verdicts = {}
    for p in find_fixed_points(f, 1):
        verdicts[p.flip_class] = [one_sided_test(build_chart(f, p, k, gev), gev).verdict for k in (UNSTABLE, STABLE)]
    rows = {r["code"]: r for r in check_bounds(find_fixed_points(f, 1), 2).rows}
    dt = time.perf_counter() - t
    note(request, f"{verdicts}; {dt:.1f} s")
    assert all(v.startswith("one-sided") for v in verdicts["non-flipping"])
    assert verdicts["flipping"] == ["two-sided", "two-sided"]
    assert rows["+"]["refined_u"] and rows["+"]["refined_s"]
    assert not (rows["-"]["refined_u"] or rows["-"]["refined_s"])
    assert rows["+"]["lambda_u"] > 4 and rows["+"]["lambda_s"] < 0.25
    assert dt < 10.0


@pytest.mark.acceptance(5, "parametrization residual and normalization for p+")
def test_criterion_5_parametrization(request):
    f = henon(6.0, 0.8)
    gev = GreenEvaluator(f)
    R = gev.filtration.R
    p = non_flipping_fixed_point(f)
    worst, norms = 0.0, []
    for kind in (UNSTABLE, STABLE):
        chart = build_chart(f, p, kind, gev)
        arc = trace(chart, 50.0, window=(-R, -R, R, R))
        z = arc.params[(np.abs(arc.points) <= R).all(1)]
        z = z[np.linspace(0, z.size - 1, 1000).astype(int)]
        worst = max(worst, float(chart.functional_residual(z).max()))
        norms.append(circle_max(chart, 1.0, gev)[0])
    note(request, f"residual {worst:.2e}; circle max {norms[0]:.9f}, {norms[1]:.9f}")
    assert worst < 1e-10
    assert norms == pytest.approx([1.0, 1.0], abs=1e-6)


@pytest.mark.acceptance(6, "tangency hunt at b = 0.8 on [4, 6]")
def test_criterion_6_hunt(request, hunt):
    res, dt = hunt
    f = henon(res.a_star, 0.8)
    evt = classify_contact(res.event.intersection, raw_charts(f))
    none_at_6 = tangency_search(henon(6.0, 0.8))
    note(request, f"a* = {res.a_star:.8f}, |a* - {PUBLISHED_A}| = {abs(res.a_star - PUBLISHED_A):.1e}, "
                  f"kappa gap {evt.curvature_gap:.3f}, {dt:.1f} s")
    assert abs(res.a_star - PUBLISHED_A) < 1e-3
    assert evt.curvature_gap > 1e-3
    assert none_at_6.status == PASS and none_at_6.evidence["tangencies"] == []
    assert dt < 300.0


@pytest.mark.acceptance(7, "boundary map keeps maximal entropy, n <= 8")
def test_criterion_7_boundary_census(request, hunt):
    res, _ = hunt
    check = maxent_check(henon(res.a_star, 0.8), 8)
    note(request, f"a = {res.a_star:.8f}: {check.message}")
    assert check.status == PASS
    assert check.evidence["counts"] == {n: 2 ** n for n in range(1, 9)}


@pytest.mark.acceptance(8, "Cantor diagnostic at (6, 0.8)")
def test_criterion_8_cantor(request):
    res = cantor_check(henon(6.0, 0.8), (64, 128, 256, 512))
    d = [r["max_diameter"] for r in res.evidence["levels"]]
    note(request, res.message)
    assert all(b < a for a, b in zip(d, d[1:]))
    assert res.evidence["levels"][-1]["max_diameter_cells"] < 10
    assert all(r["undecided_fraction"] == 0 for r in res.evidence["levels"])


@pytest.mark.acceptance(9, "headless property suite and artifact determinism")
def test_criterion_9_properties(request, tmp_path):
    f = henon(6.0, 0.8)
    gev = GreenEvaluator(f)
    rng = np.random.default_rng(9)
    x, y = rng.uniform(-6, 6, (2, 5000))
    g = gev.plus(x, y)
    sel = np.flatnonzero(g > 0)[:1000]
    u, v = f(x[sel], y[sel])
    inv_err = float(np.max(np.abs(gev.plus(u, v) - 2 * g[sel])))
    x, y = rng.uniform(-10, 10, (2, 1000))
    rt = np.max(np.abs(np.array(f.eval_inverse(*f(x, y))) - [x, y]))
    rt2 = np.max(np.abs(np.array(f(*f.eval_inverse(x, y))) - [x, y]))
    dets = np.linalg.det(f.jacobian(x, y))

    same = []
    for args, names in (
        (["orbits", "--henon", "6,0.8", "--period-max", "5", "--out"], ["o.csv"]),
        (["analyze", "--henon", "6,0.8", "--period-max", "3", "--out"], ["a.json"]),
        (["manifolds", "--henon", "6,0.8", "--budget", "20", "--out-prefix"], ["m_unstable.csv", "m_stable.csv"]),
    ):
        blobs = []
        for run in ("r1", "r2"):
            d = tmp_path / run
            d.mkdir(exist_ok=True)
            target = str(d / names[0]) if len(names) == 1 else str(d / "m")
            assert cli.main(args + [target, "-q"]) == 0
            blobs.append([(d / n).read_bytes() for n in names])
        same.append(blobs[0] == blobs[1])

    note(request, f"G+ invariance {inv_err:.1e}, round trip {max(rt, rt2):.1e}, "
                  f"det spread {np.ptp(dets):.1e}, artifacts identical {all(same)}")
    assert sel.size == 1000 and inv_err < 1e-9
    assert rt < 1e-12 and rt2 < 1e-12
    assert np.allclose(dets, 0.8, rtol=0, atol=1e-12)
    assert all(same)
