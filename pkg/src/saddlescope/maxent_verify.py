"""Theorem-level checks assembled into a verdict report.

Every check returns a :class:`CheckResult` whose status is ``pass``,
``fail`` or ``inconclusive``.  A failing check carries the falsifying object
(an orbit, a grid cell or an event) as its witness.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import pdist

from .errors import (Collision, ComplexPeriodicPoint, Inconclusive, NonConvergence, PatternViolation,
                     SaddlescopeError)
from .greens import GreenEvaluator, classify_grid, filtration_radius
from .manifold import STABLE, UNSTABLE, build_chart, one_sided_test
from .map_core import PolyDiffeo, format_map_spec
from .parallel import worker_count
from .periodic import check_bounds, find_fixed_points, periodic_orbits

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"

LABEL_HYPERBOLIC = "hyperbolic (evidence)"
LABEL_NONHYPERBOLIC = "maximal entropy, non-hyperbolic (tangency witnesses)"
LABEL_NOT_MAXIMAL = "not maximal entropy"
LABEL_UNDETERMINED = "undetermined"


@dataclass
class CheckResult:
    name: str
    status: str
    evidence: dict = field(default_factory=dict)
    witness: object = None
    message: str = ""

    def to_dict(self) -> dict:
        return {"status": self.status, "message": self.message,
                "evidence": _plain(self.evidence), "witness": _plain(self.witness)}


@dataclass
class VerdictReport:
    map_spec: str
    checks: dict[str, CheckResult]
    label: str

    @property
    def overall(self) -> str:
        statuses = [c.status for c in self.checks.values()]
        if FAIL in statuses:
            return FAIL
        if INCONCLUSIVE in statuses:
            return INCONCLUSIVE
        return PASS

    @property
    def exit_code(self) -> int:
        return {PASS: 0, FAIL: 1, INCONCLUSIVE: 2}[self.overall]

    def to_dict(self) -> dict:
        return {
            "map": self.map_spec,
            "overall": self.overall,
            "label": self.label,
            "checks": {name: self.checks[name].to_dict() for name in sorted(self.checks)},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def summary(self) -> str:
        lines = [f"map: {self.map_spec.strip().replace(chr(10), ', ')}"]
        for name in sorted(self.checks):
            c = self.checks[name]
            lines.append(f"  {name:<14} {c.status:<13} {c.message}")
        lines.append(f"overall: {self.overall}; label: {self.label}")
        return "\n".join(lines)


def _plain(obj):
    """Recursively convert numpy scalars/arrays and tuples to JSON types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if obj is None or isinstance(obj, (str, int, bool)):
        return obj
    return str(obj)


# -- maximal entropy by counting -------------------------------------------------

def maxent_check(f: PolyDiffeo, n_max: int, keep_points: bool = False) -> CheckResult:
    """``f^n`` must have exactly ``d**n`` real fixed points for ``n = 1..n_max``."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    d = f.degree
    counts, residuals, points = {}, {}, {}
    for n in range(1, n_max + 1):
        try:
            pts = find_fixed_points(f, n)
        except (NonConvergence, ComplexPeriodicPoint, Collision) as exc:
            witness = {"n": n, "error": type(exc).__name__, "detail": str(exc)}
            if isinstance(exc, ComplexPeriodicPoint):
                witness["point"] = exc.point
            return CheckResult("maxent", FAIL, {"counts": counts}, witness,
                               f"n={n}: {type(exc).__name__}")
        counts[n] = len(pts)
        residuals[n] = max(p.residual for p in pts)
        if keep_points:
            points[n] = pts
        if len(pts) != d**n:
            return CheckResult("maxent", FAIL, {"counts": counts}, {"n": n, "count": len(pts)},
                               f"n={n}: {len(pts)} != {d}^{n}")
    ev = {"counts": counts, "max_residual": residuals}
    res = CheckResult("maxent", PASS, ev, None, f"d^n fixed points for n <= {n_max}")
    if keep_points:
        res.evidence["_points"] = points
    return res


def bounds_check(f: PolyDiffeo, points_by_n: dict) -> CheckResult:
    """Strict multiplier bounds per least period over all found orbits."""
    pts = [p for n in sorted(points_by_n) for p in points_by_n[n]]
    rep = check_bounds(pts, f.degree)
    margins = [min(r["margin_u"], r["margin_s"]) for r in rep.rows if "margin_u" in r]
    ev = {"orbits": len(rep.rows), "min_margin": min(margins) if margins else None,
          "refined": [r["orbit"][0] for r in rep.rows if r.get("refined_u") and r.get("refined_s")]}
    if rep.ok:
        return CheckResult("bounds", PASS, ev, None, f"{len(rep.rows)} orbits, min log-margin {ev['min_margin']:.4g}")
    return CheckResult("bounds", FAIL, ev, rep.violations[0], f"{len(rep.violations)} orbit(s) violate the bounds")


# -- one-sidedness ------------------------------------------------------------------

def one_sided_table(f: PolyDiffeo, gev: GreenEvaluator | None = None, raise_on_violation: bool = True) -> list[dict]:
    """One-sided verdicts for every orbit of period 1 or 2, both kinds.

    Checks the expected pattern: for orientation-preserving quadratic maps the
    non-flipping fixed point is the only one-sided point and it is doubly
    one-sided; for orientation-reversing quadratic maps one fixed point is
    u-one-sided and the other s-one-sided; for odd degree with
    ``epsilon = -1`` every u-one-sided point has period 2.  One-sided points
    must have a positive multiplier of the corresponding kind.
    """
    gev = gev or GreenEvaluator(f)
    rows = []
    for n in (1, 2):
        for p in periodic_orbits(find_fixed_points(f, n)):
            if p.least_period != n:
                continue
            row = {"point": p.point, "least_period": n, "flip_class": p.flip_class,
                   "lambda_u": float(np.real(p.lambda_u)), "lambda_s": float(np.real(p.lambda_s))}
            for kind in (UNSTABLE, STABLE):
                chart = build_chart(f, p, kind, gev)
                res = one_sided_test(chart, gev)
                row[kind] = res.verdict
                row[kind + "_evidence"] = res.to_dict()
            rows.append(row)
    problems = _pattern_problems(f, rows)
    if problems and raise_on_violation:
        msg, row = problems[0]
        raise PatternViolation(msg, row)
    return rows


def _is_one_sided(v: str) -> bool:
    return v.startswith("one-sided")


def _pattern_problems(f: PolyDiffeo, rows: list[dict]) -> list[tuple[str, dict]]:
    out = []
    for r in rows:
        if _is_one_sided(r[UNSTABLE]) and not r["lambda_u"] > 0:
            out.append(("u-one-sided point with negative unstable multiplier", r))
        if _is_one_sided(r[STABLE]) and not r["lambda_s"] > 0:
            out.append(("s-one-sided point with negative stable multiplier", r))
    fixed = [r for r in rows if r["least_period"] == 1]
    if f.degree == 2 and f.orientation > 0:
        for r in rows:
            doubly = _is_one_sided(r[UNSTABLE]) and _is_one_sided(r[STABLE])
            expect = r["least_period"] == 1 and r["flip_class"] == "non-flipping"
            if expect and not doubly:
                out.append(("non-flipping fixed point is not doubly one-sided", r))
            if not expect and (_is_one_sided(r[UNSTABLE]) or _is_one_sided(r[STABLE])):
                out.append(("one-sided point other than the non-flipping fixed point", r))
    elif f.degree == 2 and f.orientation < 0:
        u_fixed = [r for r in fixed if _is_one_sided(r[UNSTABLE])]
        s_fixed = [r for r in fixed if _is_one_sided(r[STABLE])]
        if len(u_fixed) != 1 or len(s_fixed) != 1 or u_fixed[0] is s_fixed[0]:
            out.append(("expected one u-one-sided and a different s-one-sided fixed point", {"fixed": fixed}))
        for r in rows:
            if r["least_period"] != 1 and (_is_one_sided(r[UNSTABLE]) or _is_one_sided(r[STABLE])):
                out.append(("one-sided point that is not fixed", r))
    if f.degree % 2 == 1 and f.epsilon < 0:
        for r in rows:
            if _is_one_sided(r[UNSTABLE]) and r["least_period"] != 2:
                out.append(("u-one-sided point of period other than 2 with epsilon = -1", r))
    elif f.orientation > 0 and f.epsilon > 0 and f.degree % 2 == 0:
        for r in rows:
            if _is_one_sided(r[UNSTABLE]) and r["least_period"] != 1:
                out.append(("u-one-sided point that is not fixed", r))
    return out


def one_sided_check(f: PolyDiffeo, gev: GreenEvaluator | None = None) -> CheckResult:
    try:
        rows = one_sided_table(f, gev, raise_on_violation=False)
    except Inconclusive as exc:
        return CheckResult("one_sided", INCONCLUSIVE, {}, None, str(exc))
    except SaddlescopeError as exc:
        return CheckResult("one_sided", INCONCLUSIVE, {}, None, f"{type(exc).__name__}: {exc}")
    table = [{k: v for k, v in r.items() if not k.endswith("_evidence")} for r in rows]
    problems = _pattern_problems(f, rows)
    if problems:
        msg, row = problems[0]
        return CheckResult("one_sided", FAIL, {"table": table}, row, msg)
    doubly = [r["point"] for r in rows if _is_one_sided(r[UNSTABLE]) and _is_one_sided(r[STABLE])]
    return CheckResult("one_sided", PASS, {"table": table, "doubly_one_sided": doubly}, None,
                       f"{len(rows)} orbits of period <= 2 tested")


# -- Cantor diagnostic ----------------------------------------------------------------

def component_diameters(mask: np.ndarray, cell: float = 1.0, connectivity: int = 8):
    """Labels and centre-to-centre diameters of connected components of ``mask``."""
    structure = np.ones((3, 3), bool) if connectivity == 8 else ndimage.generate_binary_structure(2, 1)
    labels, count = ndimage.label(mask, structure=structure)
    diam = np.zeros(count)
    for lab, sl in enumerate(ndimage.find_objects(labels), start=1):
        ii, jj = np.nonzero(labels[sl] == lab)
        pts = np.c_[ii, jj].astype(float)
        if len(pts) > 3:
            try:
                pts = pts[ConvexHull(pts).vertices]
            except QhullError:
                pass  # collinear cells: the full set is small enough for pdist
        diam[lab - 1] = pdist(pts).max() * cell if len(pts) > 1 else 0.0
    return labels, diam


def cantor_check(f: PolyDiffeo, resolutions=(64, 128, 256, 512), rect=None,
                 undecided_limit: float = 1e-3, markers=None) -> CheckResult:
    """Largest K-component diameter per resolution must shrink strictly and end below 10 cells.

    ``markers`` (points, e.g. the fixed points) are located in the finest
    grid; the evidence records which component each one falls in.
    """
    if rect is None:
        R = filtration_radius(f).R
        rect = (-R, -R, R, R)
    rows = []
    finest = None
    for res in resolutions:
        grid = classify_grid(f, rect, res)
        undecided = grid.count("undecided") / res**2
        cell = (rect[2] - rect[0]) / res
        labels, diam = component_diameters(grid.k_mask, cell)
        biggest = int(np.argmax(diam)) + 1 if diam.size else 0
        rows.append({"resolution": res, "cell": cell, "k_cells": int(grid.k_mask.sum()),
                     "components": int(diam.size), "max_diameter": float(diam.max()) if diam.size else 0.0,
                     "max_diameter_cells": float(diam.max() / cell) if diam.size else 0.0,
                     "undecided_fraction": undecided})
        if undecided > undecided_limit:
            return CheckResult("cantor", INCONCLUSIVE, {"levels": rows}, None,
                               f"{undecided:.2%} undecided cells at resolution {res}")
        finest = (grid, labels, biggest)
    ev = {"levels": rows}
    if markers is not None and finest is not None:
        grid, labels, _ = finest
        where = []
        for pt in markers:
            ij = grid.cell_of(*pt)
            where.append(int(labels[ij]) if ij is not None else None)
        ev["marker_components"] = where
    d = [r["max_diameter"] for r in rows]
    decreasing = all(b < a for a, b in zip(d, d[1:]))
    small = rows[-1]["max_diameter_cells"] < 10
    if decreasing and small:
        return CheckResult("cantor", PASS, ev, None,
                           f"diameters {', '.join(f'{v:.3g}' for v in d)}; finest {rows[-1]['max_diameter_cells']:.2f} cells")
    bad = next((r for a, r in zip(rows, rows[1:]) if r["max_diameter"] >= a["max_diameter"]), rows[-1])
    return CheckResult("cantor", FAIL, ev, bad, "component diameters do not shrink to below 10 cells")


# -- one-dimensional oracle ---------------------------------------------------------

def ulam_periodic_points(n: int) -> np.ndarray:
    """All solutions of ``f^n(x) = x`` for ``f(x) = 2 - x**2``.

    With ``x = -2 cos(theta)`` the map becomes ``theta -> 2 theta``, so the
    solutions are ``theta = 2 pi k / (2**n - 1)`` and ``2 pi k / (2**n + 1)``
    in ``[0, pi]``.
    """
    m = 2**n
    th = [2 * np.pi * k / (m - 1) for k in range(0, (m - 1) // 2 + 1) if 2 * k <= m - 1]
    th += [2 * np.pi * k / (m + 1) for k in range(1, (m + 1) // 2 + 1) if 2 * k <= m + 1]
    th = np.array(th)
    th = th[th <= np.pi + 1e-15]
    return np.sort(-2 * np.cos(th))


def ulam_derivative(x: float, n: int) -> float:
    """``(f^n)'(x)`` by the chain rule along the orbit."""
    d = 1.0
    for _ in range(n):
        d *= -2 * x
        x = 2 - x * x
    return d


def ulam_oracle(n_max: int = 8, tol: float = 1e-9) -> CheckResult:
    """``2**n`` fixed points of ``f^n`` with ``|Df^n| = 2**n`` except at ``-2``, where it is ``4**n``."""
    rows = {}
    for n in range(1, n_max + 1):
        xs = ulam_periodic_points(n)
        if xs.size != 2**n:
            return CheckResult("ulam", FAIL, {"rows": rows}, {"n": n, "count": int(xs.size)}, f"n={n}: count {xs.size}")
        for x in xs:
            expect = 4.0**n if abs(x + 2) < 1e-12 else 2.0**n
            got = abs(ulam_derivative(float(x), n))
            if abs(got - expect) > tol * expect:
                return CheckResult("ulam", FAIL, {"rows": rows}, {"n": n, "x": float(x), "derivative": got},
                                   f"|Df^{n}({x:.6g})| = {got} != {expect}")
        rows[n] = int(xs.size)
    return CheckResult("ulam", PASS, {"counts": rows}, None, f"pattern holds for n <= {n_max}")


# -- tangency search and the full report ------------------------------------------

def tangency_search(f: PolyDiffeo, window=None, zeta_max: float = 2000.0) -> CheckResult:
    """Intersections of the non-flipping fixed point's manifolds inside ``window``."""
    from .manifold import trace
    from .tangency import TRANSVERSE, classify_contact, intersections, near_contacts, raw_charts

    try:
        cu, cs = raw_charts(f)
    except SaddlescopeError as exc:
        return CheckResult("tangency", INCONCLUSIVE, {}, None, f"{type(exc).__name__}: {exc}")
    if window is None:
        R = filtration_radius(f).R
        window = (-R, -R, R, R)
    au = trace(cu, zeta_max, window=window)
    as_ = trace(cs, zeta_max, window=window)
    events = intersections(au, as_, window)
    close = near_contacts(au, as_, window)
    tangencies, failures = [], []
    for e in events + close:
        if not e.refined:
            failures.append(e.to_dict())
            continue
        if e.kind == TRANSVERSE:
            continue
        try:
            out = classify_contact(e, (cu, cs))
        except SaddlescopeError as exc:
            failures.append({"event": e.to_dict(), "error": str(exc)})
            continue
        if out != TRANSVERSE and not any(math.dist(out.intersection.point, (t["x"], t["y"])) < 1e-6
                                         for t in tangencies):
            tangencies.append(out.to_dict())
    ev = {"window": window, "intersections": len(events), "tangencies": tangencies,
          "unrefined": failures}
    if failures:
        return CheckResult("tangency", INCONCLUSIVE, ev, failures[0], f"{len(failures)} unresolved candidate(s)")
    msg = f"{len(events)} intersections, {len(tangencies)} tangencies in window"
    return CheckResult("tangency", PASS, ev, None, msg)


def _label(checks) -> str:
    m = checks.get("maxent")
    t = checks.get("tangency")
    if m is None or m.status == INCONCLUSIVE:
        return LABEL_UNDETERMINED
    if m.status == FAIL:
        return LABEL_NOT_MAXIMAL
    if t is None or t.status != PASS:
        return LABEL_UNDETERMINED
    return LABEL_NONHYPERBOLIC if t.evidence["tangencies"] else LABEL_HYPERBOLIC


def verify(f: PolyDiffeo, n_max: int = 10, resolutions=(64, 128, 256, 512), window=None,
           progress=None) -> VerdictReport:
    """Run every check; independent checks share a thread pool."""
    say = progress or (lambda msg: None)
    checks: dict[str, CheckResult] = {}
    say("ulam oracle")
    checks["ulam"] = ulam_oracle()
    say(f"periodic census up to n={n_max}")
    m = maxent_check(f, n_max, keep_points=True)
    points = m.evidence.pop("_points", {})
    checks["maxent"] = m
    if m.status == PASS:
        checks["bounds"] = bounds_check(f, points)
        fixed = [p.point for p in points.get(1, [])]
        jobs = {
            "one_sided": lambda: one_sided_check(f),
            "cantor": lambda: cantor_check(f, resolutions, markers=fixed),
            "tangency": lambda: tangency_search(f, window),
        }
        say("one-sidedness, Cantor diagnostic and tangency search")
        with ThreadPoolExecutor(max_workers=worker_count()) as pool:
            futures = {name: pool.submit(job) for name, job in jobs.items()}
            for name in sorted(futures):
                checks[name] = futures[name].result()
    return VerdictReport(format_map_spec(f), checks, _label(checks))
