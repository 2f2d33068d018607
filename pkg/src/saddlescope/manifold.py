"""Stable and unstable manifolds of saddle orbits by the parametrization method.

A chart is a power series ``psi(zeta) = q + a1*zeta + a2*zeta**2 + ...`` solving
``F(psi(zeta)) = psi(mu*zeta)`` for a driver map ``F`` with expanding
multiplier ``mu`` at ``q``.  For an unstable chart of a period-m orbit the
driver is ``f^m``.  Stable charts use the swapped inverse ``g = nu f^-1 nu``
as driver and read the result through ``nu(x, y) = (y, x)``, so there is a
single code path.  Away from the validated disk the chart is extended by
``psi(zeta) = F^k(psi(zeta / mu**k))``.

Normalization rescales ``zeta`` so that the maximum of the driver's escape
rate (``G+`` for unstable, ``G-`` for stable charts) over ``|zeta| = 1``
equals 1; the maximum principle makes the circle maximum equal to the disk
maximum.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import Inconclusive, Resonance, SmallRadius, StepCollapse
from .greens import GreenEvaluator
from .map_core import PolyDiffeo
from .periodic import PeriodicPoint

ORDER = 30
SERIES_TOL = 1e-12
MIN_RADIUS = 1e-6

UNSTABLE = "unstable"
STABLE = "stable"


# -- truncated power series -------------------------------------------------

def _smul(a, b, order):
    return np.convolve(a, b)[: order + 1]


def _spoly(coeffs, s, order):
    acc = np.zeros(order + 1, dtype=s.dtype)
    acc[0] = coeffs[-1]
    for c in reversed(coeffs[:-1]):
        acc = _smul(acc, s, order)
        acc[0] += c
    return acc


def _compose_series(F: PolyDiffeo, X, Y, order):
    X = np.resize(X, order + 1) if X.size != order + 1 else X
    for fac in reversed(F.factors):
        X, Y = Y, _spoly(fac.coeffs, Y, order) - fac.shear * X
    return X, Y


# -- charts ------------------------------------------------------------------

@dataclass
class ManifoldChart:
    """Local parametrization of ``W^u`` or ``W^s`` at one point of a saddle orbit.

    ``coeffs`` (shape ``(M+1, 2)``) and ``mu`` live in driver coordinates;
    ``lam`` is the multiplier of ``f`` (``lambda_u`` or ``lambda_s``).
    """

    saddle: PeriodicPoint
    kind: str
    lam: float
    mu: float
    coeffs: np.ndarray
    rho: float
    driver: PolyDiffeo
    swap: bool
    norm_scale: float = 1.0
    residual: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def degree(self) -> int:
        return self.driver.degree

    def _out(self, x, y):
        return (y, x) if self.swap else (x, y)

    # local series ------------------------------------------------------
    def local(self, z, nderiv: int = 0):
        """Series value (and derivatives) at ``z``, in driver coordinates."""
        z = np.asarray(z)
        c = self.coeffs
        out = []
        cur = c
        for _ in range(nderiv + 1):
            px = np.zeros_like(z, dtype=np.result_type(z, float)) + cur[-1, 0]
            py = np.zeros_like(px) + cur[-1, 1]
            for k in range(cur.shape[0] - 2, -1, -1):
                px = px * z + cur[k, 0]
                py = py * z + cur[k, 1]
            out.append((px, py))
            ks = np.arange(1, cur.shape[0])[:, None]
            cur = cur[1:] * ks if cur.shape[0] > 1 else np.zeros((1, 2))
        return out

    def _levels(self, z):
        az = np.abs(z)
        with np.errstate(divide="ignore"):
            k = np.ceil(np.log(np.maximum(az, 1e-300) / self.rho) / math.log(abs(self.mu)))
        return np.maximum(k, 0).astype(int)

    def jet_driver(self, z, nderiv: int = 2):
        """Point and derivatives of the global parametrization, driver coordinates."""
        z = np.atleast_1d(np.asarray(z))
        dtype = np.result_type(z, float)
        k = self._levels(z)
        pts = [np.zeros(z.shape, dtype=dtype) for _ in range(2 * (nderiv + 1))]
        for lvl in np.unique(k):
            sel = k == lvl
            scale = float(self.mu) ** int(lvl)
            loc = self.local(z[sel] / scale, nderiv)
            pt = loc[0]
            d1 = tuple(v / scale for v in loc[1]) if nderiv >= 1 else None
            d2 = tuple(v / scale**2 for v in loc[2]) if nderiv >= 2 else None
            for _ in range(int(lvl)):
                if nderiv >= 2:
                    pt, d1, d2 = self.driver.jet(pt, d1, d2)
                elif nderiv == 1:
                    pt, d1 = self.driver.jet(pt, d1)
                else:
                    pt = self.driver.eval(*pt)
            vals = [pt] + ([d1] if nderiv >= 1 else []) + ([d2] if nderiv >= 2 else [])
            for slot, (vx, vy) in enumerate(vals):
                pts[2 * slot][sel] = vx
                pts[2 * slot + 1][sel] = vy
        return [(pts[2 * s], pts[2 * s + 1]) for s in range(nderiv + 1)]

    def __call__(self, z):
        (x, y), = self.jet_driver(z, 0)
        return self._out(x, y)

    def jet(self, z, nderiv: int = 2):
        """``[(x, y), (x', y'), (x'', y'')]`` of the chart in map coordinates."""
        return [self._out(*v) for v in self.jet_driver(z, nderiv)]

    def functional_residual(self, z) -> np.ndarray:
        """``|F(psi(z / mu)) - psi(z)|`` (driver coordinates)."""
        z = np.asarray(z)
        (x0, y0), = self.jet_driver(z / self.mu, 0)
        fx, fy = self.driver.eval(x0, y0)
        (x1, y1), = self.jet_driver(z, 0)
        return np.hypot(np.abs(fx - x1), np.abs(fy - y1))

    def rescaled(self, alpha: float) -> "ManifoldChart":
        """Chart for ``zeta -> psi(alpha * zeta)`` (alpha real, nonzero)."""
        k = np.arange(self.coeffs.shape[0])[:, None]
        return replace(
            self,
            coeffs=self.coeffs * alpha**k,
            rho=self.rho / abs(alpha),
            norm_scale=self.norm_scale * alpha,
            meta=dict(self.meta),
        )

    def green(self, gev: GreenEvaluator):
        """Escape rate of the driver (``G+`` of f for unstable, ``G-`` for stable)."""
        return gev.minus if self.swap else gev.plus

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "saddle": list(self.saddle.point),
            "least_period": self.saddle.least_period,
            "lambda": self.lam,
            "rho": self.rho,
            "norm_scale": self.norm_scale,
            "coeffs": self._out_coeffs().tolist(),
        }

    def _out_coeffs(self):
        return self.coeffs[:, ::-1] if self.swap else self.coeffs


def _driver_for(f: PolyDiffeo, m: int, kind: str):
    if kind == UNSTABLE:
        return (f.power(m) if m > 1 else f), False
    g = f.swapped_inverse()
    return (g.power(m) if m > 1 else g), True


def _solve_coefficients(F: PolyDiffeo, q, mu, vec, order):
    A = F.jacobian(q[0], q[1])
    coeffs = np.zeros((order + 1, 2))
    coeffs[0] = q
    coeffs[1] = vec
    other = np.linalg.det(A) / mu
    for k in range(2, order + 1):
        if abs(mu**k - other) < 1e-10 * max(1.0, abs(other)):
            raise Resonance(f"mu**{k} = {mu**k} resonates with {other}")
        X = coeffs[: k + 1, 0].copy()
        Y = coeffs[: k + 1, 1].copy()
        X[k] = Y[k] = 0.0
        FX, FY = _compose_series(F, X, Y, k)
        rhs = -np.array([FX[k], FY[k]])
        coeffs[k] = np.linalg.solve(A - mu**k * np.eye(2), rhs)
    return coeffs


def _validate_radius(chart: ManifoldChart, tol: float, n: int = 64) -> tuple[float, float]:
    c = chart.coeffs
    mags = np.linalg.norm(c[1:], axis=1)
    ks = np.arange(1, c.shape[0])
    tail = slice(len(ks) // 2, None)
    with np.errstate(divide="ignore"):
        growth = np.max(np.where(mags[tail] > 0, mags[tail] ** (1.0 / ks[tail]), 0.0))
    rho = 1.0 / growth if growth > 0 else 1.0
    # rounding floor: evaluating the driver at the saddle itself
    (qx, qy), = chart.local(np.array([0.0]))
    fx, fy = chart.driver.eval(qx, qy)
    floor = float(np.hypot(fx - qx, fy - qy)[0])
    tol = max(tol, 100 * floor)
    theta = 2 * np.pi * (np.arange(n) + 0.5) / n
    for _ in range(400):
        chart.rho = rho
        z = rho * np.exp(1j * theta)
        # residual of the truncated series alone, no iteration involved
        (x0, y0), = chart.local(z / chart.mu)
        fx, fy = chart.driver.eval(x0, y0)
        (x1, y1), = chart.local(z)
        res = float(np.max(np.hypot(np.abs(fx - x1), np.abs(fy - y1))))
        if res < tol:
            return rho, res
        rho *= 0.8
    return rho, res


def local_chart(f: PolyDiffeo, p: PeriodicPoint, kind: str = UNSTABLE, order: int = ORDER,
                series_tol: float = SERIES_TOL) -> ManifoldChart:
    """Power-series chart of ``W^u`` / ``W^s`` at ``p`` (period ``p.least_period``)."""
    if kind not in (UNSTABLE, STABLE):
        raise ValueError("kind must be 'stable' or 'unstable'")
    if not p.is_saddle:
        raise ValueError(f"{p.point} is not a saddle with real multipliers")
    m = p.least_period
    F, swap = _driver_for(f, m, kind)
    q = np.array(p.point[::-1] if swap else p.point, dtype=float)
    A = F.jacobian(q[0], q[1])
    w, V = np.linalg.eig(A)
    i = int(np.argmax(np.abs(w)))
    mu = float(np.real(w[i]))
    vec = np.real(V[:, i])
    vec = vec / np.linalg.norm(vec)
    if vec[0] < 0 or (vec[0] == 0 and vec[1] < 0):
        vec = -vec
    lam = mu if kind == UNSTABLE else 1.0 / mu
    coeffs = _solve_coefficients(F, q, mu, vec, order)
    chart = ManifoldChart(p, kind, lam, mu, coeffs, 1.0, F, swap)
    rho, res = _validate_radius(chart, series_tol)
    if rho < MIN_RADIUS:
        raise SmallRadius(f"validated radius {rho:g} below {MIN_RADIUS:g}")
    chart.rho = rho
    chart.residual = res
    return chart


# -- normalization -----------------------------------------------------------

def circle_max(chart: ManifoldChart, radius: float, gev: GreenEvaluator, n_theta: int = 256,
               refine: int = 3) -> tuple[float, float]:
    """Max of the escape rate on ``|zeta| = radius``; returns ``(value, angle)``.

    The chart is real, so only ``0 <= theta <= pi`` is sampled; the best
    samples are polished with a bounded scalar search.
    """
    G = chart.green(gev)

    def g_at(theta):
        z = radius * np.exp(1j * np.atleast_1d(theta))
        x, y = chart(z)
        return np.asarray(G(x, y), dtype=float)

    theta = np.linspace(0.0, np.pi, n_theta + 1)
    vals = g_at(theta)
    vals = np.where(np.isnan(vals), -np.inf, vals)
    best_v, best_t = float(vals.max()), float(theta[int(vals.argmax())])
    step = np.pi / n_theta
    is_peak = np.r_[vals[0] >= vals[1], (vals[1:-1] >= vals[:-2]) & (vals[1:-1] >= vals[2:]), vals[-1] >= vals[-2]]
    peaks = np.flatnonzero(is_peak)
    peaks = peaks[np.argsort(vals[peaks])[::-1][:refine]]
    for i in peaks:
        lo, hi = max(0.0, theta[i] - step), min(np.pi, theta[i] + step)
        r = minimize_scalar(lambda t: -float(g_at(t)[0]), bounds=(lo, hi), method="bounded",
                            options={"xatol": 1e-10})
        if -r.fun > best_v:
            best_v, best_t = float(-r.fun), float(r.x)
    return best_v, best_t


def _sign_fix(chart: ManifoldChart) -> ManifoldChart:
    (dx, dy) = chart.jet(np.array([0.0]), 1)[1]
    dx, dy = float(dx[0]), float(dy[0])
    if dx < 0 or (abs(dx) < 1e-14 and dy < 0):
        return chart.rescaled(-1.0)
    return chart


def normalize(chart: ManifoldChart, gev: GreenEvaluator, tol: float = 1e-9) -> ManifoldChart:
    """Rescale so that ``max_{|zeta|=1}`` of the escape rate is 1.

    Sign convention: the ``zeta > 0`` branch leaves the saddle with increasing
    ``x`` (increasing ``y`` when the tangent is vertical).
    """
    d = chart.degree
    mu = abs(chart.mu)

    def h(r):
        return circle_max(chart, r, gev)[0]

    r = chart.rho
    val = h(r)
    for _ in range(200):
        if val > 0:
            break
        r *= mu
        val = h(r)
    if not val > 0:
        raise Inconclusive("escape rate vanishes on every sampled circle")
    # G o psi(mu z) = d G o psi(z): jump to the right fundamental annulus
    k = math.floor(math.log(1.0 / val) / math.log(d))
    r *= mu**k
    lo, hi = r, r * mu
    vlo, vhi = h(lo), h(hi)
    while vlo > 1:
        hi, lo = lo, lo / mu
        vhi, vlo = vlo, h(lo)
    while vhi < 1:
        lo, hi = hi, hi * mu
        vlo, vhi = vhi, h(hi)
    s = math.exp(brentq(lambda t: math.log(h(math.exp(t))), math.log(lo), math.log(hi), xtol=tol, rtol=1e-14))
    out = _sign_fix(chart.rescaled(s))
    out.meta["circle_max"] = circle_max(out, 1.0, gev)[0]
    return out


def build_chart(f: PolyDiffeo, p: PeriodicPoint, kind: str, gev: GreenEvaluator | None = None,
                order: int = ORDER, normalized: bool = True) -> ManifoldChart:
    chart = local_chart(f, p, kind, order)
    if not normalized:
        return _sign_fix(chart)
    return normalize(chart, gev or GreenEvaluator(f))


# -- global traces -----------------------------------------------------------

@dataclass
class StepControl:
    max_step: float = 1e-2
    angle_tol: float = 0.2
    min_dzeta: float = 1e-13
    max_points: int = 400_000
    initial: int = 256


@dataclass
class ArcSample:
    """Sampled real trace of a chart on ``[-Z, Z]``; ``branch`` is ``sign(zeta)``."""

    chart: ManifoldChart
    params: np.ndarray
    points: np.ndarray
    derivs: np.ndarray
    second: np.ndarray
    window: tuple[float, float, float, float] | None = None
    budget_exhausted: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def branch(self) -> np.ndarray:
        return np.sign(self.params).astype(int)

    def branch_slice(self, sign: int) -> "ArcSample":
        sel = self.params >= 0 if sign > 0 else self.params <= 0
        return replace(self, params=self.params[sel], points=self.points[sel],
                       derivs=self.derivs[sel], second=self.second[sel])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["zeta", "x", "y", "dx", "dy", "branch"])
        for z, (x, y), (dx, dy), b in zip(self.params, self.points, self.derivs, self.branch):
            w.writerow([f"{z:.17g}", f"{x:.17g}", f"{y:.17g}", f"{dx:.17g}", f"{dy:.17g}", int(b)])
        return buf.getvalue()


def _eval_real(chart, z):
    (x, y), (dx, dy), (ddx, ddy) = chart.jet(z, 2)
    return np.c_[x, y], np.c_[dx, dy], np.c_[ddx, ddy]


def _near_window(P, window, margin):
    if window is None:
        return np.ones(P.shape[0], dtype=bool)
    x0, y0, x1, y1 = window
    return (P[:, 0] >= x0 - margin) & (P[:, 0] <= x1 + margin) & (P[:, 1] >= y0 - margin) & (P[:, 1] <= y1 + margin)


def _segment_hits_window(A, B, window, margin):
    if window is None:
        return np.ones(A.shape[0], dtype=bool)
    x0, y0, x1, y1 = window
    lo = np.minimum(A, B)
    hi = np.maximum(A, B)
    return (hi[:, 0] >= x0 - margin) & (lo[:, 0] <= x1 + margin) & (hi[:, 1] >= y0 - margin) & (lo[:, 1] <= y1 + margin)


def _refine_interval(chart, z, P, D, S, window, ctl):
    """Bisect ``[z_i, z_{i+1}]`` until chord and turning angle are small."""
    collapsed = False
    while True:
        A, B = P[:-1], P[1:]
        chord = np.linalg.norm(B - A, axis=1)
        ta = np.arctan2(D[:-1, 1], D[:-1, 0])
        tb = np.arctan2(D[1:, 1], D[1:, 0])
        turn = np.abs((tb - ta + np.pi) % (2 * np.pi) - np.pi)
        # Hermite bound on how far the arc can bulge outside the chord
        dz = np.diff(z)
        speed = np.maximum(np.linalg.norm(D[:-1], axis=1), np.linalg.norm(D[1:], axis=1))
        reach = np.minimum(speed * np.abs(dz), 1e6)
        relevant = _segment_hits_window(A, B, window, reach + ctl.max_step)
        bad = relevant & ((chord > ctl.max_step) | (turn > ctl.angle_tol) | (reach > 4 * ctl.max_step))
        bad &= np.isfinite(chord)
        tiny = np.abs(dz) <= ctl.min_dzeta * np.maximum(1.0, np.abs(z[:-1]))
        if np.any(bad & tiny):
            collapsed = True
        bad &= ~tiny
        if not bad.any() or z.size > ctl.max_points:
            return z, P, D, S, collapsed, z.size > ctl.max_points
        zm = 0.5 * (z[:-1][bad] + z[1:][bad])
        Pm, Dm, Sm = _eval_real(chart, zm)
        z = np.concatenate([z, zm])
        order = np.argsort(z, kind="stable")
        z = z[order]
        P = np.concatenate([P, Pm])[order]
        D = np.concatenate([D, Dm])[order]
        S = np.concatenate([S, Sm])[order]


def _sample(chart, z, window, ctl, strict, **meta):
    P, D, S = _eval_real(chart, z)
    z, P, D, S, collapsed, overflow = _refine_interval(chart, z, P, D, S, window, ctl)
    if collapsed and strict:
        raise StepCollapse("zeta step underflow while resolving a fold")
    arc = ArcSample(chart, z, P, D, S, window)
    arc.meta.update(step_collapse=collapsed, point_cap=overflow, **meta)
    return arc


def trace(chart: ManifoldChart, zeta_max: float, step: StepControl | None = None,
          window=None, arc_length_budget: float | None = None, strict: bool = False) -> ArcSample:
    """Adaptive real trace of both branches on ``[-zeta_max, zeta_max]``.

    Step control (chord length, turning angle) is enforced on the part of the
    curve near ``window``; elsewhere the samples only need to be dense enough
    to notice the curve coming back.  If the in-window arc length exceeds
    ``arc_length_budget`` the trace is cut there and flagged.
    """
    ctl = step or StepControl()
    # geometric spacing away from 0 resolves every fundamental domain evenly
    r0 = min(chart.rho / abs(chart.mu), zeta_max) * 1e-3
    pos = np.geomspace(r0, zeta_max, ctl.initial)
    z = np.concatenate([-pos[::-1], [0.0], pos])
    arc = _sample(chart, z, window, ctl, strict, zeta_max=zeta_max)
    if arc_length_budget is not None:
        arc = _apply_budget(arc, arc_length_budget)
    return arc


def trace_interval(chart: ManifoldChart, z_lo: float, z_hi: float, step: StepControl | None = None,
                   window=None, strict: bool = False) -> ArcSample:
    """Adaptive trace of the parameter interval ``[z_lo, z_hi]`` only."""
    ctl = step or StepControl()
    z = np.linspace(z_lo, z_hi, ctl.initial + 1)
    return _sample(chart, z, window, ctl, strict, zeta_range=(z_lo, z_hi))


def _apply_budget(arc: ArcSample, budget: float) -> ArcSample:
    inside = _near_window(arc.points, arc.window, 0.0)
    seg = np.linalg.norm(np.diff(arc.points, axis=0), axis=1)
    seg = np.where(inside[:-1] & inside[1:] & np.isfinite(seg), seg, 0.0)
    zero = int(np.argmin(np.abs(arc.params)))
    keep = np.ones(arc.params.size, dtype=bool)
    exhausted = False
    # walk outward from zeta = 0 on each branch
    for direction in (1, -1):
        total = 0.0
        i = zero
        while 0 <= i + direction < arc.params.size:
            j = i + direction
            total += seg[min(i, j)]
            if total > budget:
                exhausted = True
                if direction > 0:
                    keep[j:] = False
                else:
                    keep[: j + 1] = False
                break
            i = j
    out = replace(arc, params=arc.params[keep], points=arc.points[keep], derivs=arc.derivs[keep],
                  second=arc.second[keep], budget_exhausted=exhausted)
    out.meta = dict(arc.meta)
    return out


def fundamental_zeta(chart: ManifoldChart, distance: float = 1e-3) -> float:
    """Smallest ``zeta > 0`` with ``|psi(zeta) - p| = distance`` (both branches)."""
    p = np.asarray(chart.saddle.point)

    def gap(z):
        pts = np.array(chart(np.array([z, -z]))).T
        return float(np.min(np.linalg.norm(pts - p, axis=1))) - distance

    hi = chart.rho
    while gap(hi) < 0:
        hi *= 2
    lo = 0.0
    return brentq(lambda z: gap(z) if z > 0 else -distance, lo, hi, xtol=1e-15)


# -- one-sidedness -------------------------------------------------------------

@dataclass
class OneSidedResult:
    """Verdict plus evidence for both rays.

    ``witness_*`` is a parameter on that ray whose point lies in K to the
    search resolution (``None`` when the ray misses K); ``g_*`` is the escape
    rate at the witness, or the smallest sampled escape rate on a ray without
    witness.
    """

    verdict: str
    witness_positive: float | None
    witness_negative: float | None
    g_positive: float
    g_negative: float
    zeta0: float
    zeta_max: float
    eta: float
    nodes: int

    @property
    def one_sided(self) -> bool:
        return self.verdict.startswith("one-sided")

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "witness_positive": self.witness_positive,
            "witness_negative": self.witness_negative,
            "g_positive": self.g_positive,
            "g_negative": self.g_negative,
            "zeta0": self.zeta0,
            "zeta_max": self.zeta_max,
        }


def _sample_in_V(chart, fil, t, scale, rounds: int = 30):
    """V-membership of ``psi(scale * t)``, refining chords that cross the box.

    A chord between two outside samples that passes through the box ``[-R, R]^2``
    may hide an excursion of the curve into V; such chords are bisected until
    they are shorter than ``R / 64``.
    """
    R, in_V = fil.R, fil.in_V
    x, y = chart(t * scale)
    for _ in range(rounds):
        P = np.c_[x, y]
        inside = np.asarray(in_V(x, y)) & np.isfinite(x) & np.isfinite(y)
        A, B = P[:-1], P[1:]
        finite = np.isfinite(A).all(1) & np.isfinite(B).all(1)
        lo, hi = np.minimum(A, B), np.maximum(A, B)
        hits = finite & (hi[:, 0] >= -R) & (lo[:, 0] <= R) & (hi[:, 1] >= -R) & (lo[:, 1] <= R)
        long_ = np.linalg.norm(B - A, axis=1) > R / 64
        bad = hits & long_ & ~(inside[:-1] & inside[1:])
        bad &= np.abs(np.diff(t)) > 1e-15 * np.abs(t[:-1])
        if not bad.any():
            break
        tm = 0.5 * (t[:-1][bad] + t[1:][bad])
        xm, ym = chart(tm * scale)
        order = np.argsort(np.r_[t, tm], kind="stable")
        t = np.r_[t, tm][order]
        x = np.r_[x, xm][order]
        y = np.r_[y, ym][order]
    inside = np.asarray(in_V(x, y)) & np.isfinite(x) & np.isfinite(y)
    return t, inside


def _zero_witness(chart: ManifoldChart, fil, lo: float, hi: float, n: int = 512,
                  rel_width: float = 1e-11, max_nodes: int = 20000):
    """Depth-first search for ``t`` in ``[lo, hi]`` with ``psi(mu**k t)`` in V for all k.

    Since ``F^k o psi(t) = psi(mu**k t)`` and points of the manifold never
    visit V-, ``psi(t)`` lies in K exactly when every ``psi(mu**k t)`` stays in
    V.  Each node keeps the samples of ``psi(mu**k t)`` that fall in V,
    widened to the neighbouring samples, and descends one level.  Returns
    ``(witness or None, nodes visited)``.
    """
    mu = chart.mu
    stack = [(lo, hi, 0)]
    nodes = 0
    while stack:
        a, b, k = stack.pop()
        nodes += 1
        if nodes > max_nodes:
            raise Inconclusive(f"zero search exceeded {max_nodes} intervals")
        if b - a <= rel_width * max(abs(a), abs(b)):
            return 0.5 * (a + b), nodes
        if a * b > 0 and max(abs(a), abs(b)) > 1.5 * min(abs(a), abs(b)):
            t = np.sign(a) * np.geomspace(abs(a), abs(b), n)
        else:
            t = np.linspace(a, b, n)
        t, inside = _sample_in_V(chart, fil, t, mu**k)
        if not inside.any():
            continue
        edges = np.flatnonzero(np.diff(np.r_[0, inside.astype(np.int8), 0]))
        children = []
        for start, stop in zip(edges[::2], edges[1::2]):
            children.append((t[max(start - 1, 0)], t[min(stop, t.size - 1)], k + 1))
        stack.extend(reversed(children))
    return None, nodes


def one_sided_test(chart: ManifoldChart, gev: GreenEvaluator, eta: float = 1e-6,
                   zeta0: float | None = None, samples: int = 2000) -> OneSidedResult:
    """Decide which rays of the real trace meet K.

    K on an unstable chart is the zero set of ``G+ o psi`` (``G- o psi`` on a
    stable chart).  Rays are searched beyond the exclusion parameter
    ``zeta0`` (where ``|psi - p| = 1e-3``) over one fundamental domain of
    ``zeta -> mu*zeta`` (two when ``mu < 0``), which suffices because the zero
    set is invariant under that scaling.  A ray without witness must have
    sampled escape rates above ``eta``, otherwise the result is inconclusive.
    """
    G = gev.plus if chart.kind == UNSTABLE else gev.minus
    z0 = zeta0 if zeta0 is not None else fundamental_zeta(chart)
    zmax = z0 * abs(chart.mu) ** (1 if chart.mu > 0 else 2)
    found, g_vals, nodes = [], [], 0
    for sign in (1, -1):
        w, visited = _zero_witness(chart, gev.filtration, sign * z0, sign * zmax) if sign > 0 else \
            _zero_witness(chart, gev.filtration, sign * zmax, sign * z0)
        nodes += visited
        if w is not None:
            x, y = chart(np.array([w]))
            g = float(np.asarray(G(x, y))[0])
        else:
            zz = sign * np.geomspace(z0, zmax, samples)
            x, y = chart(zz)
            gg = np.asarray(G(x, y), dtype=float)
            g = float(np.nanmin(gg)) if np.isfinite(gg).any() else math.inf
            if not g > eta:
                raise Inconclusive(f"ray {sign:+d} has no K witness but escape rate {g:.3g} <= {eta:g}")
        found.append(w)
        g_vals.append(g)
    pos, neg = found[0] is not None, found[1] is not None
    if pos and neg:
        verdict = "two-sided"
    elif pos:
        verdict = "one-sided-positive"
    elif neg:
        verdict = "one-sided-negative"
    else:
        raise Inconclusive(f"no point of K on either ray between {z0:g} and {zmax:g}")
    return OneSidedResult(verdict, found[0], found[1], g_vals[0], g_vals[1], z0, zmax, eta, nodes)
