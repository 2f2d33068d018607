"""Periodic points by symbolic seeding and Newton continuation.

Fixed points of ``f^n`` are found on the scalar recurrence satisfied by the
second coordinates.  Writing the orbit of ``f = f_1 o ... o f_m`` one factor at
a time as states ``(w[i-1], w[i])``, every factor step reads

    p_j(w[i]) = eps * (w[i+1] + a_j * w[i-1]),      indices mod n*m,

at ``eps = 1``.  At ``eps = 0`` the solutions are tuples of roots of the
``p_j`` (the anti-integrable limit), one per symbol code; the batch of codes
is continued to ``eps = 1`` together.  For the Henon factor ``y**2 - a`` the
``eps`` path is the same as lowering ``a`` from ``+inf`` at fixed ``b``
(rescale ``w -> w / eps``).
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    BoundViolation,
    Collision,
    ComplexMultipliers,
    ComplexPeriodicPoint,
    NonConvergence,
    UnitModulus,
)
from .map_core import PolyDiffeo

log = logging.getLogger(__name__)

DEDUP_TOL = 1e-8
RESIDUAL_TOL = 1e-10
REAL_TOL = 1e-10


@dataclass(frozen=True)
class SymbolCode:
    """Root index per factor step; for the Henon map ``0 -> '-'``, ``1 -> '+'``."""

    bits: tuple[int, ...]
    alphabet: tuple[int, ...] = ()

    def __str__(self):
        if self.alphabet and all(k == 2 for k in self.alphabet):
            return "".join("+" if b else "-" for b in self.bits)
        return ".".join(str(b) for b in self.bits)

    def shifted(self, steps: int) -> "SymbolCode":
        k = steps % len(self.bits)
        return SymbolCode(self.bits[k:] + self.bits[:k], self.alphabet[k:] + self.alphabet[:k])


@dataclass
class PeriodicPoint:
    point: tuple[float, float]
    period_n: int
    least_period: int
    orbit: list[tuple[float, float]]
    lambda_u: complex
    lambda_s: complex
    residual: float
    code: SymbolCode | None = None
    eigvec_u: tuple[float, float] | None = None
    eigvec_s: tuple[float, float] | None = None
    extras: dict = field(default_factory=dict)

    @property
    def real_multipliers(self) -> bool:
        return abs(np.imag(self.lambda_u)) == 0 and abs(np.imag(self.lambda_s)) == 0

    @property
    def is_saddle(self) -> bool:
        return self.real_multipliers and abs(self.lambda_s) < 1 < abs(self.lambda_u)

    @property
    def flipping(self) -> bool:
        return self.real_multipliers and self.lambda_u.real < 0 and self.lambda_s.real < 0

    @property
    def flip_class(self) -> str:
        if not self.real_multipliers:
            return "complex"
        u, s = self.lambda_u.real, self.lambda_s.real
        if u > 0 and s > 0:
            return "non-flipping"
        if u < 0 and s < 0:
            return "flipping"
        return "mixed"

    def orbit_key(self) -> tuple:
        rep = min(self.orbit)
        return (self.least_period, rep)


@dataclass(frozen=True)
class MultiplierProduct:
    lambda_u_n: float
    lambda_s_n: float
    eigvec_u: tuple[float, float]
    eigvec_s: tuple[float, float]
    period: int


@dataclass
class ContinuationOptions:
    steps: int = 32
    max_halvings: int = 12
    newton_iters: int = 8
    final_iters: int = 40
    dedup_tol: float = DEDUP_TOL


# -- continuation ------------------------------------------------------------

def _step_factors(f: PolyDiffeo, n: int):
    m = len(f.factors)
    # step i applies f_{m - (i mod m)}, i.e. factors[m-1-(i mod m)]
    return [f.factors[m - 1 - (i % m)] for i in range(n * m)]


def _factor_roots(fac) -> np.ndarray:
    roots = np.roots(np.asarray(fac.coeffs[::-1], dtype=float))
    roots = np.where(np.abs(roots.imag) < 1e-12 * (1 + np.abs(roots.real)), roots.real, roots)
    order = np.lexsort((roots.imag, roots.real))
    return roots[order]


class _Recurrence:
    """Batched residual/Jacobian of the cyclic second-coordinate recurrence."""

    def __init__(self, steps):
        self.steps = steps
        self.N = len(steps)
        self.shear = np.array([fac.shear for fac in steps])

    def residual(self, W, eps):
        N = self.N
        out = np.empty_like(W)
        for i, fac in enumerate(self.steps):
            out[:, i] = fac.p(W[:, i]) - eps * (W[:, (i + 1) % N] + fac.shear * W[:, (i - 1) % N])
        return out

    def deps(self, W):
        N = self.N
        out = np.empty_like(W)
        for i, fac in enumerate(self.steps):
            out[:, i] = -(W[:, (i + 1) % N] + fac.shear * W[:, (i - 1) % N])
        return out

    def jacobian(self, W, eps):
        C, N = W.shape
        J = np.zeros((C, N, N), dtype=W.dtype)
        for i, fac in enumerate(self.steps):
            J[:, i, i] += fac.dp(W[:, i])
            J[:, i, (i + 1) % N] += -eps
            J[:, i, (i - 1) % N] += -eps * fac.shear
        return J


def _solve(J, rhs):
    with np.errstate(all="ignore"):
        try:
            return np.linalg.solve(J, rhs[..., None])[..., 0]
        except np.linalg.LinAlgError:
            out = np.full_like(rhs, np.nan)
            for k in range(J.shape[0]):
                try:
                    out[k] = np.linalg.solve(J[k], rhs[k])
                except np.linalg.LinAlgError:
                    pass
            return out


def _newton(rec, W, eps, iters, tol):
    """Newton corrector on a batch; returns (W, converged mask)."""
    ok = np.zeros(W.shape[0], dtype=bool)
    W = W.copy()
    for _ in range(iters):
        active = ~ok
        if not active.any():
            break
        Wa = W[active]
        dW = _solve(rec.jacobian(Wa, eps), -rec.residual(Wa, eps))
        Wa = Wa + dW
        W[active] = Wa
        scale = 1.0 + np.max(np.abs(Wa), axis=1)
        with np.errstate(invalid="ignore"):
            done = np.max(np.abs(dW), axis=1) < tol * scale
        idx = np.flatnonzero(active)
        ok[idx[done]] = True
    finite = np.all(np.isfinite(W), axis=1)
    return W, ok & finite


def _continue(rec, W, eps0, eps1, opts, depth=0):
    """Continue every row of ``W`` from ``eps0`` to ``eps1``.

    Rows that fail are retried with the interval halved, up to
    ``opts.max_halvings`` times.  Returns ``(W, ok)``.
    """
    Wp = W
    with np.errstate(all="ignore"):
        tangent = _solve(rec.jacobian(W, eps0), -rec.deps(W))
        pred = W + (eps1 - eps0) * tangent
    pred = np.where(np.isfinite(pred), pred, W)
    Wn, ok = _newton(rec, pred, eps1, opts.newton_iters, 1e-11)
    if ok.all() or depth >= opts.max_halvings:
        return Wn, ok
    bad = np.flatnonzero(~ok)
    mid = 0.5 * (eps0 + eps1)
    Wm, okm = _continue(rec, Wp[bad], eps0, mid, opts, depth + 1)
    W2, ok2 = _continue(rec, Wm[okm], mid, eps1, opts, depth + 1)
    sub = bad[okm]
    Wn[sub] = W2
    ok[sub] = ok2
    return Wn, ok


def _run_path(rec, W0, opts, detour=0.0):
    """Continue from ``eps = 0`` to ``eps = 1``.

    A nonzero ``detour`` bends the path into the complex plane,
    ``eps(t) = t + i*detour*t*(1-t)``, so folds of the real path are avoided.
    """
    W = W0
    ok_all = np.ones(W.shape[0], dtype=bool)
    t = np.linspace(0.0, 1.0, opts.steps + 1)
    grid = t + 1j * detour * t * (1 - t) if detour else t
    for e0, e1 in zip(grid[:-1], grid[1:]):
        live = np.flatnonzero(ok_all)
        if live.size == 0:
            break
        Wl, ok = _continue(rec, W[live], e0, e1, opts)
        W = W.copy()
        W[live] = Wl
        ok_all[live[~ok]] = False
    live = np.flatnonzero(ok_all)
    if live.size:
        Wl, ok = _newton(rec, W[live], 1.0, opts.final_iters, 1e-15)
        # the tight tolerance may stall at rounding level; accept small residuals
        res = np.max(np.abs(rec.residual(Wl, 1.0)), axis=1)
        W[live] = Wl
        ok_all[live] = np.isfinite(res) & (res < 1e-11 * (1 + np.max(np.abs(Wl), axis=1)))
    return W, ok_all


def _codes_and_seeds(f: PolyDiffeo, n: int):
    steps = _step_factors(f, n)
    roots = [_factor_roots(fac) for fac in steps]
    alphabet = tuple(len(r) for r in roots)
    codes = [SymbolCode(tuple(c), alphabet) for c in itertools.product(*[range(k) for k in alphabet])]
    seeds = np.array([[roots[i][b] for i, b in enumerate(code.bits)] for code in codes])
    return steps, codes, seeds


def solve_codes(f: PolyDiffeo, n: int, opts: ContinuationOptions | None = None):
    """Continue every symbol code of length ``n`` (in factor steps ``n*m``).

    Returns ``(codes, W, status)`` where ``status[k]`` is ``"ok"``,
    ``"complex"`` or ``"failed"``.
    """
    opts = opts or ContinuationOptions()
    steps, codes, seeds = _codes_and_seeds(f, n)
    rec = _Recurrence(steps)
    real_rows = np.flatnonzero(np.all(np.isreal(seeds), axis=1))
    cplx_rows = np.setdiff1d(np.arange(len(codes)), real_rows)
    W = np.zeros(seeds.shape, dtype=complex)
    status = np.array(["failed"] * len(codes), dtype=object)

    if real_rows.size:
        Wr, ok = _run_path(rec, seeds[real_rows].real.astype(float), opts)
        W[real_rows] = Wr
        status[real_rows[ok]] = "ok"
        retry = real_rows[~ok]
    else:
        retry = np.array([], dtype=int)
    # real continuation failed (fold on the path) or no real seed: complex arithmetic
    todo = np.concatenate([retry, cplx_rows]).astype(int)
    if todo.size:
        Wc, ok = _run_path(rec, seeds[todo].astype(complex), opts, detour=0.25)
        W[todo] = Wc
        imag = np.max(np.abs(Wc.imag), axis=1)
        is_real = ok & (imag < REAL_TOL)
        status[todo[is_real]] = "ok"
        status[todo[ok & ~is_real]] = "complex"
    return codes, W, status, steps


# -- periodic points ---------------------------------------------------------

def _orbit_states(W, m):
    """Composite-orbit points ``(w[k*m-1], w[k*m])`` for every row."""
    N = W.shape[1]
    idx = np.arange(0, N, m)
    xs = W[:, (idx - 1) % N]
    ys = W[:, idx]
    return xs, ys


def _eig2(M, det=None):
    """Eigenvalues of 2x2 matrices, larger modulus first (stable formula).

    Pass ``det`` when it is known exactly: for long orbits the entries of
    ``M`` are huge and the determinant computed from them loses all digits.
    """
    tr = M[..., 0, 0] + M[..., 1, 1]
    if det is None:
        det = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    disc = tr * tr - 4 * det
    if np.all(disc >= 0):
        sq = np.sqrt(disc)
        big = 0.5 * (tr + np.copysign(sq, tr))
        small = np.where(big != 0, det / np.where(big != 0, big, 1), 0.0)
        return big, small
    sq = np.sqrt(disc.astype(complex))
    big = 0.5 * (tr + np.where(np.real(tr) >= 0, sq, -sq))
    small = det / big
    return big, small


def _eigvec(M, lam):
    a, b, c, d = M[0, 0], M[0, 1], M[1, 0], M[1, 1]
    v1 = np.array([b, lam - a])
    v2 = np.array([lam - d, c])
    v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
    v = v / np.linalg.norm(v)
    if v[0] < 0 or (v[0] == 0 and v[1] < 0):
        v = -v
    return float(v[0]), float(v[1])


def orbit_matrix(f: PolyDiffeo, orbit) -> np.ndarray:
    """Ordered product ``Df(p_{L-1}) ... Df(p_0)`` along an orbit."""
    M = np.eye(2)
    for x, y in orbit:
        M = f.jacobian(x, y) @ M
    return M


def _least_period(xs, ys, tol):
    n = xs.shape[0]
    for k in range(1, n + 1):
        if n % k:
            continue
        if max(abs(xs[k % n] - xs[0]), abs(ys[k % n] - ys[0])) < tol:
            return k
    return n


def orbit_residual(f: PolyDiffeo, orbit) -> float:
    """Largest one-step closure defect ``|f(p_k) - p_{k+1}|`` around an orbit."""
    pts = np.asarray(orbit, dtype=float)
    fx, fy = f.eval(pts[:, 0], pts[:, 1])
    nxt = np.roll(pts, -1, axis=0)
    return float(np.max(np.hypot(fx - nxt[:, 0], fy - nxt[:, 1])))


def make_periodic_point(f: PolyDiffeo, orbit_pts, n: int, code=None) -> PeriodicPoint:
    """Assemble a :class:`PeriodicPoint` from an ``n``-cycle of points."""
    xs = np.array([p[0] for p in orbit_pts], dtype=float)
    ys = np.array([p[1] for p in orbit_pts], dtype=float)
    L = _least_period(xs, ys, DEDUP_TOL)
    orbit = [(float(xs[k]), float(ys[k])) for k in range(L)]
    M = orbit_matrix(f, orbit)
    big, small = _eig2(M, f.determinant ** L)
    big, small = complex(big), complex(small)
    lam_u = big.real if big.imag == 0 else big
    lam_s = small.real if small.imag == 0 else small
    vu = vs = None
    if isinstance(lam_u, float) and isinstance(lam_s, float):
        vu = _eigvec(M, lam_u)
        vs = _eigvec(M, lam_s)
    return PeriodicPoint(
        point=orbit[0],
        period_n=n,
        least_period=L,
        orbit=orbit,
        lambda_u=lam_u,
        lambda_s=lam_s,
        residual=orbit_residual(f, orbit),
        code=code,
        eigvec_u=vu,
        eigvec_s=vs,
    )


def find_fixed_points(f: PolyDiffeo, n: int, opts: ContinuationOptions | None = None) -> list[PeriodicPoint]:
    """All fixed points of ``f^n``, one per symbol code.

    Raises :class:`NonConvergence`, :class:`ComplexPeriodicPoint` or
    :class:`Collision` when the ``d**n`` codes do not continue to ``d**n``
    distinct real points.  Output is sorted by (least period, orbit
    representative, point).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    opts = opts or ContinuationOptions()
    codes, W, status, steps = solve_codes(f, n, opts)
    for k, st in enumerate(status):
        if st == "failed":
            raise NonConvergence(str(codes[k]), "continuation did not reach eps=1")
    for k, st in enumerate(status):
        if st == "complex":
            raise ComplexPeriodicPoint(str(codes[k]), tuple(W[k, :2]))

    W = W.real
    m = len(f.factors)
    xs, ys = _orbit_states(W, m)
    pts = np.column_stack([xs[:, 0], ys[:, 0]])
    tree = cKDTree(pts)
    pairs = sorted(tree.query_pairs(opts.dedup_tol, p=np.inf))
    if pairs:
        i, j = pairs[0]
        raise Collision(str(codes[i]), str(codes[j]), tuple(pts[i]))

    out = []
    for k, code in enumerate(codes):
        orbit_pts = list(zip(xs[k], ys[k]))
        pp = make_periodic_point(f, orbit_pts, n, code)
        out.append(pp)
    out.sort(key=lambda p: (p.least_period, min(p.orbit), p.point))
    return out


def periodic_orbits(points: list[PeriodicPoint]) -> list[PeriodicPoint]:
    """One representative per orbit (the point listed first in the orbit)."""
    seen = {}
    for p in points:
        key = (p.least_period, _round_key(min(p.orbit)))
        seen.setdefault(key, p)
    return list(seen.values())


def _round_key(pt):
    return (round(pt[0], 7), round(pt[1], 7))


def multipliers(f: PolyDiffeo, p: PeriodicPoint) -> MultiplierProduct:
    """Multipliers of ``Df^L`` over the least period ``L`` of ``p``."""
    M = orbit_matrix(f, p.orbit)
    big, small = _eig2(M, f.determinant ** p.least_period)
    ev = (complex(big), complex(small))
    if ev[0].imag != 0 or ev[1].imag != 0:
        raise ComplexMultipliers(p.point, ev)
    lu, ls = ev[0].real, ev[1].real
    if abs(abs(lu) - 1) < 1e-8 or abs(abs(ls) - 1) < 1e-8:
        raise UnitModulus(p.point, (lu, ls))
    return MultiplierProduct(lu, ls, _eigvec(M, lu), _eigvec(M, ls), p.least_period)


@dataclass
class BoundsReport:
    degree: int
    rows: list[dict]
    violations: list[dict]

    @property
    def ok(self) -> bool:
        return not self.violations


def check_bounds(points: list[PeriodicPoint], d: int, raise_on_violation: bool = False) -> BoundsReport:
    """Strict ``|lam_s| < d**-n`` and ``|lam_u| > d**n`` per orbit of least period n.

    Margins are reported as log ratios (positive means the bound holds).  The
    ``refined`` flag marks orbits meeting the ``d**(2n)`` bounds.
    """
    rows, bad = [], []
    for p in periodic_orbits(points):
        n = p.least_period
        if not p.real_multipliers:
            row = {"orbit": p.orbit, "least_period": n, "ok": False, "reason": "complex multipliers"}
            rows.append(row)
            bad.append(row)
            continue
        lu, ls = abs(p.lambda_u), abs(p.lambda_s)
        margin_u = math.log(lu) - n * math.log(d)
        margin_s = -n * math.log(d) - math.log(ls)
        row = {
            "orbit": p.orbit,
            "code": str(p.code) if p.code is not None else None,
            "least_period": n,
            "lambda_u": p.lambda_u,
            "lambda_s": p.lambda_s,
            "margin_u": margin_u,
            "margin_s": margin_s,
            "ok": lu > d**n and ls < d ** (-n),
            "refined_u": lu > d ** (2 * n),
            "refined_s": ls < d ** (-2 * n),
        }
        rows.append(row)
        if not row["ok"]:
            bad.append(row)
    rep = BoundsReport(d, rows, bad)
    if bad and raise_on_violation:
        raise BoundViolation(bad)
    return rep


def flipping_flags(points: list[PeriodicPoint]) -> list[tuple[PeriodicPoint, str]]:
    """Per-orbit sign class: non-flipping, flipping or mixed."""
    return [(p, p.flip_class) for p in periodic_orbits(points)]
