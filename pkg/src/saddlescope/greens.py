"""Escape filtration, Green's functions and K / K+ / K- classification.

For a map in normal form the plane splits into the box ``V`` and the end
regions ``V+ = {|y| >= max(R, |x|)}``, ``V- = {|x| >= max(R, |y|)}``.  Once a
point is in ``V+`` its forward orbit escapes, so

    G+(p) = lim d**-n log+ |f^n p|

can be read off after finitely many steps.  ``G-`` is ``G+`` of the swapped
inverse ``nu f^-1 nu`` evaluated at ``nu(p)``.

Grid classification is set-valued: a cell is kept in the K+ (K-, K) class
when the tightest box enclosing its image (preimage) still meets a kept cell,
iterated to a fixed point.  The result is an outer approximation, so every
cell meeting K is marked K at every resolution.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FiltrationError, Undecided
from .map_core import ElementaryFactor, PolyDiffeo

R_BIG = 1e8
N_MAX = 200
ZERO_TOL = 1e-12

CLASS_K = "K"
CLASS_KPLUS = "K+"
CLASS_KMINUS = "K-"
CLASS_ESCAPE = "escape"
CLASS_UNDECIDED = "undecided"
CLASS_CODES = {CLASS_ESCAPE: 0, CLASS_KPLUS: 1, CLASS_KMINUS: 2, CLASS_K: 3, CLASS_UNDECIDED: 4}
CLASS_NAMES = {v: k for k, v in CLASS_CODES.items()}


@dataclass(frozen=True)
class Filtration:
    R: float
    validated_samples: int = 0

    def in_V(self, x, y):
        return (np.abs(x) <= self.R) & (np.abs(y) <= self.R)

    def in_Vplus(self, x, y):
        ay = np.abs(y)
        return (ay >= self.R) & (ay >= np.abs(x))

    def in_Vminus(self, x, y):
        ax = np.abs(x)
        return (ax >= self.R) & (ax >= np.abs(y))

    def region(self, x, y):
        """0 for V, +1 for V+ (y>0), +2 for V+ (y<0), -1 for V-."""
        x, y = np.asarray(x), np.asarray(y)
        out = np.where(self.in_V(x, y), 0, -1)
        vp = self.in_Vplus(x, y) & ~self.in_V(x, y)
        out = np.where(vp & (np.real(y) > 0), 1, out)
        out = np.where(vp & (np.real(y) < 0), 2, out)
        return out


def factor_radius(fac: ElementaryFactor) -> float:
    """Smallest R >= 1 with ``|p(y) - a x| >= 2|y|`` whenever ``|y| >= R >= |x|``.

    Lower bound ``|c_d| r**d - sum_{k<d} |c_k| r**k - (|a| + 2) r``; it has a
    single positive root by Descartes' rule and is positive beyond it.
    """
    c = np.abs(np.asarray(fac.coeffs, dtype=float))
    q = -c.copy()
    q[-1] = c[-1]
    q[1] -= abs(fac.shear) + 2.0
    roots = np.roots(q[::-1])
    real = roots[np.abs(roots.imag) < 1e-9].real
    r = float(real.max()) if real.size else 1.0
    return max(1.0, r * (1 + 1e-12))


def radius_bound(f: PolyDiffeo) -> float:
    g = f.swapped_inverse()
    return max(factor_radius(fac) for fac in f.factors + g.factors)


def _validate(f: PolyDiffeo, R: float, n_samples: int, rng) -> bool:
    """Sample the region boundaries and test the filtration inclusions."""
    k = n_samples // 4
    t = rng.uniform(-1, 1, k)
    s = np.exp(rng.uniform(0, math.log(50.0), k))
    sign = rng.choice([-1.0, 1.0], k)
    # boundary of V+ : horizontal edges and the diagonals, plus interior
    xb = np.concatenate([t * R, s * R * sign, t * s * R])
    yb = np.concatenate([np.full(k, R) * sign, s * R * rng.choice([-1.0, 1.0], k), s * R * sign])
    fx, fy = f.eval(xb, yb)
    fil = Filtration(R)
    if not np.all(fil.in_Vplus(fx, fy)):
        return False
    # V- under the inverse is V+ of the swapped inverse
    g = f.swapped_inverse()
    gx, gy = g.eval(xb, yb)
    if not np.all(fil.in_Vplus(gx, gy)):
        return False
    # f(V u V+) inside V u V+ : test on the boundary of V
    edge = np.concatenate([t * R, np.full(k, R) * sign])
    other = np.concatenate([np.full(k, R) * sign, t * R])
    for xs, ys in ((edge, other), (other, edge)):
        fx, fy = f.eval(xs, ys)
        if not np.all(fil.in_V(fx, fy) | fil.in_Vplus(fx, fy)):
            return False
    return True


def filtration_radius(f: PolyDiffeo, n_samples: int = 10_000, max_retries: int = 20, seed: int = 0) -> Filtration:
    """Filtration radius from coefficient bounds, validated by boundary sampling."""
    rng = np.random.default_rng(seed)
    R = radius_bound(f)
    for _ in range(max_retries):
        if _validate(f, R, n_samples, rng):
            return Filtration(R, n_samples)
        R *= 1.25
    raise FiltrationError(f"no validated filtration radius up to R={R:g}")


# -- Green's functions -------------------------------------------------------

def _tail_constant(f: PolyDiffeo) -> float:
    worst = 0.0
    for fac in f.factors:
        lower = sum(abs(c) for c in fac.coeffs[:-1]) + abs(fac.shear)
        worst = max(worst, lower / abs(fac.leading))
    return 4.0 * worst


def _green_core(f: PolyDiffeo, x, y, fil: Filtration, tol: float, n_max: int, r_big: float):
    x = np.array(x, copy=True)
    y = np.array(y, copy=True)
    shape = np.broadcast(x, y).shape
    x = np.broadcast_to(x, shape).ravel().copy()
    y = np.broadcast_to(y, shape).ravel().copy()
    d = f.degree
    lead_shift = math.log(abs(f.leading_coefficient)) / (d - 1)
    tail_c = _tail_constant(f)
    out = np.full(x.shape, np.nan)
    steps = np.zeros(x.shape, dtype=int)
    active = np.arange(x.size)
    cap = n_max + 400
    for k in range(cap + 1):
        if active.size == 0:
            break
        xa, ya = x[active], y[active]
        ay = np.abs(ya)
        in_plus = fil.in_Vplus(xa, ya)
        far = in_plus & (ay > r_big)
        if far.any():
            scale = d ** (-float(k))
            tail = scale * tail_c / ay[far] / (d - 1)
            done = tail < tol
            if done.any():
                sel = active[far][done]
                out[sel] = scale * (np.log(ay[far][done]) + lead_shift)
                steps[sel] = k
            keep = np.ones(active.size, dtype=bool)
            idx = np.flatnonzero(far)[done]
            keep[idx] = False
            active, xa, ya, in_plus = active[keep], xa[keep], ya[keep], in_plus[keep]
        if k >= n_max and active.size:
            inside = fil.in_V(xa, ya)
            if inside.any():
                out[active[inside]] = 0.0
                steps[active[inside]] = k
                active, xa, ya = active[~inside], xa[~inside], ya[~inside]
        if active.size == 0 or k == cap:
            break
        nx, ny = f.eval(xa, ya)
        x[active], y[active] = nx, ny
    return out.reshape(shape), steps.reshape(shape)


def green_plus(f: PolyDiffeo, x, y, tol: float = ZERO_TOL, n_max: int = N_MAX,
               r_big: float = R_BIG, filtration: Filtration | None = None):
    """Escape rate ``G+``; exactly 0 for orbits that stay ``n_max`` steps in V.

    Works for real or complex points.  Undecided samples (cannot happen for a
    valid filtration) come back as ``nan`` for array input and raise
    :class:`Undecided` for scalar input.
    """
    fil = filtration or filtration_radius(f)
    vals, _ = _green_core(f, x, y, fil, tol, n_max, r_big)
    if np.ndim(vals) == 0:
        v = float(vals)
        if math.isnan(v):
            raise Undecided(f"G+ undecided at ({x}, {y})")
        return v
    return vals


def green_minus(f: PolyDiffeo, x, y, tol: float = ZERO_TOL, n_max: int = N_MAX,
                r_big: float = R_BIG, filtration: Filtration | None = None):
    """Escape rate of backward orbits, ``G-(x, y) = G+_g(y, x)``, ``g = nu f^-1 nu``."""
    fil = filtration or filtration_radius(f)
    return green_plus(f.swapped_inverse(), y, x, tol, n_max, r_big, fil)


class GreenEvaluator:
    """Caches the filtration and swapped inverse for repeated evaluation."""

    def __init__(self, f: PolyDiffeo, tol: float = ZERO_TOL, n_max: int = N_MAX, r_big: float = R_BIG):
        self.f = f
        self.g = f.swapped_inverse()
        self.filtration = filtration_radius(f)
        self.tol, self.n_max, self.r_big = tol, n_max, r_big

    def plus(self, x, y):
        return green_plus(self.f, x, y, self.tol, self.n_max, self.r_big, self.filtration)

    def minus(self, x, y):
        return green_plus(self.g, y, x, self.tol, self.n_max, self.r_big, self.filtration)


# -- grid classification -----------------------------------------------------

def _poly_range(fac: ElementaryFactor, lo, hi):
    """Exact range of ``p`` over ``[lo, hi]`` (elementwise)."""
    plo, phi = fac.p(lo), fac.p(hi)
    rmin, rmax = np.minimum(plo, phi), np.maximum(plo, phi)
    crit = np.roots(np.asarray(fac.dcoeffs[::-1], dtype=float))
    for c in crit[np.abs(crit.imag) < 1e-12].real:
        inside = (lo <= c) & (c <= hi)
        if inside.any():
            pc = fac.p(np.float64(c))
            rmin = np.where(inside, np.minimum(rmin, pc), rmin)
            rmax = np.where(inside, np.maximum(rmax, pc), rmax)
    return rmin, rmax


def box_image(f: PolyDiffeo, xlo, xhi, ylo, yhi):
    """Smallest axis-aligned boxes containing the images of the given boxes."""
    with np.errstate(over="ignore", invalid="ignore"):
        for fac in reversed(f.factors):
            plo, phi = _poly_range(fac, ylo, yhi)
            sx = np.array([fac.shear * xlo, fac.shear * xhi])
            nlo = plo - sx.max(axis=0)
            nhi = phi - sx.min(axis=0)
            xlo, xhi, ylo, yhi = ylo, yhi, nlo, nhi
    return xlo, xhi, ylo, yhi


@dataclass
class GreenField:
    rect: tuple[float, float, float, float]
    resolution: int
    classes: np.ndarray
    g_plus: np.ndarray | None = None
    g_minus: np.ndarray | None = None
    converged: bool = True
    rounds: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def cell_size(self) -> tuple[float, float]:
        x0, y0, x1, y1 = self.rect
        return (x1 - x0) / self.resolution, (y1 - y0) / self.resolution

    def centers(self):
        x0, y0, x1, y1 = self.rect
        hx, hy = self.cell_size
        xs = x0 + hx * (np.arange(self.resolution) + 0.5)
        ys = y0 + hy * (np.arange(self.resolution) + 0.5)
        return np.meshgrid(xs, ys, indexing="xy")

    def mask(self, name: str) -> np.ndarray:
        return self.classes == CLASS_CODES[name]

    def count(self, name: str) -> int:
        return int(np.count_nonzero(self.mask(name)))

    @property
    def k_mask(self) -> np.ndarray:
        return self.mask(CLASS_K)

    @property
    def kplus_mask(self) -> np.ndarray:
        return self.mask(CLASS_K) | self.mask(CLASS_KPLUS)

    @property
    def kminus_mask(self) -> np.ndarray:
        return self.mask(CLASS_K) | self.mask(CLASS_KMINUS)

    def cell_of(self, x, y):
        """(row, col) of the cell containing a point, or None outside the grid."""
        x0, y0, x1, y1 = self.rect
        hx, hy = self.cell_size
        j = int(math.floor((x - x0) / hx))
        i = int(math.floor((y - y0) / hy))
        if 0 <= i < self.resolution and 0 <= j < self.resolution:
            return i, j
        return None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "Gplus", "Gminus", "class"])
        X, Y = self.centers()
        gp = self.g_plus if self.g_plus is not None else np.full(X.shape, np.nan)
        gm = self.g_minus if self.g_minus is not None else np.full(X.shape, np.nan)
        for i in range(self.resolution):
            for j in range(self.resolution):
                w.writerow([f"{X[i, j]:.12g}", f"{Y[i, j]:.12g}", f"{gp[i, j]:.12g}",
                            f"{gm[i, j]:.12g}", CLASS_NAMES[int(self.classes[i, j])]])
        return buf.getvalue()

    def to_rle(self) -> str:
        """Run-length text: header line, then one line per row of ``count:class`` runs."""
        x0, y0, x1, y1 = self.rect
        lines = [f"# rle rect={x0!r},{y0!r},{x1!r},{y1!r} resolution={self.resolution}"]
        for row in self.classes:
            runs = []
            start = 0
            for k in range(1, len(row) + 1):
                if k == len(row) or row[k] != row[start]:
                    runs.append(f"{k - start}:{CLASS_NAMES[int(row[start])]}")
                    start = k
            lines.append(" ".join(runs))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_rle(cls, text: str) -> "GreenField":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = dict(tok.split("=", 1) for tok in lines[0].lstrip("# ").split()[1:])
        rect = tuple(float(v) for v in head["rect"].split(","))
        res = int(head["resolution"])
        rows = []
        for ln in lines[1 : res + 1]:
            row = []
            for run in ln.split():
                n, name = run.split(":", 1)
                row.extend([CLASS_CODES[name]] * int(n))
            rows.append(row)
        return cls(rect, res, np.array(rows, dtype=np.int8))


def _cell_ranges(rect, res, lo_x, hi_x, lo_y, hi_y):
    x0, y0, x1, y1 = rect
    hx, hy = (x1 - x0) / res, (y1 - y0) / res
    with np.errstate(invalid="ignore", over="ignore"):
        j0 = np.floor((lo_x - x0) / hx)
        j1 = np.floor((hi_x - x0) / hx)
        i0 = np.floor((lo_y - y0) / hy)
        i1 = np.floor((hi_y - y0) / hy)
    empty = ~np.isfinite(j0 + j1 + i0 + i1) | (j1 < 0) | (i1 < 0) | (j0 >= res) | (i0 >= res)
    clip = lambda a: np.clip(np.nan_to_num(a, nan=0, posinf=res - 1, neginf=0), 0, res - 1).astype(np.int64)
    return clip(i0), clip(i1), clip(j0), clip(j1), empty


def _hits(mask, ranges):
    """For each cell: does its target range contain a cell of ``mask``?"""
    i0, i1, j0, j1, empty = ranges
    sat = np.zeros((mask.shape[0] + 1, mask.shape[1] + 1), dtype=np.int64)
    sat[1:, 1:] = np.cumsum(np.cumsum(mask, axis=0), axis=1)
    total = sat[i1 + 1, j1 + 1] - sat[i0, j1 + 1] - sat[i1 + 1, j0] + sat[i0, j0]
    return (total > 0) & ~empty


def _fixpoint(keep, step, max_rounds):
    for r in range(1, max_rounds + 1):
        new = keep & step(keep)
        if np.array_equal(new, keep):
            return keep, True, r
        keep = new
    return keep, False, max_rounds


def _member(keys, q):
    if keys.size == 0:
        return np.zeros(q.shape, dtype=bool)
    pos = np.minimum(np.searchsorted(keys, q), keys.size - 1)
    return keys[pos] == q


def _sparse_hits(keys, ranges, res):
    i0, i1, j0, j1, empty = ranges
    out = np.zeros(i0.shape, dtype=bool)
    if i0.size == 0:
        return out
    for di in range(int((i1 - i0).max()) + 1):
        for dj in range(int((j1 - j0).max()) + 1):
            ok = (i0 + di <= i1) & (j0 + dj <= j1) & ~out
            out |= ok & _member(keys, (i0 + di) * res + (j0 + dj))
    return out & ~empty


def _cell_boxes(f, g, rect, res, I, J):
    x0, y0, x1, y1 = rect
    hx, hy = (x1 - x0) / res, (y1 - y0) / res
    xlo, ylo = x0 + hx * J, y0 + hy * I
    fwd = _cell_ranges(rect, res, *box_image(f, xlo, xlo + hx, ylo, ylo + hy))
    bx_lo, bx_hi, by_lo, by_hi = box_image(g, ylo, ylo + hy, xlo, xlo + hx)
    bwd = _cell_ranges(rect, res, by_lo, by_hi, bx_lo, bx_hi)
    return fwd, bwd


def refine_invariant_cells(f: PolyDiffeo, rect, res: int, keys: np.ndarray, levels: int, max_rounds: int = N_MAX):
    """Subdivide invariant cells ``levels`` times, pruning after each split.

    ``keys`` are flat indices ``i*res + j`` of the cells kept at resolution
    ``res``.  Returns the kept keys at resolution ``res * 2**levels``.
    """
    g = f.swapped_inverse()
    keys = np.sort(np.asarray(keys, dtype=np.int64))
    for _ in range(levels):
        I, J = np.divmod(keys, res)
        res *= 2
        keys = np.sort(np.concatenate([(2 * I + a) * res + 2 * J + b for a in (0, 1) for b in (0, 1)]))
        I, J = np.divmod(keys, res)
        fwd, bwd = _cell_boxes(f, g, rect, res, I, J)
        for _ in range(max_rounds):
            keep = _sparse_hits(keys, fwd, res) & _sparse_hits(keys, bwd, res)
            if keep.all():
                break
            keys = keys[keep]
            fwd = tuple(a[keep] for a in fwd)
            bwd = tuple(a[keep] for a in bwd)
    return keys, res


def classify_grid(f: PolyDiffeo, rect, resolution: int, n_max: int = N_MAX,
                  with_green: bool = True, filtration: Filtration | None = None,
                  refine_levels: int = 4) -> GreenField:
    """Classify the cells of a ``resolution x resolution`` grid on ``rect``.

    ``rect = (x0, y0, x1, y1)`` should contain K (any box inside V that does).
    K cells are sharpened by ``refine_levels`` rounds of subdivision: a cell
    stays K only if one of its sub-cells survives at the finest level.
    """
    fil = filtration or filtration_radius(f)
    x0, y0, x1, y1 = rect
    res = int(resolution)
    hx, hy = (x1 - x0) / res, (y1 - y0) / res
    jj, ii = np.meshgrid(np.arange(res), np.arange(res), indexing="xy")
    xlo, ylo = x0 + hx * jj, y0 + hy * ii
    xhi, yhi = xlo + hx, ylo + hy

    fwd, bwd = _cell_boxes(f, f.swapped_inverse(), (x0, y0, x1, y1), res, ii, jj)

    start = np.ones((res, res), dtype=bool)
    kplus, c1, r1 = _fixpoint(start, lambda s: _hits(s, fwd), n_max)
    kminus, c2, r2 = _fixpoint(start, lambda s: _hits(s, bwd), n_max)
    kset, c3, r3 = _fixpoint(kplus & kminus, lambda s: _hits(s, fwd) & _hits(s, bwd), n_max)
    if refine_levels > 0 and kset.any():
        ii, jj = np.nonzero(kset)
        fine, fres = refine_invariant_cells(f, (x0, y0, x1, y1), res, ii * res + jj, refine_levels, n_max)
        fi, fj = np.divmod(fine, fres)
        scale = fres // res
        kset = np.zeros_like(kset)
        kset[fi // scale, fj // scale] = True

    classes = np.full((res, res), CLASS_CODES[CLASS_ESCAPE], dtype=np.int8)
    classes[kminus] = CLASS_CODES[CLASS_KMINUS]
    # cells meeting both K+ and K- but not kept in K are reported by their forward class
    classes[kplus] = CLASS_CODES[CLASS_KPLUS]
    classes[kset] = CLASS_CODES[CLASS_K]

    field_ = GreenField((x0, y0, x1, y1), res, classes, converged=c1 and c2 and c3, rounds=max(r1, r2, r3))
    if with_green:
        X = (xlo + xhi) / 2
        Y = (ylo + yhi) / 2
        gp = green_plus(f, X, Y, n_max=n_max, filtration=fil)
        gm = green_minus(f, X, Y, n_max=n_max, filtration=fil)
        field_.g_plus, field_.g_minus = gp, gm
        # a bounded centre inside a cell the enclosure rules out is a numerics flag
        bad = np.isnan(gp) | np.isnan(gm) | ((gp == 0) & ~kplus) | ((gm == 0) & ~kminus)
        classes[bad] = CLASS_CODES[CLASS_UNDECIDED]
    field_.meta["R"] = fil.R
    return field_
