"""Real polynomial diffeomorphisms of the plane in composition normal form.

A map is stored as ``f = f_1 o ... o f_m`` with elementary factors

    f_j(x, y) = (y, p_j(y) - a_j * x),

so ``f_m`` is applied first.  Everything here works on numpy scalars or arrays
of either real or complex dtype; the dtype of the input decides the arithmetic.

The quadratic Henon family is exposed only in the chart
``(x, y) -> (y, y**2 - a - b*x)``.  The classical form
``f_ab(x, y) = (a - b*y - x**2, x)`` is conjugate to it by the involution
``L(x, y) = (-y, -x)``; use :func:`to_classical_chart` to move points back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

ESCAPE_LIMIT = 1e150


class MapSpecError(ValueError):
    """Invalid map definition (degenerate factor, bad spec file, ...)."""


def horner(coeffs: Sequence[float], t):
    """Evaluate ``sum(coeffs[k] * t**k)``; ``coeffs`` are in ascending order."""
    acc = np.zeros_like(t) + coeffs[-1]
    for c in reversed(coeffs[:-1]):
        acc = acc * t + c
    return acc


def _poly_derivative(coeffs: Sequence[float]) -> tuple[float, ...]:
    return tuple(k * coeffs[k] for k in range(1, len(coeffs)))


@dataclass(frozen=True)
class ElementaryFactor:
    """One factor ``(x, y) -> (y, p(y) - shear * x)``.

    ``coeffs`` lists the coefficients of ``p`` in ascending order.
    """

    coeffs: tuple[float, ...]
    shear: float

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        while len(coeffs) > 1 and coeffs[-1] == 0.0:
            coeffs = coeffs[:-1]
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "shear", float(self.shear))
        if len(coeffs) - 1 < 2:
            raise MapSpecError(f"factor polynomial must have degree >= 2, got {coeffs}")
        if self.shear == 0.0 or not math.isfinite(self.shear):
            raise MapSpecError("shear constant must be finite and nonzero")
        if not all(math.isfinite(c) for c in coeffs):
            raise MapSpecError("non-finite polynomial coefficient")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> float:
        return self.coeffs[-1]

    @property
    def dcoeffs(self) -> tuple[float, ...]:
        return _poly_derivative(self.coeffs)

    @property
    def ddcoeffs(self) -> tuple[float, ...]:
        return _poly_derivative(self.dcoeffs)

    def p(self, t):
        return horner(self.coeffs, t)

    def dp(self, t):
        return horner(self.dcoeffs, t)

    def ddp(self, t):
        d2 = self.ddcoeffs
        return horner(d2, t) if d2 else np.zeros_like(t)

    def apply(self, x, y):
        return y, self.p(y) - self.shear * x

    def apply_inverse(self, x, y):
        return (self.p(x) - y) / self.shear, x

    def swapped_inverse(self) -> "ElementaryFactor":
        """The factor ``nu o f^-1 o nu`` with ``nu(x, y) = (y, x)``."""
        return ElementaryFactor(tuple(c / self.shear for c in self.coeffs), 1.0 / self.shear)


@dataclass(frozen=True)
class PolyDiffeo:
    """Composition ``factors[0] o factors[1] o ... o factors[-1]``.

    Immutable; safe to share between threads.
    """

    factors: tuple[ElementaryFactor, ...]
    family: str = "composition"
    params: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if not self.factors:
            raise MapSpecError("a map needs at least one factor")

    # -- structure -----------------------------------------------------
    @property
    def degree(self) -> int:
        return math.prod(fac.degree for fac in self.factors)

    @property
    def determinant(self) -> float:
        # each factor has Jacobian [[0, 1], [-a_j, p_j']] with determinant a_j
        return math.prod(fac.shear for fac in self.factors)

    @property
    def orientation(self) -> int:
        return 1 if self.determinant > 0 else -1

    @property
    def epsilon(self) -> int:
        return epsilon_sign(self)

    @property
    def leading_coefficient(self) -> float:
        """Leading coefficient ``C`` of ``y -> C*y**d`` governing escape in V+."""
        c = 1.0
        for fac in reversed(self.factors):
            c = fac.leading * c ** fac.degree
        return c

    # -- evaluation ----------------------------------------------------
    def __call__(self, x, y):
        return self.eval(x, y)

    def eval(self, x, y):
        """Apply ``f``; escaped coordinates come back as ``inf``."""
        x, y = _as_pair(x, y)
        with np.errstate(over="ignore", invalid="ignore"):
            for fac in reversed(self.factors):
                x, y = fac.apply(x, y)
                x, y = _mark_escaped(x, y)
        return x, y

    def eval_inverse(self, x, y):
        x, y = _as_pair(x, y)
        with np.errstate(over="ignore", invalid="ignore"):
            for fac in self.factors:
                x, y = fac.apply_inverse(x, y)
                x, y = _mark_escaped(x, y)
        return x, y

    def iterate(self, x, y, n: int):
        """``f^n`` for ``n >= 0`` and ``f^{-|n|}`` for ``n < 0``."""
        step = self.eval if n >= 0 else self.eval_inverse
        for _ in range(abs(n)):
            x, y = step(x, y)
        return x, y

    def jacobian(self, x, y):
        """Jacobian matrix of ``f`` at ``(x, y)``; shape ``(..., 2, 2)``."""
        x, y = _as_pair(x, y)
        shape = np.broadcast(x, y).shape
        dtype = np.result_type(x, y, float)
        jac = np.broadcast_to(np.eye(2, dtype=dtype), shape + (2, 2)).copy()
        for fac in reversed(self.factors):
            step = np.zeros(shape + (2, 2), dtype=dtype)
            step[..., 0, 1] = 1.0
            step[..., 1, 0] = -fac.shear
            step[..., 1, 1] = fac.dp(y)
            jac = step @ jac
            x, y = fac.apply(x, y)
        return jac

    def jet(self, pt, d1, d2=None):
        """Push a curve jet ``(point, first, second derivative)`` through ``f``.

        Each argument is a pair of arrays ``(x, y)``.  Returns the image jet in
        the same layout; ``d2`` may be omitted when only first derivatives are
        needed.
        """
        (x, y), (dx, dy) = pt, d1
        ddx, ddy = d2 if d2 is not None else (None, None)
        with np.errstate(over="ignore", invalid="ignore"):
            for fac in reversed(self.factors):
                dpy = fac.dp(y)
                if ddx is not None:
                    ddx, ddy = ddy, fac.ddp(y) * dy * dy + dpy * ddy - fac.shear * ddx
                dx, dy = dy, dpy * dy - fac.shear * dx
                x, y = fac.apply(x, y)
        if d2 is None:
            return (x, y), (dx, dy)
        return (x, y), (dx, dy), (ddx, ddy)

    # -- derived maps --------------------------------------------------
    def swapped_inverse(self) -> "PolyDiffeo":
        """``nu o f^-1 o nu`` with ``nu(x, y) = (y, x)``, again in normal form.

        Stable objects of ``f`` are unstable objects of this map, read through
        the coordinate swap.
        """
        return PolyDiffeo(
            tuple(fac.swapped_inverse() for fac in reversed(self.factors)),
            family=f"swapped-inverse({self.family})",
        )

    def compose(self, other: "PolyDiffeo") -> "PolyDiffeo":
        """``self o other``."""
        return PolyDiffeo(self.factors + other.factors)

    def power(self, n: int) -> "PolyDiffeo":
        if n < 1:
            raise ValueError("power needs n >= 1")
        return PolyDiffeo(self.factors * n, family=f"{self.family}^{n}", params=dict(self.params))

    def describe(self) -> str:
        if self.family == "henon":
            return f"henon(a={self.params['a']!r}, b={self.params['b']!r})"
        return f"composition of {len(self.factors)} factor(s), degree {self.degree}"


def _as_pair(x, y):
    x = np.asarray(x)
    y = np.asarray(y)
    if x.dtype.kind not in "fc":
        x = x.astype(float)
    if y.dtype.kind not in "fc":
        y = y.astype(float)
    return x, y


def _mark_escaped(x, y):
    bad = ~(np.abs(x) <= ESCAPE_LIMIT) | ~(np.abs(y) <= ESCAPE_LIMIT)
    if np.any(bad):
        x = np.where(bad, np.inf, x)
        y = np.where(bad, np.inf, y)
    return x, y


def escaped(x, y):
    """Boolean mask of points carrying the escape marker."""
    return ~np.isfinite(np.asarray(x)) | ~np.isfinite(np.asarray(y))


def henon(a: float, b: float) -> PolyDiffeo:
    """Henon map ``(x, y) -> (y, y**2 - a - b*x)`` (degree 2, determinant b)."""
    if b == 0:
        raise MapSpecError("b = 0 gives a non-invertible map")
    return PolyDiffeo(
        (ElementaryFactor((-float(a), 0.0, 1.0), float(b)),),
        family="henon",
        params={"a": float(a), "b": float(b)},
    )


def composition(factors: Iterable[tuple[Sequence[float], float]]) -> PolyDiffeo:
    """Build ``f_1 o ... o f_m`` from ``(coeffs, shear)`` pairs, outermost first."""
    return PolyDiffeo(tuple(ElementaryFactor(tuple(c), a) for c, a in factors))


def epsilon_sign(f: PolyDiffeo) -> int:
    """Sign of the normalized leading coefficient.

    Conjugating a factor by ``(x, y) -> (s*x, s*y)`` scales its leading
    coefficient by ``s**(d-1)``; for even ``d`` the sign can always be made
    ``+1``, for odd ``d`` it is invariant.  The sign is multiplicative over
    odd-degree factors and forced to ``+1`` once any factor has even degree.
    """
    if f.degree % 2 == 0:
        return 1
    sign = 1
    for fac in f.factors:
        sign *= 1 if fac.leading > 0 else -1
    return sign


def to_classical_chart(x, y):
    """Move a point from the normal-form chart to ``f_ab(x, y) = (a - b*y - x**2, x)``."""
    return -np.asarray(y), -np.asarray(x)


from_classical_chart = to_classical_chart  # L is an involution


# -- plain-text map specification ----------------------------------------

def parse_map_spec(items: dict) -> PolyDiffeo:
    """Build a map from ``key=value`` items.

    ``family=henon`` takes ``a`` and ``b``.  ``family=composition`` takes
    ``factors=m`` and, for each ``j`` in ``1..m``, ``factor.j.coeffs`` (comma
    separated, ascending powers) and ``factor.j.shear``.
    """
    items = {str(k).strip().lower(): str(v).strip() for k, v in items.items()}
    family = items.get("family", "henon")
    try:
        if family == "henon":
            return henon(float(items["a"]), float(items["b"]))
        if family == "composition":
            m = int(items["factors"])
            pairs = []
            for j in range(1, m + 1):
                coeffs = [float(c) for c in items[f"factor.{j}.coeffs"].split(",") if c.strip()]
                pairs.append((coeffs, float(items[f"factor.{j}.shear"])))
            return composition(pairs)
    except KeyError as exc:
        raise MapSpecError(f"missing map key {exc.args[0]!r}") from None
    except ValueError as exc:
        if isinstance(exc, MapSpecError):
            raise
        raise MapSpecError(str(exc)) from None
    raise MapSpecError(f"unknown map family {family!r}")


def format_map_spec(f: PolyDiffeo) -> str:
    if f.family == "henon":
        return f"family=henon\na={f.params['a']!r}\nb={f.params['b']!r}\n"
    lines = ["family=composition", f"factors={len(f.factors)}"]
    for j, fac in enumerate(f.factors, start=1):
        lines.append(f"factor.{j}.coeffs=" + ",".join(repr(c) for c in fac.coeffs))
        lines.append(f"factor.{j}.shear={fac.shear!r}")
    return "\n".join(lines) + "\n"
