"""Command-line front end.

Every subcommand takes the map either from ``--map FILE`` (key=value lines,
optionally under a ``[map]`` section) or from ``--henon A,B``.  A ``--config
FILE`` may hold a ``[map]`` section plus one section per command whose keys
supply defaults for that command's options, e.g.::

    [map]
    family = henon
    a = 6.0
    b = 0.8

    [render]
    window = -4,-4,4,4
    grid = 256

Exit status: 0 pass, 1 check failed, 2 inconclusive, 3 usage or config error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import sys
import time
import warnings

import numpy as np

from . import __version__
from .errors import (BadBracket, DegenerateContact, FoldTrackingLost, Inconclusive,
                     RefinementFailure, SaddlescopeError)
from .greens import GreenEvaluator, classify_grid, filtration_radius
from .manifold import STABLE, UNSTABLE, StepControl, build_chart, trace
from .map_core import MapSpecError, PolyDiffeo, format_map_spec, henon, parse_map_spec
from .maxent_verify import (PASS, VerdictReport, _plain, bounds_check, maxent_check, one_sided_check,
                            verify)
from .parallel import worker_count
from .periodic import find_fixed_points
from .render import EmptySceneWarning, render_scene
from .tangency import hunt_boundary, near_contacts, non_flipping_fixed_point, raw_charts, to_json_lines

EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 3

# distance below which two traces count as touching in a figure
FIGURE_CONTACT_TOL = 1e-3


class UsageError(Exception):
    """Bad command line or configuration."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- option parsing helpers ------------------------------------------------------

def _floats(text: str, n: int | None = None, name: str = "value") -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in str(text).split(","))
    except ValueError:
        raise UsageError(f"{name}: expected comma-separated numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise UsageError(f"{name}: expected {n} numbers, got {len(vals)}")
    if not all(np.isfinite(vals)):
        raise UsageError(f"{name}: non-finite number in {text!r}")
    return vals


def _window(text: str) -> tuple[float, float, float, float]:
    w = _floats(text, 4, "window")
    if not (w[0] < w[2] and w[1] < w[3]):
        raise UsageError(f"window needs x0 < x1 and y0 < y1, got {text!r}")
    return w


def _positive(conv):
    def inner(text):
        v = conv(text)
        if not v > 0:
            raise UsageError(f"expected a positive value, got {text!r}")
        return v
    return inner


def _read_ini(path: str) -> configparser.ConfigParser:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text if text.lstrip().startswith("[") else "[map]\n" + text, source=path)
    except configparser.Error as exc:
        raise UsageError(f"{path}: {exc}") from None
    return cp


def _load_map(args, cfg: configparser.ConfigParser | None) -> PolyDiffeo:
    if args.henon is not None:
        a, b = _floats(args.henon, 2, "--henon")
        return henon(a, b)
    if args.map is not None:
        cp = _read_ini(args.map)
        if not cp.has_section("map"):
            raise UsageError(f"{args.map}: no [map] section")
        return parse_map_spec(dict(cp["map"]))
    if cfg is not None and cfg.has_section("map"):
        return parse_map_spec(dict(cfg["map"]))
    raise UsageError("no map given (use --map FILE, --henon A,B or a [map] section in --config)")


def _option(args, section, name, conv, default=None):
    """Command-line value, else the config section's value, else ``default``."""
    value = getattr(args, name)
    if value is not None:
        return value
    if section is not None:
        for key in (name, name.replace("_", "-")):
            if key in section:
                try:
                    return conv(section[key])
                except (ValueError, TypeError):
                    raise UsageError(f"config: bad value for {key!r}: {section[key]!r}") from None
    return default


def _progress(args):
    if args.quiet:
        return lambda msg: None
    start = time.perf_counter()

    def say(msg):
        print(f"[{time.perf_counter() - start:7.2f}s] {msg}", file=sys.stderr, flush=True)
    return say


def _write(path: str | None, text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from None


def _check_window(window, f: PolyDiffeo):
    R = filtration_radius(f).R
    if not (-R <= window[0] and window[2] <= R and -R <= window[1] and window[3] <= R):
        raise UsageError(f"window {window} is not inside the filtration box [-{R:.6g}, {R:.6g}]^2")


# -- orbit table -----------------------------------------------------------------

ORBIT_COLUMNS = ("code", "n", "least_period", "x", "y", "lambda_u", "lambda_s", "flipping", "residual")


def orbit_rows(f: PolyDiffeo, n_max: int, say=None):
    say = say or (lambda msg: None)
    rows = []
    for n in range(1, n_max + 1):
        pts = find_fixed_points(f, n)
        say(f"n = {n}: {len(pts)} fixed points of f^n")
        for p in pts:
            rows.append({
                "code": str(p.code), "n": n, "least_period": p.least_period,
                "x": p.point[0], "y": p.point[1],
                "lambda_u": float(np.real(p.lambda_u)), "lambda_s": float(np.real(p.lambda_s)),
                "flipping": p.flip_class, "residual": p.residual,
            })
    return rows


def orbits_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ORBIT_COLUMNS)
    for r in rows:
        w.writerow([f"{r[c]:.17g}" if isinstance(r[c], float) else r[c] for c in ORBIT_COLUMNS])
    return buf.getvalue()


def select_saddle(f: PolyDiffeo, which: str):
    """``plus``: non-flipping fixed point; ``minus``: flipping fixed point; else a symbol code."""
    if which == "plus":
        return non_flipping_fixed_point(f)
    if which == "minus":
        pts = [p for p in find_fixed_points(f, 1) if p.flip_class == "flipping"]
        if len(pts) != 1:
            raise UsageError(f"expected one flipping fixed point, found {len(pts)}")
        return pts[0]
    m = len(f.factors)
    bits = list(which) if set(which) <= {"+", "-"} else which.split(".")
    if len(bits) % m:
        raise UsageError(f"symbol code {which!r} does not have a multiple of {m} entries")
    for p in find_fixed_points(f, len(bits) // m):
        if str(p.code) == which:
            return p
    raise UsageError(f"no periodic point with code {which!r}")


# -- commands ----------------------------------------------------------------------

def cmd_orbits(args, f, sec, say):
    n_max = _option(args, sec, "period_max", int, 4)
    if n_max < 1:
        raise UsageError("--period-max must be >= 1")
    _write(args.out, orbits_csv(orbit_rows(f, n_max, say)))
    return EXIT_PASS


def cmd_analyze(args, f, sec, say):
    n_max = _option(args, sec, "period_max", int, 4)
    if n_max < 1:
        raise UsageError("--period-max must be >= 1")
    say(f"census up to n = {n_max}")
    m = maxent_check(f, n_max, keep_points=True)
    points = m.evidence.pop("_points", {})
    checks = {"maxent": m}
    if m.status == PASS:
        checks["bounds"] = bounds_check(f, points)
        say("one-sidedness of period 1 and 2 orbits")
        checks["one_sided"] = one_sided_check(f)
    report = VerdictReport(format_map_spec(f), checks, "")
    out = report.to_dict()
    out.pop("label")
    _write(args.out, json.dumps(_plain(out), indent=2, sort_keys=True) + "\n")
    for name in sorted(checks):
        say(f"{name}: {checks[name].status} {checks[name].message}")
    return report.exit_code


def _budget(args, sec):
    budget = _option(args, sec, "budget", _positive(float), None)
    if budget is not None and budget <= 0:
        raise UsageError("--budget must be positive")
    return budget


def cmd_manifolds(args, f, sec, say):
    which = _option(args, sec, "saddle", str, "plus")
    budget = _budget(args, sec)
    zeta_max = _option(args, sec, "zeta_max", _positive(float), 2000.0)
    max_step = _option(args, sec, "max_step", _positive(float), StepControl.max_step)
    p = select_saddle(f, which)
    R = filtration_radius(f).R
    window = _option(args, sec, "window", _window, (-R, -R, R, R))
    _check_window(window, f)
    gev = GreenEvaluator(f)
    prefix = args.out_prefix
    for kind in (UNSTABLE, STABLE):
        say(f"{kind} manifold of {which} at ({p.point[0]:.6f}, {p.point[1]:.6f})")
        chart = build_chart(f, p, kind, gev)
        arc = trace(chart, zeta_max, StepControl(max_step=max_step), window=window, arc_length_budget=budget)
        say(f"  {arc.params.size} samples, budget exhausted: {arc.budget_exhausted}")
        _write(f"{prefix}_{kind}.csv", arc.to_csv())
    return EXIT_PASS


def cmd_render(args, f, sec, say):
    window = _option(args, sec, "window", _window, None)
    R = filtration_radius(f).R
    if window is None:
        window = (-R, -R, R, R)
    _check_window(window, f)
    width = _option(args, sec, "width", _positive(int), 800)
    grid_res = _option(args, sec, "grid", int, 0)
    budget = _budget(args, sec)
    zeta_max = _option(args, sec, "zeta_max", _positive(float), 2000.0)
    tol = _option(args, sec, "contact_tol", _positive(float), FIGURE_CONTACT_TOL)
    out = _option(args, sec, "out", str, "figure.svg")

    p = non_flipping_fixed_point(f)
    say("tracing the manifolds of the non-flipping fixed point")
    cu, cs = raw_charts(f, p)
    au = trace(cu, zeta_max, window=window, arc_length_budget=budget)
    as_ = trace(cs, zeta_max, window=window, arc_length_budget=budget)
    contacts = near_contacts(au, as_, window, dist_tol=tol)
    say(f"{len(contacts)} tangential contact(s) within {tol:g}")
    grid = None
    if grid_res > 0:
        say(f"classifying a {grid_res}x{grid_res} grid")
        grid = classify_grid(f, window, grid_res)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptySceneWarning)
        scene = render_scene([au, as_], contacts, grid, window, saddles=[p.point], width=width)
    if scene.is_empty():
        say("warning: no layer intersects the window")
    _write(out, scene.to_svg())
    return EXIT_PASS


def cmd_tangency_hunt(args, f, sec, say):
    b = _option(args, sec, "b", float, None)
    a_lo = _option(args, sec, "a_lo", float, None)
    a_hi = _option(args, sec, "a_hi", float, None)
    if f is not None and f.family == "henon" and b is None:
        b = f.params["b"]
    if b is None or a_lo is None or a_hi is None:
        raise UsageError("tangency-hunt needs --b, --a-lo and --a-hi")
    if not a_lo < a_hi:
        raise UsageError("--a-lo must be below --a-hi")
    res = hunt_boundary(b, a_lo, a_hi, progress=say)
    print(f"a* = {res.a_star:.12g} (b = {res.b:g}, residual {res.residual:.2e}, "
          f"kappa_u = {res.event.curvature_u:.6g}, kappa_s = {res.event.curvature_s:.6g})")
    _write(args.out, to_json_lines([res.event]))
    return EXIT_PASS


def cmd_verify(args, f, sec, say):
    n_max = _option(args, sec, "period_max", int, 10)
    if n_max < 1:
        raise UsageError("--period-max must be >= 1")
    res = _option(args, sec, "resolutions", lambda s: tuple(int(v) for v in s.split(",")), (64, 128, 256, 512))
    if any(r < 2 for r in res):
        raise UsageError("resolutions must be >= 2")
    report = verify(f, n_max, res, progress=say)
    if args.report:
        _write(args.report, report.to_json())
    print(report.summary())
    return report.exit_code


COMMANDS = {
    "analyze": cmd_analyze,
    "orbits": cmd_orbits,
    "manifolds": cmd_manifolds,
    "render": cmd_render,
    "tangency-hunt": cmd_tangency_hunt,
    "verify": cmd_verify,
}

# errors raised by the compute modules, by exit status
_ERROR_STATUS = (
    ((UsageError, MapSpecError, BadBracket), EXIT_USAGE),
    ((DegenerateContact,), EXIT_FAIL),
    ((Inconclusive, FoldTrackingLost, RefinementFailure, SaddlescopeError), EXIT_INCONCLUSIVE),
)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--map", metavar="FILE", help="map definition (key=value)")
    src.add_argument("--henon", metavar="A,B", help="Henon map with parameters a, b")
    common.add_argument("--config", metavar="FILE", help="config file with per-command sections")
    common.add_argument("-q", "--quiet", action="store_true", help="no progress on stderr")

    parser = _Parser(prog="saddlescope", description="Periodic orbits, invariant manifolds and "
                     "tangencies of real polynomial diffeomorphisms of the plane.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", parents=[common], help="census, multiplier bounds, one-sidedness (JSON)")
    p.add_argument("--period-max", type=int)
    p.add_argument("--out", help="JSON output (default stdout)")

    p = sub.add_parser("orbits", parents=[common], help="periodic point table (CSV)")
    p.add_argument("--period-max", type=int)
    p.add_argument("--out", help="CSV output (default stdout)")

    p = sub.add_parser("manifolds", parents=[common], help="trace stable and unstable manifolds (CSV)")
    p.add_argument("--saddle", help="plus, minus or a symbol code such as +-")
    p.add_argument("--budget", type=float, help="arc-length budget per branch inside the window")
    p.add_argument("--zeta-max", type=float)
    p.add_argument("--max-step", type=float)
    p.add_argument("--window", type=_window_arg, metavar="x0,y0,x1,y1")
    p.add_argument("--out-prefix", default="manifold", help="writes PREFIX_unstable.csv and PREFIX_stable.csv")

    p = sub.add_parser("render", parents=[common], help="SVG picture of the manifolds of the non-flipping saddle")
    p.add_argument("--window", type=_window_arg, metavar="x0,y0,x1,y1")
    p.add_argument("--out", help="SVG output (default figure.svg)")
    p.add_argument("--width", type=int)
    p.add_argument("--grid", type=int, help="also draw a K-grid of this resolution")
    p.add_argument("--budget", type=float)
    p.add_argument("--zeta-max", type=float)
    p.add_argument("--contact-tol", type=float, help=f"tangency marker distance (default {FIGURE_CONTACT_TOL:g})")

    p = sub.add_parser("tangency-hunt", parents=[common], help="locate the horseshoe boundary in a")
    p.add_argument("--b", type=float)
    p.add_argument("--a-lo", type=float)
    p.add_argument("--a-hi", type=float)
    p.add_argument("--out", help="JSON-lines output (default stdout)")

    p = sub.add_parser("verify", parents=[common], help="run every check and write a report")
    p.add_argument("--period-max", type=int)
    p.add_argument("--resolutions", type=lambda s: tuple(int(v) for v in s.split(",")))
    p.add_argument("--report", help="JSON report path")
    return parser


def _window_arg(text):
    try:
        return _window(text)
    except UsageError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    say = _progress(args)
    try:
        worker_count()
    except ValueError as exc:
        print(f"saddlescope: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = _read_ini(args.config) if args.config else None
        sec = cfg[args.command] if cfg is not None and cfg.has_section(args.command) else None
        if args.command == "tangency-hunt" and not (args.map or args.henon):
            f = None  # the hunter sweeps the Henon family itself
        else:
            f = _load_map(args, cfg)
        return COMMANDS[args.command](args, f, sec, say)
    except Exception as exc:  # noqa: BLE001 - mapped to the exit-code contract
        for types, status in _ERROR_STATUS:
            if isinstance(exc, types):
                print(f"saddlescope: {type(exc).__name__}: {exc}", file=sys.stderr)
                return status
        raise


if __name__ == "__main__":
    sys.exit(main())
