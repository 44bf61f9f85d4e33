"""Space-time velocity/pressure fields from profile solutions.

The planar ansatz collapses the field onto the similarity coordinate
w = (x+y+z)/sqrt(t): velocities decay like t^(-1/2) around their profiles
and pressure like t^(-1).  Sampling therefore reduces to profile lookups;
the first velocity profile is evaluated analytically (memoized per distinct
coordinate sum), the tabulated ones by local quintic interpolation.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError, OutOfHull
from .precision import PrecisionConfig, as_fraction, context, exact_fraction, to_mpf
from .reduction import ProfileSet, f_closed

__all__ = [
    "SpaceTimePoint",
    "GridSpec",
    "FieldSample",
    "similarity_coordinate",
    "evaluate_field",
    "sample_grid",
    "level_set_points",
]


@dataclass(frozen=True)
class SpaceTimePoint:
    x: Fraction
    y: Fraction
    z: Fraction
    t: Fraction

    def __post_init__(self):
        for name in ("x", "y", "z", "t"):
            object.__setattr__(self, name, exact_fraction(getattr(self, name)))
        if not self.t > 0:
            raise DomainError("the ansatz is singular at t <= 0")


@dataclass(frozen=True)
class GridSpec:
    """Cartesian sampling box at one time slice, plus the temporal FD step."""

    x_range: tuple
    y_range: tuple
    z_range: tuple
    t: Fraction = Fraction(1)
    dt: Fraction = Fraction(1, 100)

    def __post_init__(self):
        for name in ("x_range", "y_range", "z_range"):
            lo, hi, count = getattr(self, name)
            lo, hi, count = as_fraction(lo), as_fraction(hi), int(count)
            if count < 2:
                raise ValueError(f"{name} needs at least 2 points")
            if not hi > lo:
                raise ValueError(f"{name} needs max > min")
            object.__setattr__(self, name, (lo, hi, count))
        object.__setattr__(self, "t", as_fraction(self.t))
        object.__setattr__(self, "dt", as_fraction(self.dt))
        if not self.t > 0:
            raise ValueError("t must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t - self.dt > 0:
            raise ValueError("need t - dt > 0")

    def axis_nodes(self, name: str) -> tuple:
        lo, hi, count = getattr(self, name + "_range")
        step = (hi - lo) / (count - 1)
        return tuple(lo + k * step for k in range(count))

    def spacing(self, name: str) -> Fraction:
        lo, hi, count = getattr(self, name + "_range")
        return (hi - lo) / (count - 1)

    def node_count(self) -> int:
        return self.x_range[2] * self.y_range[2] * self.z_range[2]


@dataclass(frozen=True)
class FieldSample:
    point: SpaceTimePoint
    u: object
    v: object
    w: object
    p: object


def similarity_coordinate(pt: SpaceTimePoint):
    """(x+y+z)/sqrt(t), the only spatial combination the field depends on."""
    if not pt.t > 0:
        raise DomainError("the ansatz is singular at t <= 0")
    ctx = context(40)
    return (to_mpf(ctx, pt.x + pt.y + pt.z)) / ctx.sqrt(to_mpf(ctx, pt.t))


# ---------------------------------------------------------------------------
# Quintic local interpolation
# ---------------------------------------------------------------------------


def _hull_check(ps: ProfileSet, w, what="query"):
    lo, hi = ps.hull()
    if not (lo <= w <= hi):
        raise OutOfHull(f"{what} at omega = {float(w):.6g} outside profile hull [{float(lo)}, {float(hi)}]")


def _interp_mpf(ctx, ps: ProfileSet, column: str, w_exact: Fraction):
    """Degree-5 local Lagrange interpolation in exact/mpf arithmetic."""
    grid = ps.omega_grid
    n = len(grid)
    values = getattr(ps, column)
    if n < 6:
        raise OutOfHull("profile grid too short for quintic interpolation")
    j = bisect.bisect_right(grid, w_exact) - 1
    base = min(max(j - 2, 0), n - 6)
    nodes = grid[base : base + 6]
    if w_exact in nodes:
        return ctx.convert(values[base + nodes.index(w_exact)])
    wq = to_mpf(ctx, w_exact)
    out = ctx.mpf(0)
    for a in range(6):
        num = ctx.mpf(1)
        den = Fraction(1)
        for b in range(6):
            if b == a:
                continue
            num *= wq - to_mpf(ctx, nodes[b])
            den *= nodes[a] - nodes[b]
        out += ctx.convert(values[base + a]) * num / to_mpf(ctx, den)
    return out


def interp_quintic(xgrid: np.ndarray, ygrid: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Vectorized float64 quintic interpolation; exact at the nodes."""
    n = len(xgrid)
    q = np.asarray(q, dtype=float)
    j = np.searchsorted(xgrid, q, side="right") - 1
    base = np.clip(j - 2, 0, n - 6)
    idx = base[..., None] + np.arange(6)
    xs = xgrid[idx]
    ys = ygrid[idx]
    out = np.zeros_like(q)
    for a in range(6):
        num = np.ones_like(q)
        den = np.ones_like(q)
        for b in range(6):
            if b == a:
                continue
            num = num * (q - xs[..., b])
            den = den * (xs[..., a] - xs[..., b])
        out += ys[..., a] * num / den
    return out


# ---------------------------------------------------------------------------
# Field evaluation
# ---------------------------------------------------------------------------

_f_value_cache: dict = {}


def _f_analytic(w_exact: Fraction, ps: ProfileSet):
    key = (w_exact, ps.params, ps.prec)
    val = _f_value_cache.get(key)
    if val is None:
        val = f_closed(w_exact, ps.params, ps.prec)
        if len(_f_value_cache) > 500_000:
            _f_value_cache.clear()
        _f_value_cache[key] = val
    return val


def evaluate_field(pt: SpaceTimePoint, profiles: ProfileSet, prec: PrecisionConfig) -> FieldSample:
    """One FieldSample: analytic first component, interpolated companions."""
    ctx = context(prec.base_dps)
    sqrt_t = ctx.sqrt(to_mpf(ctx, pt.t))
    w = to_mpf(ctx, pt.x + pt.y + pt.z) / sqrt_t
    w_exact = exact_fraction(w)
    _hull_check(profiles, w_exact)
    u = to_mpf(ctx, _f_analytic(w_exact, profiles)) / sqrt_t
    v = _interp_mpf(ctx, profiles, "g", w_exact) / sqrt_t
    wv = _interp_mpf(ctx, profiles, "h", w_exact) / sqrt_t
    press = _interp_mpf(ctx, profiles, "l", w_exact) / to_mpf(ctx, pt.t)
    r = prec.round_out
    return FieldSample(point=pt, u=r(u), v=r(v), w=r(wv), p=r(press))


def _grid_hull_precheck(grid: GridSpec, profiles: ProfileSet):
    xs, ys, zs = (grid.axis_nodes(n) for n in ("x", "y", "z"))
    lo_s = xs[0] + ys[0] + zs[0]
    hi_s = xs[-1] + ys[-1] + zs[-1]
    ctx = context(30)
    for t in (grid.t - grid.dt, grid.t, grid.t + grid.dt):
        sq = ctx.sqrt(to_mpf(ctx, t))
        for s, node in ((lo_s, (xs[0], ys[0], zs[0])), (hi_s, (xs[-1], ys[-1], zs[-1]))):
            w = exact_fraction(to_mpf(ctx, s) / sq)
            lo, hi = profiles.hull()
            if not (lo <= w <= hi):
                raise OutOfHull(
                    f"grid node ({float(node[0])}, {float(node[1])}, {float(node[2])}) at "
                    f"t = {float(t)} maps to omega = {float(w):.6g} outside the profile hull"
                )


def sample_grid(grid: GridSpec, profiles: ProfileSet, prec: PrecisionConfig) -> list[FieldSample]:
    """Row-major samples over the box, x varying fastest.

    All nodes with the same coordinate sum share one profile evaluation, so
    the cost scales with the number of distinct planes, not with the node
    count.  Output ordering is fixed by the loops regardless of evaluation
    order.
    """
    _grid_hull_precheck(grid, profiles)
    xs, ys, zs = (grid.axis_nodes(n) for n in ("x", "y", "z"))
    ctx = context(prec.base_dps)
    sqrt_t = ctx.sqrt(to_mpf(ctx, grid.t))
    t_mpf = to_mpf(ctx, grid.t)
    r = prec.round_out
    cache: dict[Fraction, tuple] = {}
    out = []
    for z in zs:
        for y in ys:
            for x in xs:
                s = x + y + z
                vals = cache.get(s)
                if vals is None:
                    w = to_mpf(ctx, s) / sqrt_t
                    w_exact = exact_fraction(w)
                    _hull_check(profiles, w_exact, what=f"node ({float(x)},{float(y)},{float(z)})")
                    vals = (
                        r(to_mpf(ctx, _f_analytic(w_exact, profiles)) / sqrt_t),
                        r(_interp_mpf(ctx, profiles, "g", w_exact) / sqrt_t),
                        r(_interp_mpf(ctx, profiles, "h", w_exact) / sqrt_t),
                        r(_interp_mpf(ctx, profiles, "l", w_exact) / t_mpf),
                    )
                    cache[s] = vals
                out.append(
                    FieldSample(
                        point=SpaceTimePoint(x, y, z, grid.t),
                        u=vals[0], v=vals[1], w=vals[2], p=vals[3],
                    )
                )
    return out


def _refine_bisect(fn, a, b, fa, fb, xtol, max_iter=200):
    for _ in range(max_iter):
        m = 0.5 * (a + b)
        if b - a <= xtol:
            return m
        fm = fn(m)
        if fm == 0.0:
            return m
        if (fa < 0) != (fm < 0):
            b, fb = m, fm
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


def level_set_points(
    level,
    profiles: ProfileSet,
    t,
    box: GridSpec,
    prec: PrecisionConfig,
    include_tail: bool = False,
    bracket_tol: float | None = None,
) -> list[tuple[float, float, float]]:
    """Points where the first velocity component crosses ``level``.

    Scans every (y, z) line of the box, brackets sign changes of u - level
    along x and refines them by bisection.  Grid nodes already within the
    bracketing tolerance qualify directly, which covers level sets of
    constant fields where no sign change exists.  ``include_tail`` switches
    between the bare kernel (the plotted quantity in the source figures) and
    the full first component including its constant tail.
    """
    t = as_fraction(t)
    if not t > 0:
        raise DomainError("the ansatz is singular at t <= 0")
    _grid_hull_precheck(GridSpec(box.x_range, box.y_range, box.z_range, t, box.dt), profiles)
    level = float(level)
    fa = profiles.float_arrays()
    xg, fg = fa["omega"], fa["f"]
    inv_sqrt_t = 1.0 / float(t) ** 0.5
    p = profiles.params
    offset = 0.0 if include_tail else float(p.mass_rate) / 3.0 - 2.0 * float(p.accel) / 3.0
    if bracket_tol is None:
        bracket_tol = 1e-9 * max(1.0, abs(level))
    xs = [float(v) for v in box.axis_nodes("x")]
    ys = [float(v) for v in box.axis_nodes("y")]
    zs = [float(v) for v in box.axis_nodes("z")]
    xtol = (xs[-1] - xs[0]) * 1e-13
    points = []
    for z in zs:
        for y in ys:
            def target(x):
                w = (x + y + z) * inv_sqrt_t
                return (interp_quintic(xg, fg, np.array([w]))[0] - offset) * inv_sqrt_t - level

            vals = [target(x) for x in xs]
            hits = set()
            for x, val in zip(xs, vals):
                if abs(val) < bracket_tol:
                    hits.add(x)
            for i in range(len(xs) - 1):
                va, vb = vals[i], vals[i + 1]
                if va == 0.0 or vb == 0.0 or (va < 0) == (vb < 0):
                    continue
                root = _refine_bisect(target, xs[i], xs[i + 1], va, vb, xtol)
                if not any(abs(root - h) <= 2 * xtol for h in hits):
                    hits.add(root)
            for x in sorted(hits):
                points.append((x, y, z))
    return points
