"""Independent verification harness.

Substitutes assembled fields back into the original equations through
second-order central finite differences, estimates convergence orders over
grid refinements, audits both reduced-ODE coefficient sets, reproduces the
precision warning, and measures the transcribed reference solution line by
line.  Checks record numbers and verdicts; nothing here editorializes about
which coefficient set "should" win -- a variant passes when its residuals
vanish at second order, fails when they converge to a nonzero function, and
is inconclusive when the interpolation/arithmetic floor hides the answer.
"""

from __future__ import annotations

import datetime
import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import __version__
from .errors import DegenerateFit, DomainError
from .fields import GridSpec, interp_quintic
from .kummer import KummerArgs, kummer_m, kummer_u, kummer_u_deriv, kummer_u_deriv2, whittaker_w
from .precision import PrecisionConfig, as_fraction, context, fmt_sci, to_mpf
from .reduction import (
    FlowParams,
    ProfileSet,
    Variant,
    complete_profiles,
    default_flow_params,
    default_omega_grid,
    derived_consistent_profiles,
    derived_ode,
    eliminate_pressure_oracle,
    f_closed_derivs,
    g_quadrature,
    local_tolerance,
    printed_ode,
    reduced_ode_residual,
)

__all__ = [
    "CheckResult",
    "ResidualReport",
    "SuiteOptions",
    "fd_pde_residual",
    "convergence_order",
    "heat_kernel_selftest",
    "stencil_exactness_defect",
    "audit_reduction",
    "audit_fushchich",
    "run_suite",
]

PDE_EQUATIONS = ("continuity", "momentum_x", "momentum_y", "momentum_z")


@dataclass
class CheckResult:
    id: str
    family: str
    sup_norm: object = None
    l2_norm: object = None
    order: float | None = None
    verdict: str = "informational"
    classification: str | None = None  # adjudication outcome, not a suite verdict
    notes: str = ""


@dataclass
class ResidualReport:
    params: FlowParams
    grid_meta: dict
    checks: list = field(default_factory=list)
    precision_digits: int = 40

    @property
    def equation_norms(self):
        return {c.id: (c.sup_norm, c.l2_norm) for c in self.checks}

    @property
    def convergence_orders(self):
        return {c.id: c.order for c in self.checks if c.order is not None}

    @property
    def verdicts(self):
        return {c.id: c.verdict for c in self.checks}

    def check(self, check_id: str) -> CheckResult:
        for c in self.checks:
            if c.id == check_id:
                return c
        raise KeyError(check_id)

    def failed(self):
        return [c for c in self.checks if c.verdict == "fail"]

    def to_json(self, timestamp: str | None = None) -> str:
        if timestamp is None:
            timestamp = datetime.datetime.now(datetime.timezone.utc).isoformat()

        def norm_str(v):
            return None if v is None else fmt_sci(v, 25)

        payload = {
            "params": {
                "nu": str(self.params.nu),
                "accel": str(self.params.accel),
                "rho": str(self.params.rho),
                "mass_rate": str(self.params.mass_rate),
                "c1": str(self.params.c1),
                "c2": str(self.params.c2),
                "l0": str(self.params.l0),
            },
            "grid": self.grid_meta,
            "checks": [
                {
                    "id": c.id,
                    "family": c.family,
                    "sup_norm": norm_str(c.sup_norm),
                    "l2_norm": norm_str(c.l2_norm),
                    "order": None if c.order is None else round(float(c.order), 6),
                    "verdict": c.verdict,
                    "classification": c.classification,
                    "notes": c.notes,
                }
                for c in sorted(self.checks, key=lambda c: c.id)
            ],
            "meta": {
                "version": __version__,
                "timestamp": timestamp,
                "precision_digits": self.precision_digits,
            },
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Finite-difference residuals of the original system
# ---------------------------------------------------------------------------


def default_dt(delta, t, nu) -> Fraction:
    """Temporal step tied to the spatial one so time truncation stays subdominant."""
    delta, t, nu = as_fraction(delta), as_fraction(t), as_fraction(nu)
    return min(delta * delta * Fraction(1, 10) / nu, t / 10)


def fd_pde_residual(profiles: ProfileSet, grid: GridSpec, prec: PrecisionConfig) -> dict:
    """Per-equation residual norms of the original system on the grid.

    All stencil values come from the field itself (analytic in the collapsed
    coordinate, interpolated profiles), so every grid node is an interior
    node.  Each momentum residual is reported raw and normalized by the
    largest term magnitude at the node, so kernel growth at large omega does
    not mask interior accuracy.
    """
    fa = profiles.float_arrays()
    xg = fa["omega"]
    t = float(grid.t)
    dt = float(grid.dt)
    nu = float(profiles.params.nu)
    rho = float(profiles.params.rho)
    accel = float(profiles.params.accel)
    xs = np.array([float(v) for v in grid.axis_nodes("x")])
    ys = np.array([float(v) for v in grid.axis_nodes("y")])
    zs = np.array([float(v) for v in grid.axis_nodes("z")])
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    S = (X + Y + Z).ravel()
    hull_lo, hull_hi = (float(v) for v in profiles.hull())

    def field(col, shift, tt):
        w = (S + shift) / tt**0.5
        if w.min() < hull_lo or w.max() > hull_hi:
            from .errors import OutOfHull

            raise OutOfHull(
                f"stencil at shift {shift:+.4g}, t = {tt:.4g} leaves the profile hull"
            )
        scale = 1.0 / tt**0.5 if col != "l" else 1.0 / tt
        return interp_quintic(xg, fa[col], w) * scale

    deltas = {"x": float(grid.spacing("x")), "y": float(grid.spacing("y")), "z": float(grid.spacing("z"))}
    u0 = field("f", 0.0, t)
    v0 = field("g", 0.0, t)
    w0 = field("h", 0.0, t)

    def d1(col, axis, tt=t):
        d = deltas[axis]
        return (field(col, +d, tt) - field(col, -d, tt)) / (2 * d)

    def d2(col, axis):
        d = deltas[axis]
        return (field(col, +d, t) - 2 * field(col, 0.0, t) + field(col, -d, t)) / (d * d)

    def dtime(col):
        return (field(col, 0.0, t + dt) - field(col, 0.0, t - dt)) / (2 * dt)

    residuals = {}
    scales = {}
    cont = d1("f", "x") + d1("g", "y") + d1("h", "z")
    residuals["continuity"] = cont
    scales["continuity"] = np.maximum.reduce(
        [np.abs(d1("f", "x")), np.abs(d1("g", "y")), np.abs(d1("h", "z")), np.full_like(cont, 1e-30)]
    )
    for eq, col, vel in (("momentum_x", "f", u0), ("momentum_y", "g", v0), ("momentum_z", "h", w0)):
        ut = dtime(col)
        adv = u0 * d1(col, "x") + v0 * d1(col, "y") + w0 * d1(col, "z")
        lap = d2(col, "x") + d2(col, "y") + d2(col, "z")
        grad_p = d1("l", {"momentum_x": "x", "momentum_y": "y", "momentum_z": "z"}[eq])
        res = ut + adv - nu * lap + grad_p / rho
        if eq == "momentum_z":
            res = res - accel
        residuals[eq] = res
        scales[eq] = np.maximum.reduce(
            [np.abs(ut), np.abs(adv), np.abs(nu * lap), np.abs(grad_p / rho),
             np.full_like(res, max(abs(accel), 1e-30))]
        )
    out = {}
    for eq, res in residuals.items():
        normed = res / scales[eq]
        out[eq] = {
            "sup": float(np.max(np.abs(res))),
            "l2": float(np.sqrt(np.mean(res * res))),
            "sup_normalized": float(np.max(np.abs(normed))),
            "l2_normalized": float(np.sqrt(np.mean(normed * normed))),
        }
    return out


def convergence_order(residual_norms, deltas) -> float:
    """Least-squares slope of log(norm) against log(delta)."""
    norms = [float(v) for v in residual_norms]
    ds = [float(v) for v in deltas]
    if len(norms) != len(ds) or len(norms) < 3:
        raise ValueError("need at least 3 matched (norm, delta) pairs")
    for a, b in zip(ds, ds[1:]):
        if not b < a or abs(a / b - 2.0) > 1e-9:
            raise ValueError("deltas must decrease strictly by factor 2")
    if max(norms) < 1e-13 or min(norms) <= 0.0:
        raise DegenerateFit("residual norms sit at the arithmetic floor")
    lx = np.log(ds)
    ly = np.log(norms)
    slope = np.polyfit(lx, ly, 1)[0]
    return float(slope)


def heat_kernel_selftest(nu=Fraction(1, 10), deltas=(Fraction(1, 5), Fraction(1, 10), Fraction(1, 20))):
    """1D diffusion residual of the fundamental solution; returns (order, norms).

    The classical t^(-1/2) exp(-x^2/(4 nu t)) kernel exercises exactly the
    temporal and spatial stencils the full harness uses.
    """
    nu_f = float(nu)
    t = 1.0
    norms = []
    for delta in deltas:
        d = float(delta)
        dt = float(default_dt(delta, 1, nu))
        xs = np.arange(-2.0, 2.0 + d / 2, d)

        def kernel(x, tt):
            return tt**-0.5 * np.exp(-(x**2) / (4 * nu_f * tt))

        t_deriv = (kernel(xs, t + dt) - kernel(xs, t - dt)) / (2 * dt)
        xx_deriv = (kernel(xs + d, t) - 2 * kernel(xs, t) + kernel(xs - d, t)) / (d * d)
        norms.append(float(np.max(np.abs(t_deriv - nu_f * xx_deriv))))
    return convergence_order(norms, deltas), norms


# -- degree-2 polynomial fields: FD must match the analytic residual exactly


def _poly_diff(poly: dict, axis: int) -> dict:
    out = {}
    for mono, coef in poly.items():
        if mono[axis] == 0:
            continue
        new = list(mono)
        new[axis] -= 1
        out[tuple(new)] = out.get(tuple(new), Fraction(0)) + coef * mono[axis]
    return out


def _poly_mul(pa: dict, pb: dict) -> dict:
    out = {}
    for ma, ca in pa.items():
        for mb, cb in pb.items():
            m = tuple(a + b for a, b in zip(ma, mb))
            out[m] = out.get(m, Fraction(0)) + ca * cb
    return out


def _poly_add(*polys) -> dict:
    out = {}
    for p in polys:
        for m, c in p.items():
            out[m] = out.get(m, Fraction(0)) + c
    return out


def _poly_scale(poly: dict, s) -> dict:
    return {m: c * as_fraction(s) for m, c in poly.items()}


def _poly_eval_f(poly: dict, x, y, z, t) -> float:
    total = 0.0
    for (i, j, k, l), c in poly.items():
        total += float(c) * x**i * y**j * z**k * t**l
    return total


def stencil_exactness_defect(nu=Fraction(1, 10), rho=Fraction(1), accel=Fraction(1, 2)) -> float:
    """Max |FD residual - analytic residual| for fixed degree-2 fields.

    Second-order central stencils differentiate quadratics exactly, so any
    defect beyond rounding indicates a broken stencil.
    """
    # monomial keys are exponents of (x, y, z, t), total degree <= 2
    u = {(0, 0, 0, 0): Fraction(3, 10), (1, 0, 0, 0): Fraction(1, 5), (0, 1, 0, 0): Fraction(-1, 10),
         (2, 0, 0, 0): Fraction(1, 25), (0, 1, 1, 0): Fraction(-3, 100), (1, 0, 0, 1): Fraction(1, 50),
         (0, 0, 0, 2): Fraction(1, 20)}
    v = {(0, 0, 0, 0): Fraction(-1, 10), (0, 0, 1, 0): Fraction(3, 20), (0, 2, 0, 0): Fraction(-1, 40),
         (1, 1, 0, 0): Fraction(1, 30), (0, 0, 0, 1): Fraction(-1, 25)}
    w = {(0, 0, 1, 0): Fraction(1, 10), (0, 0, 2, 0): Fraction(1, 50), (1, 0, 1, 0): Fraction(-1, 60),
         (0, 0, 1, 1): Fraction(1, 40)}
    pr = {(1, 0, 0, 0): Fraction(1, 10), (0, 1, 0, 0): Fraction(-1, 20), (0, 0, 2, 0): Fraction(1, 30),
          (2, 0, 0, 0): Fraction(-1, 80), (0, 0, 0, 1): Fraction(1, 15)}
    X, Y, Z, T = 0, 1, 2, 3

    def momentum_poly(q, axis):
        adv = _poly_add(
            _poly_mul(u, _poly_diff(q, X)),
            _poly_mul(v, _poly_diff(q, Y)),
            _poly_mul(w, _poly_diff(q, Z)),
        )
        lap = _poly_add(
            _poly_diff(_poly_diff(q, X), X),
            _poly_diff(_poly_diff(q, Y), Y),
            _poly_diff(_poly_diff(q, Z), Z),
        )
        return _poly_add(
            _poly_diff(q, T), adv, _poly_scale(lap, -nu), _poly_scale(_poly_diff(pr, axis), 1 / rho)
        )

    analytic = {
        "continuity": _poly_add(_poly_diff(u, X), _poly_diff(v, Y), _poly_diff(w, Z)),
        "momentum_x": momentum_poly(u, X),
        "momentum_y": momentum_poly(v, Y),
        "momentum_z": _poly_add(momentum_poly(w, Z), {(0, 0, 0, 0): -accel}),
    }
    fields = {"u": u, "v": v, "w": w, "p": pr}
    delta, dt, t0 = 0.1, 0.05, 1.0
    nodes = [(-0.2 + 0.1 * i, 0.1 + 0.1 * j, -0.1 + 0.1 * k, t0)
             for i in range(4) for j in range(4) for k in range(4)]
    worst = 0.0
    for x, y, z, t in nodes:
        def ev(name, ddx=0.0, ddy=0.0, ddz=0.0, ddt=0.0):
            return _poly_eval_f(fields[name], x + ddx, y + ddy, z + ddz, t + ddt)

        def dd1(name, axis):
            args = {axis: delta}
            args_m = {axis: -delta}
            return (ev(name, **args) - ev(name, **args_m)) / (2 * delta)

        def dd2(name, axis):
            args = {axis: delta}
            args_m = {axis: -delta}
            return (ev(name, **args) - 2 * ev(name) + ev(name, **args_m)) / delta**2

        fd = {}
        fd["continuity"] = dd1("u", "ddx") + dd1("v", "ddy") + dd1("w", "ddz")
        for eq, name, axis in (("momentum_x", "u", "ddx"), ("momentum_y", "v", "ddy"), ("momentum_z", "w", "ddz")):
            ut = (ev(name, ddt=dt) - ev(name, ddt=-dt)) / (2 * dt)
            adv = ev("u") * dd1(name, "ddx") + ev("v") * dd1(name, "ddy") + ev("w") * dd1(name, "ddz")
            lap = dd2(name, "ddx") + dd2(name, "ddy") + dd2(name, "ddz")
            res = ut + adv - float(nu) * lap + dd1("p", axis) / float(rho)
            if eq == "momentum_z":
                res -= float(accel)
            fd[eq] = res
        for eq in analytic:
            exact = _poly_eval_f(analytic[eq], x, y, z, t)
            worst = max(worst, abs(fd[eq] - exact))
    return worst


# ---------------------------------------------------------------------------
# Reduction and reference audits
# ---------------------------------------------------------------------------


def _reduced_residual_scan(p: FlowParams, ode, omega_grid, prec: PrecisionConfig):
    """Normalized sup/l2 of the reduced-ODE residual of the closed-form profile."""
    ctx = context(prec.base_dps)
    sup = ctx.mpf(0)
    sq_sum = ctx.mpf(0)
    for w in omega_grid:
        w = as_fraction(w)
        f, f1, f2 = f_closed_derivs(w, p, prec)
        res = reduced_ode_residual(ode, ctx.convert(f), ctx.convert(f1), ctx.convert(f2), to_mpf(ctx, w))
        scale = max(
            abs(to_mpf(ctx, ode.k2) * ctx.convert(f2)),
            abs((to_mpf(ctx, ode.k1_omega) * to_mpf(ctx, w) + to_mpf(ctx, ode.k1_const)) * ctx.convert(f1)),
            abs(to_mpf(ctx, ode.k0) * ctx.convert(f)),
            ctx.mpf(1) * 1e-30,
        )
        r = abs(res) / scale
        sup = max(sup, r)
        sq_sum += r * r
    return sup, ctx.sqrt(sq_sum / len(omega_grid))


def audit_reduction(
    p: FlowParams,
    omega_grid=None,
    prec: PrecisionConfig | None = None,
    fd_box=((Fraction(1, 5), Fraction(6, 5)),) * 3,
    fd_delta=Fraction(1, 20),
    t=Fraction(1),
) -> list[CheckResult]:
    """Residuals of both reduced-ODE coefficient sets, plus the derived field.

    The closed-form profile is substituted into the printed coefficients
    (internal-consistency check of the source) and into the independently
    derived ones (reported); the derived ODE is also solved numerically and
    the field assembled from that solution goes through the PDE harness.
    """
    prec = prec or PrecisionConfig()
    if omega_grid is None:
        omega_grid = default_omega_grid(-5, 5, 201)
    checks = []
    tol = 10.0 ** (8 - prec.digits)
    sup_p, l2_p = _reduced_residual_scan(p, printed_ode(p), omega_grid, prec)
    checks.append(CheckResult(
        id="reduced_ode_printed", family="reduction", sup_norm=sup_p, l2_norm=l2_p,
        verdict="pass" if sup_p <= tol else "fail",
        notes="closed-form profile substituted into the printed coefficients",
    ))
    sup_d, l2_d = _reduced_residual_scan(p, derived_ode(p), omega_grid, prec)
    checks.append(CheckResult(
        id="reduced_ode_derived", family="reduction", sup_norm=sup_d, l2_norm=l2_d,
        verdict="informational",
        notes="closed-form profile substituted into the elimination coefficients",
    ))
    po, do = printed_ode(p), derived_ode(p)
    gap_w = do.k1_omega - po.k1_omega
    gap_i = do.k_inhom - po.k_inhom
    checks.append(CheckResult(
        id="ode_coefficient_gap", family="reduction",
        sup_norm=float(abs(gap_w)), l2_norm=float(abs(gap_i)),
        verdict="informational",
        notes=f"k2 and k0 agree; omega-coefficient differs by {gap_w}, "
              f"inhomogeneous term by {gap_i} (sup_norm/l2_norm carry the two gaps)",
    ))
    grad, _ = eliminate_pressure_oracle(p)
    checks.append(CheckResult(
        id="pressure_gradient", family="reduction",
        sup_norm=float(grad), verdict="informational",
        notes="constant pressure gradient l'/rho = accel/3 + mass_rate/6 from the elimination",
    ))
    # derived-coefficient field through the PDE harness at one resolution
    profiles = derived_consistent_profiles(p, prec=prec)
    grid = _fd_grid(fd_box, fd_delta, t, p.nu)
    norms = fd_pde_residual(profiles, grid, prec)
    for eq in PDE_EQUATIONS:
        checks.append(CheckResult(
            id=f"audit_derived_{eq}", family="reduction",
            sup_norm=norms[eq]["sup"], l2_norm=norms[eq]["l2"],
            verdict="informational",
            notes="derived-ODE field substituted into the original system "
                  f"at delta = {float(fd_delta)}",
        ))
    return checks


def _fd_grid(box, delta, t, nu) -> GridSpec:
    delta = as_fraction(delta)
    ranges = []
    for lo, hi in box:
        lo, hi = as_fraction(lo), as_fraction(hi)
        count = int((hi - lo) / delta) + 1
        if lo + (count - 1) * delta != hi:
            raise ValueError("box extent must be a multiple of delta")
        ranges.append((lo, hi, count))
    return GridSpec(ranges[0], ranges[1], ranges[2], t=t, dt=default_dt(delta, t, nu))


def audit_fushchich(
    c=Fraction(1),
    c1=Fraction(0),
    omega_grid=None,
    prec: PrecisionConfig | None = None,
) -> list[CheckResult]:
    """Line-by-line residuals of the transcribed reference solution.

    The reference system carries unit viscosity and the invariant coordinate
    is one-dimensional.  Line 1 and the polynomial part of line 4 are exact
    rational identities; the two profile lines involve the Whittaker-based
    closed forms and are measured numerically with central differences at
    elevated precision.  Where the transcription is ambiguous (the sign of
    the first-derivative term in line 3, the second derivative on the right
    of line 4) both readings are reported.
    """
    prec = prec or PrecisionConfig()
    c = as_fraction(c)
    c1 = as_fraction(c1)
    if omega_grid is None:
        omega_grid = default_omega_grid(1, 3, 41)
    grid = [as_fraction(w) for w in omega_grid]
    sing = 2 * c / 3
    for w in grid:
        if Fraction(3, 2) * w - c <= 0:
            raise DomainError(
                f"grid point omega = {float(w)} is at or left of the prefactor singularity {float(sing):.4g}"
            )
    checks = []
    # line 1: h' + 1 with h = -omega + c; exact in rational arithmetic
    line1 = max(abs(Fraction(-1) + 1) for _ in grid)
    checks.append(CheckResult(
        id="fushchich_line1", family="fushchich", sup_norm=float(line1), l2_norm=float(line1),
        verdict="pass" if line1 == 0 else "fail", notes="continuity line, exact substitution",
    ))
    # line 4, second-derivative-of-h reading: polynomial identity, exact
    sup4 = Fraction(0)
    for w in grid:
        h0, h1 = -w + c, Fraction(-1)
        l1v = Fraction(3, 2) * c - 2 * w
        res = -Fraction(1, 2) * (h0 + w * h1) + h0 * h1 + l1v
        sup4 = max(sup4, abs(res))
    checks.append(CheckResult(
        id="fushchich_line4_poly", family="fushchich", sup_norm=float(sup4), l2_norm=float(sup4),
        verdict="pass" if sup4 == 0 else "fail",
        notes="pressure line with the second derivative read as h'': exact polynomial substitution",
    ))
    # profile lines: Whittaker-based f and g, derivatives by central differences
    work = PrecisionConfig(digits=prec.digits + 20, guard_digits=prec.guard_digits)
    ctx = context(work.base_dps)
    hstep = ctx.mpf(10) ** (-prec.digits // 3)

    def prof_derivs(kappa, w):
        wm = to_mpf(ctx, w)
        vals = [profile_num(kappa, wm + k * hstep) for k in (-2, -1, 0, 1, 2)]
        v = vals[2]
        d1 = (vals[3] - vals[1]) / (2 * hstep)
        d2 = (-vals[4] + 16 * vals[3] - 30 * vals[2] + 16 * vals[1] - vals[0]) / (12 * hstep**2)
        return v, d1, d2

    def profile_num(kappa, wm):
        xi = ctx.mpf(3) / 2 * wm - to_mpf(ctx, c)
        zarg = xi * xi / 3
        wf = whittaker_w(kappa, Fraction(1, 4), zarg, work)
        return ctx.power(xi, -ctx.mpf(1) / 2) * ctx.exp(-xi * xi / 6) * ctx.convert(wf)

    sup = {k: ctx.mpf(0) for k in ("line2", "line3", "line3_alt", "line4_fpp")}
    sq = {k: ctx.mpf(0) for k in sup}
    for w in grid:
        wm = to_mpf(ctx, w)
        h0 = -wm + to_mpf(ctx, c)
        f0, f1, f2 = prof_derivs(Fraction(-1, 12), w)
        g0, g1, g2 = prof_derivs(Fraction(-5, 12), w)
        vals = {
            "line2": -(f0 + wm * f1) / 2 + h0 * f1 - f2,
            "line3": (g0 + wm * g1) / 2 + h0 * g1 - g2,
            "line3_alt": g0 / 2 - wm * g1 / 2 + h0 * g1 - g2,
            "line4_fpp": -(h0 + wm * (-1)) / 2 + h0 * (-1) + (ctx.mpf(3) / 2 * to_mpf(ctx, c) - 2 * wm) - f2,
        }
        for k, v in vals.items():
            sup[k] = max(sup[k], abs(v))
            sq[k] += v * v
    for key, check_id, note in (
        ("line2", "fushchich_line2", "first profile line as printed"),
        ("line3", "fushchich_line3", "second profile line as printed"),
        ("line3_alt", "fushchich_line3_alt", "second profile line with the first-derivative sign flipped"),
        ("line4_fpp", "fushchich_line4", "pressure line as printed (second derivative of the first profile)"),
    ):
        checks.append(CheckResult(
            id=check_id, family="fushchich",
            sup_norm=sup[key], l2_norm=ctx.sqrt(sq[key] / len(grid)),
            verdict="informational", notes=note + "; unit viscosity",
        ))
    return checks


# ---------------------------------------------------------------------------
# Confluent-function checks
# ---------------------------------------------------------------------------


def _log_spaced(lo: float, hi: float, count: int) -> list[Fraction]:
    vals = np.geomspace(lo, hi, count)
    return [as_fraction(float(v)) for v in vals]


def kummer_ode_check(prec: PrecisionConfig, a=Fraction(-1, 4), b=Fraction(1, 2), count=50) -> CheckResult:
    """z F'' + (b - z) F' - a F over log-spaced arguments, for both kinds.

    Derivatives come from the parameter-shift identities, so the residual
    genuinely tests that independently summed series satisfy the defining
    equation.
    """
    ctx = context(prec.base_dps)
    zs = _log_spaced(1e-3, 50.0, count)
    sup = ctx.mpf(0)
    sq = ctx.mpf(0)
    n = 0
    for z in zs:
        zc = to_mpf(ctx, z)
        for fn, d1, d2 in (
            (kummer_m, _m_deriv1, _m_deriv2),
            (kummer_u, _u_deriv1, _u_deriv2),
        ):
            f0 = ctx.convert(fn(KummerArgs(a, b, z), prec))
            f1 = ctx.convert(d1(a, b, z, prec))
            f2 = ctx.convert(d2(a, b, z, prec))
            res = zc * f2 + (to_mpf(ctx, b) - zc) * f1 - to_mpf(ctx, a) * f0
            r = abs(res) / max(abs(f0), ctx.mpf(1))
            sup = max(sup, r)
            sq += r * r
            n += 1
    tol = 10.0 ** (8 - prec.digits)
    return CheckResult(
        id="kummer_ode", family="kummer", sup_norm=sup, l2_norm=ctx.sqrt(sq / n),
        verdict="pass" if sup <= tol else "fail",
        notes=f"{count} log-spaced arguments in (1e-3, 50], both kinds, identity-route derivatives",
    )


def _m_deriv1(a, b, z, prec):
    ctx = context(prec.base_dps)
    return to_mpf(ctx, Fraction(a) / b) * ctx.convert(kummer_m(KummerArgs(a + 1, b + 1, z), prec))


def _m_deriv2(a, b, z, prec):
    ctx = context(prec.base_dps)
    coef = Fraction(a) * (a + 1) / (Fraction(b) * (b + 1))
    return to_mpf(ctx, coef) * ctx.convert(kummer_m(KummerArgs(a + 2, b + 2, z), prec))


def _u_deriv1(a, b, z, prec):
    return kummer_u_deriv(KummerArgs(a, b, z), prec, route="identity")


def _u_deriv2(a, b, z, prec):
    return kummer_u_deriv2(KummerArgs(a, b, z), prec, route="identity")


def _u_fd_derivative(a, b, z, order: int, dps: int = 60):
    """Central finite differences of the second-kind function at high precision."""
    wp = PrecisionConfig(digits=dps, guard_digits=10)
    ctx = context(dps + 10)
    h = Fraction(1, 10**8)
    z = as_fraction(z)
    vals = {k: ctx.convert(kummer_u(KummerArgs(a, b, z + k * h), wp)) for k in (-2, -1, 0, 1, 2)}
    hc = to_mpf(ctx, h)
    if order == 1:
        return (vals[1] - vals[-1]) / (2 * hc)
    return (-vals[2] + 16 * vals[1] - 30 * vals[0] + 16 * vals[-1] - vals[-2]) / (12 * hc * hc)


def deriv_eq21_check(prec: PrecisionConfig, count=10) -> CheckResult:
    """Printed first-derivative recurrence vs identity route vs finite differences."""
    ctx = context(prec.base_dps)
    a, b = Fraction(-1, 4), Fraction(1, 2)
    worst = ctx.mpf(0)
    for z in _log_spaced(0.5, 20.0, count):
        rec = ctx.convert(kummer_u_deriv(KummerArgs(a, b, z), prec, route="recurrence"))
        ident = ctx.convert(kummer_u_deriv(KummerArgs(a, b, z), prec, route="identity"))
        fd = _u_fd_derivative(a, b, z, 1)
        scale = max(abs(ident), ctx.mpf(1) * 1e-30)
        worst = max(worst, abs(rec - ident) / scale, abs(rec - fd) / scale, abs(ident - fd) / scale)
    return CheckResult(
        id="deriv_eq21", family="kummer", sup_norm=worst,
        verdict="pass" if worst <= 1e-10 else "fail",
        notes="pairwise agreement of the printed recurrence, the parameter-shift identity, "
              "and central finite differences",
    )


def deriv_eq22_check(prec: PrecisionConfig, count=10) -> CheckResult:
    """Printed second-derivative expression audited against identity route and FD."""
    ctx = context(prec.base_dps)
    a, b = Fraction(-1, 4), Fraction(1, 2)
    worst_paper = ctx.mpf(0)
    worst_fd = ctx.mpf(0)
    for z in _log_spaced(0.5, 20.0, count):
        ident = ctx.convert(kummer_u_deriv2(KummerArgs(a, b, z), prec, route="identity"))
        paper = ctx.convert(kummer_u_deriv2(KummerArgs(a, b, z), prec, route="recurrence"))
        fd = _u_fd_derivative(a, b, z, 2)
        scale = max(abs(ident), ctx.mpf(1) * 1e-30)
        worst_paper = max(worst_paper, abs(paper - ident) / scale)
        worst_fd = max(worst_fd, abs(ident - fd) / scale)
    return CheckResult(
        id="deriv_eq22", family="kummer", sup_norm=worst_paper, l2_norm=worst_fd,
        verdict="informational",
        notes="sup_norm: printed expression vs identity route; l2_norm: identity route vs "
              "finite differences (no pass threshold by design)",
    )


def whittaker_identity_check(prec: PrecisionConfig) -> CheckResult:
    """Whittaker assembly vs an independent route through the Kummer transformation.

    The second route evaluates the first-kind series at negated argument and
    restores the exponential, so the two sides share no series evaluations.
    """
    ctx = context(prec.base_dps)
    worst = ctx.mpf(0)
    for kappa, mu in ((Fraction(-1, 12), Fraction(1, 4)), (Fraction(-5, 12), Fraction(1, 4))):
        a = Fraction(1, 2) + mu - kappa
        b = 1 + 2 * mu
        for z in (Fraction(1, 2), Fraction(1), Fraction(3)):
            lhs = ctx.convert(whittaker_w(kappa, mu, z, prec))
            zc = to_mpf(ctx, z)
            m_neg = ctx.convert(kummer_m(KummerArgs(Fraction(b) - a, b, -z), prec))
            rhs = ctx.exp(zc / 2) * ctx.power(zc, to_mpf(ctx, Fraction(1, 2) + mu)) * m_neg
            worst = max(worst, abs(lhs - rhs) / abs(lhs))
    tol = 10.0 ** (6 - prec.digits)
    return CheckResult(
        id="whittaker_identity", family="kummer", sup_norm=worst,
        verdict="pass" if worst <= tol else "fail",
        notes="direct assembly vs exp-transformed negated-argument series",
    )


def precision_sentinel_check(prec: PrecisionConfig) -> CheckResult:
    """Reproduce the low-precision breakdown of the second-kind evaluation.

    A 15-digit internal cap must visibly corrupt the cancellation-heavy
    range while two independent high-precision settings agree far beyond it.
    """
    ctx = context(60)
    a, b = Fraction(-1, 4), Fraction(1, 2)
    capped = PrecisionConfig(digits=15, guard_digits=5, internal_cap_digits=15)
    ref = PrecisionConfig(digits=prec.digits)
    lo_dev = ctx.mpf(0)
    for z in range(40, 81):
        u_ref = ctx.convert(kummer_u(KummerArgs(a, b, z), ref))
        u_cap = ctx.convert(kummer_u(KummerArgs(a, b, z), capped))
        lo_dev = max(lo_dev, abs(u_cap - u_ref) / abs(u_ref))
    hi_dev = ctx.mpf(0)
    p35 = PrecisionConfig(digits=35)
    p45 = PrecisionConfig(digits=45)
    for z in (40, 50, 60, 70, 80):
        u35 = ctx.convert(kummer_u(KummerArgs(a, b, z), p35))
        u45 = ctx.convert(kummer_u(KummerArgs(a, b, z), p45))
        hi_dev = max(hi_dev, abs(u35 - u45) / abs(u45))
    ok = lo_dev > 1e-6 and hi_dev <= 1e-30
    return CheckResult(
        id="precision_sentinel", family="kummer", sup_norm=lo_dev, l2_norm=hi_dev,
        verdict="pass" if ok else "fail",
        notes="sup_norm: worst 15-digit-cap deviation over z in [40, 80] (must exceed 1e-6); "
              "l2_norm: worst 35- vs 45-digit disagreement (must stay below 1e-30)",
    )


# ---------------------------------------------------------------------------
# Profile-level checks
# ---------------------------------------------------------------------------


def g_ode_residual_check(ps: ProfileSet) -> CheckResult:
    """Substitute the tabulated g back into its ODE, normalized pointwise.

    The kink point of the forcing (where the closed-form slope jumps) is
    excluded; the equation holds one-sidedly there.
    """
    prec = ps.prec
    ctx = context(prec.base_dps)
    p = ps.params
    nu = to_mpf(ctx, p.nu)
    c = to_mpf(ctx, p.mass_rate)
    grad, _ = eliminate_pressure_oracle(p)
    kink = -p.mass_rate
    sup = ctx.mpf(0)
    sq = ctx.mpf(0)
    n = 0
    for i, w in enumerate(ps.omega_grid):
        if p.c1 != 0 and w == kink:
            continue
        wm = to_mpf(ctx, w)
        g0, g1, g2 = (ctx.convert(ps.g[i]), ctx.convert(ps.g1[i]), ctx.convert(ps.g2[i]))
        if ps.variant is Variant.PRINTED:
            f0, f1, f2 = (ctx.convert(ps.f[i]), ctx.convert(ps.f1[i]), ctx.convert(ps.f2[i]))
            forcing = f0 / 2 + (wm / 2 - c) * f1 + 3 * nu * f2
        else:
            forcing = to_mpf(ctx, grad)
        res = -3 * nu * g2 + (c - wm / 2) * g1 - g0 / 2 + forcing
        scale = max(abs(3 * nu * g2), abs((c - wm / 2) * g1), abs(g0 / 2), abs(forcing), ctx.mpf(1) * 1e-30)
        r = abs(res) / scale
        sup = max(sup, r)
        sq += r * r
        n += 1
    tol = 50 * float(local_tolerance(prec))
    return CheckResult(
        id="g_ode", family="reduction", sup_norm=sup, l2_norm=ctx.sqrt(sq / max(n, 1)),
        verdict="pass" if sup <= tol else "fail",
        notes=f"dense output substituted back, {ps.variant.value} forcing, tolerance 50x local",
    )


def profile_consistency_check(ps: ProfileSet) -> CheckResult:
    """Continuity closure of the tabulated profiles."""
    defect = ps.continuity_defect()
    slope_defect = ps.derivative_defect()
    tol = max(1e-30, 10.0 ** (1 - ps.prec.digits))
    ok = defect <= tol and slope_defect <= 50 * float(local_tolerance(ps.prec))
    return CheckResult(
        id="profile_consistency", family="reduction", sup_norm=defect, l2_norm=slope_defect,
        verdict="pass" if ok else "fail",
        notes="sup_norm: |f+g+h-c|; l2_norm: |f'+g'+h'|, both over the full grid",
    )


def quadrature_crosscheck(p: FlowParams, ps: ProfileSet, prec: PrecisionConfig, points=None) -> CheckResult:
    """IVP dense output against the reduction-of-order quadrature route."""
    if points is None:
        points = [Fraction(-2), Fraction(-1, 2), Fraction(1, 2), Fraction(3, 2), Fraction(3)]
    ctx = context(prec.base_dps)
    g0 = p.mass_rate / 3
    quad = g_quadrature(p, ps.variant, g0, Fraction(0), Fraction(0), points, prec)
    grid = list(ps.omega_grid)
    worst = ctx.mpf(0)
    for w, qv in zip(points, quad):
        i = grid.index(as_fraction(w))
        ivp = ctx.convert(ps.g[i])
        worst = max(worst, abs(ctx.convert(qv) - ivp) / max(abs(ivp), ctx.mpf(1) * 1e-30))
    return CheckResult(
        id="quadrature_crosscheck", family="reduction", sup_norm=worst,
        verdict="pass" if worst <= 1e-8 else "fail",
        notes=f"two independent solution routes at {len(points)} check points",
    )


# ---------------------------------------------------------------------------
# PDE adjudication
# ---------------------------------------------------------------------------

FD_FLOOR = 1e-8  # below this a residual is considered interpolation/rounding floor


def pde_adjudication(
    profiles: ProfileSet,
    label: str,
    deltas=(Fraction(1, 5), Fraction(1, 10), Fraction(1, 20)),
    box=((Fraction(1, 5), Fraction(6, 5)),) * 3,
    t=Fraction(1),
    prec: PrecisionConfig | None = None,
) -> list[CheckResult]:
    """Grid-refinement classification of one field variant.

    Each equation passes when its residual either converges at second order
    or already sits at the floor, and fails when the residual converges to a
    nonzero function; the variant check aggregates the four equations.
    """
    prec = prec or profiles.prec
    p = profiles.params
    history: dict[str, list[float]] = {eq: [] for eq in PDE_EQUATIONS}
    for delta in deltas:
        grid = _fd_grid(box, delta, t, p.nu)
        norms = fd_pde_residual(profiles, grid, prec)
        for eq in PDE_EQUATIONS:
            history[eq].append(norms[eq]["sup"])
    checks = []
    statuses = {}
    for eq in PDE_EQUATIONS:
        norms = history[eq]
        order = None
        try:
            order = convergence_order(norms, deltas)
        except DegenerateFit:
            pass
        finest = norms[-1]
        if finest <= FD_FLOOR:
            status = "pass"
            note = "residual at the interpolation/arithmetic floor"
        elif order is not None and order >= 1.7:
            status = "pass"
            note = "second-order (or faster, where temporal truncation dominates) convergence"
        elif order is not None and order < 1.0 and finest > 100 * FD_FLOOR:
            status = "fail"
            note = "residual converges to a nonzero function"
        else:
            status = "inconclusive"
            note = "neither clean second-order decay nor a clear nonzero limit"
        statuses[eq] = status
        checks.append(CheckResult(
            id=f"{eq}_{label}", family="pde",
            sup_norm=finest, l2_norm=norms[0], order=order,
            verdict="informational", classification=status,
            notes=note + f"; sup norms over deltas {[float(d) for d in deltas]}: "
                         f"{[f'{v:.3e}' for v in norms]}",
        ))
    if all(s == "pass" for s in statuses.values()):
        overall = "pass"
    elif any(s == "fail" for s in statuses.values()):
        overall = "fail"
    else:
        overall = "inconclusive"
    # classification records what the measurement found; the suite itself does
    # not fail on either variant's outcome
    checks.append(CheckResult(
        id=f"pde_adjudication_{label}", family="pde",
        sup_norm=max(history[eq][-1] for eq in PDE_EQUATIONS),
        verdict="informational", classification=overall,
        notes="aggregate of the four equation classifications for this variant",
    ))
    return checks


def constant_solution_check(prec: PrecisionConfig) -> CheckResult:
    """Rest state (zero mass rate, no kernels): residuals must be pure rounding."""
    p = FlowParams(nu=Fraction(1, 10), accel=0, rho=1, mass_rate=0, c1=0, c2=0, l0=Fraction(5))
    grid_w = default_omega_grid(-4, 4, 101)
    ps = complete_profiles(p, Variant.PRINTED, omega_grid=grid_w, prec=prec)
    worst = 0.0
    for delta in (Fraction(1, 5), Fraction(1, 10), Fraction(1, 20)):
        grid = _fd_grid(((Fraction(1, 5), Fraction(6, 5)),) * 3, delta, Fraction(1), p.nu)
        norms = fd_pde_residual(ps, grid, prec)
        worst = max(worst, max(norms[eq]["sup"] for eq in PDE_EQUATIONS))
    return CheckResult(
        id="constant_solution", family="pde", sup_norm=worst,
        verdict="pass" if worst <= 1e-12 else "fail",
        notes="all four residuals of the rest state across three grid spacings",
    )


def heat_kernel_check() -> CheckResult:
    order, norms = heat_kernel_selftest()
    ok = abs(order - 2.0) <= 0.1
    return CheckResult(
        id="heat_kernel_selftest", family="pde", sup_norm=norms[-1], order=order,
        verdict="pass" if ok else "fail",
        notes=f"1D diffusion fundamental solution, sup norms {[f'{v:.3e}' for v in norms]}",
    )


def stencil_exactness_check() -> CheckResult:
    defect = stencil_exactness_defect()
    return CheckResult(
        id="stencil_exactness", family="pde", sup_norm=defect,
        verdict="pass" if defect <= 1e-12 else "fail",
        notes="degree-2 polynomial fields: FD residual vs analytically assembled residual",
    )


# ---------------------------------------------------------------------------
# Suite orchestration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SuiteOptions:
    checks: tuple | None = None
    deltas: tuple = (Fraction(1, 5), Fraction(1, 10), Fraction(1, 20))
    fd_box: tuple = ((Fraction(1, 5), Fraction(6, 5)),) * 3
    t: Fraction = Fraction(1)
    omega_grid: tuple | None = None
    g_init: tuple | None = None


def _selected(options: SuiteOptions, check_id: str, family: str) -> bool:
    if options.checks is None:
        return True
    for token in options.checks:
        if token == family or check_id == token or check_id.startswith(token):
            return True
    return False


def run_suite(p: FlowParams | None = None, options: SuiteOptions | None = None,
              prec: PrecisionConfig | None = None) -> ResidualReport:
    """Execute the full verification battery and merge one report.

    A failing or crashing check never aborts the remaining ones; crashes are
    recorded with verdict "error" and the exception text.
    """
    p = p or default_flow_params()
    options = options or SuiteOptions()
    prec = prec or PrecisionConfig()
    omega_grid = options.omega_grid or default_omega_grid()
    report = ResidualReport(
        params=p,
        grid_meta={
            "fd_box": [[str(lo), str(hi)] for lo, hi in options.fd_box],
            "fd_deltas": [str(d) for d in options.deltas],
            "t": str(options.t),
            "omega_grid": {
                "min": str(omega_grid[0]),
                "max": str(omega_grid[-1]),
                "count": len(omega_grid),
            },
        },
        precision_digits=prec.digits,
    )

    def add(check_id, family, producer):
        if not _selected(options, check_id, family):
            return
        try:
            result = producer()
        except Exception as exc:  # a failing check must not take down the suite
            result = CheckResult(id=check_id, family=family, verdict="error",
                                 notes=f"{type(exc).__name__}: {exc}")
        if isinstance(result, CheckResult):
            report.checks.append(result)
        else:
            report.checks.extend(result)

    add("kummer_ode", "kummer", lambda: kummer_ode_check(prec))
    add("deriv_eq21", "kummer", lambda: deriv_eq21_check(prec))
    add("deriv_eq22", "kummer", lambda: deriv_eq22_check(prec))
    add("whittaker_identity", "kummer", lambda: whittaker_identity_check(prec))
    add("precision_sentinel", "kummer", lambda: precision_sentinel_check(prec))

    add("reduced_ode", "reduction", lambda: audit_reduction(
        p, prec=prec, fd_delta=options.deltas[-1], t=options.t, fd_box=options.fd_box))

    g_init = options.g_init or (p.mass_rate / 3, Fraction(0))

    def printed_profiles():
        return complete_profiles(p, Variant.PRINTED, g_init=g_init, omega_grid=omega_grid, prec=prec)

    add("g_ode", "reduction", lambda: g_ode_residual_check(printed_profiles()))
    add("profile_consistency", "reduction", lambda: profile_consistency_check(printed_profiles()))
    add("quadrature_crosscheck", "reduction", lambda: quadrature_crosscheck(p, printed_profiles(), prec))

    add("heat_kernel_selftest", "pde", heat_kernel_check)
    add("stencil_exactness", "pde", stencil_exactness_check)
    add("constant_solution", "pde", lambda: constant_solution_check(prec))
    add("pde_printed", "pde", lambda: pde_adjudication(
        printed_profiles(), "printed", options.deltas, options.fd_box, options.t, prec))
    add("pde_derived", "pde", lambda: pde_adjudication(
        derived_consistent_profiles(p, g_init=g_init, omega_grid=omega_grid, prec=prec),
        "derived", options.deltas, options.fd_box, options.t, prec))

    add("fushchich", "fushchich", lambda: audit_fushchich(prec=prec))
    return report
