"""Command-line front end.

Subcommands: eval-kummer (single special-function values), profile
(similarity-profile CSV), field (space-time sample CSV), level-set
(implicit-surface point cloud CSV), verify (JSON residual report).

Exit codes: 0 success, 1 usage error, 2 numeric failure, 3 verification
completed with a failing non-informational check.  Diagnostics go to
stderr; data goes to stdout or --out only.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from fractions import Fraction

from . import __version__
from .csvio import write_field_csv, write_points_csv, write_profile_csv
from .errors import SelfSimFlowError
from .fields import GridSpec, level_set_points, sample_grid
from .kummer import KummerArgs, gamma, kummer_m, kummer_u, kummer_u_deriv, kummer_u_deriv2, whittaker_w
from .precision import PrecisionConfig, as_fraction, fmt_sci
from .reduction import FlowParams, Variant, complete_profiles, default_omega_grid
from .verify import SuiteOptions, default_dt, run_suite

_EVAL_FUNCS = {
    "M": (3, "first-kind confluent function M(a, b, z)"),
    "U": (3, "second-kind confluent function U(a, b, z)"),
    "dU": (3, "first derivative of U(a, b, z)"),
    "d2U": (3, "second derivative of U(a, b, z)"),
    "W": (3, "Whittaker function w(kappa, mu, z)"),
    "gamma": (1, "Gamma(x)"),
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 1 instead of argparse's 2
        raise _UsageError(message)


@dataclass
class CliConfig:
    subcommand: str
    precision: PrecisionConfig
    flow: FlowParams | None = None
    variant: Variant = Variant.PRINTED
    omega_range: tuple = (Fraction(-8), Fraction(8), 801)
    grid: tuple | None = None
    t: Fraction = Fraction(1)
    level: Fraction = Fraction(2)
    level_includes_tail: bool = False
    checks_filter: tuple | None = None
    g0: Fraction | None = None
    g0_prime: Fraction | None = None
    out: str | None = None
    kernel_only: bool = False
    func: str | None = None
    values: tuple = ()


def _fraction_arg(text: str) -> Fraction:
    try:
        return as_fraction(text)
    except (ValueError, TypeError, ZeroDivisionError):
        raise _UsageError(f"not a number: {text!r}") from None


def _parse_omega(text: str):
    parts = text.split(":")
    if len(parts) != 3:
        raise _UsageError("--omega wants min:max:count")
    lo, hi = _fraction_arg(parts[0]), _fraction_arg(parts[1])
    try:
        count = int(parts[2])
    except ValueError:
        raise _UsageError("--omega count must be an integer") from None
    if count < 2 or not hi > lo:
        raise _UsageError("--omega needs max > min and count >= 2")
    return lo, hi, count


def _parse_grid(text: str):
    axes = text.split(",")
    if len(axes) != 3:
        raise _UsageError("--grid wants x0:x1:nx,y0:y1:ny,z0:z1:nz")
    return tuple(_parse_omega(axis) for axis in axes)


def _add_flow_flags(sp):
    sp.add_argument("--nu", default="0.1", help="kinematic viscosity (default 0.1)")
    sp.add_argument("--force", default="0", help="external force along z (default 0)")
    sp.add_argument("--rho", default="1", help="density (default 1)")
    sp.add_argument("--c", default="1", help="mass-flow constant (default 1)")
    sp.add_argument("--c1", default="1", help="second-kind kernel weight (default 1)")
    sp.add_argument("--c2", default="0", help="first-kind kernel weight (default 0)")
    sp.add_argument("--l0", default="0", help="pressure gauge at omega = 0 (default 0)")


def _add_common_flags(sp, with_variant=True):
    sp.add_argument("--precision", type=int, default=40, help="significant digits P (default 40)")
    sp.add_argument("--out", default=None, help="output path (default: stdout)")
    if with_variant:
        sp.add_argument("--variant", choices=["printed", "derived"], default="printed",
                        help="reduced-ODE coefficient set (default printed)")


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="selfsimflow",
        description="Exact self-similar flow fields from confluent-function profiles, "
                    "with finite-difference verification.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")

    ek = sub.add_parser("eval-kummer", help="evaluate one special function value")
    ek.add_argument("func", choices=sorted(_EVAL_FUNCS), help="which function")
    ek.add_argument("values", nargs="+", help="its arguments, e.g. M -0.25 0.5 1.0")
    ek.add_argument("--precision", type=int, default=40)
    ek.add_argument("--out", default=None)

    pr = sub.add_parser("profile", help="emit the profile table as CSV")
    _add_flow_flags(pr)
    _add_common_flags(pr)
    pr.add_argument("--omega", default="-8:8:801", help="similarity grid min:max:count")
    pr.add_argument("--g0", default=None, help="initial g value at omega = 0 (default c/3)")
    pr.add_argument("--g0-prime", default=None, help="initial g slope at omega = 0 (default 0)")
    pr.add_argument("--kernel-only", action="store_true",
                    help="drop the constant tail from the f column (figure-caption reading)")

    fd = sub.add_parser("field", help="sample the space-time field on a box")
    _add_flow_flags(fd)
    _add_common_flags(fd)
    fd.add_argument("--omega", default="-8:8:801")
    fd.add_argument("--g0", default=None)
    fd.add_argument("--g0-prime", default=None)
    fd.add_argument("--grid", default="-2:2:21,-2:2:21,-2:2:21",
                    help="sampling box x0:x1:nx,y0:y1:ny,z0:z1:nz")
    fd.add_argument("--t", default="1", help="time of the slice (default 1)")

    ls = sub.add_parser("level-set", help="points where the first velocity component hits a level")
    _add_flow_flags(ls)
    _add_common_flags(ls)
    ls.add_argument("--omega", default="-8:8:801")
    ls.add_argument("--g0", default=None)
    ls.add_argument("--g0-prime", default=None)
    ls.add_argument("--grid", default="-2:2:21,-2:2:21,-2:2:21")
    ls.add_argument("--t", default="1")
    ls.add_argument("--level", default="2", help="target level (default 2, the reference surface)")
    ls.add_argument("--level-includes-tail", action="store_true",
                    help="match the full component instead of the bare kernel")

    vf = sub.add_parser("verify", help="run the verification suite, emit a JSON report")
    _add_flow_flags(vf)
    _add_common_flags(vf, with_variant=False)
    vf.add_argument("--checks", default=None,
                    help="comma-separated check families or id prefixes to run")
    vf.add_argument("--g0", default=None)
    vf.add_argument("--g0-prime", default=None)
    return parser


def parse_args(argv) -> CliConfig:
    parser = _build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        raise _UsageError("a subcommand is required")
    ns = parser.parse_args(argv)
    if ns.subcommand is None:
        parser.print_usage(sys.stderr)
        raise _UsageError("a subcommand is required")
    try:
        precision = PrecisionConfig(digits=ns.precision)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    cfg = CliConfig(subcommand=ns.subcommand, precision=precision, out=ns.out)
    if ns.subcommand == "eval-kummer":
        argc, _ = _EVAL_FUNCS[ns.func]
        if len(ns.values) != argc:
            raise _UsageError(f"eval-kummer {ns.func} wants {argc} argument(s)")
        cfg.func = ns.func
        cfg.values = tuple(_fraction_arg(v) for v in ns.values)
        return cfg
    try:
        cfg.flow = FlowParams(
            nu=_fraction_arg(ns.nu),
            accel=_fraction_arg(ns.force),
            rho=_fraction_arg(ns.rho),
            mass_rate=_fraction_arg(ns.c),
            c1=_fraction_arg(ns.c1),
            c2=_fraction_arg(ns.c2),
            l0=_fraction_arg(ns.l0),
        )
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    if getattr(ns, "variant", None):
        cfg.variant = Variant(ns.variant)
    if getattr(ns, "omega", None):
        cfg.omega_range = _parse_omega(ns.omega)
    if getattr(ns, "grid", None):
        cfg.grid = _parse_grid(ns.grid)
    if getattr(ns, "t", None):
        cfg.t = _fraction_arg(ns.t)
        if not cfg.t > 0:
            raise _UsageError("--t must be positive")
    if getattr(ns, "level", None) is not None:
        cfg.level = _fraction_arg(ns.level)
    cfg.level_includes_tail = bool(getattr(ns, "level_includes_tail", False))
    cfg.kernel_only = bool(getattr(ns, "kernel_only", False))
    if getattr(ns, "g0", None) is not None:
        cfg.g0 = _fraction_arg(ns.g0)
    if getattr(ns, "g0_prime", None) is not None:
        cfg.g0_prime = _fraction_arg(ns.g0_prime)
    if getattr(ns, "checks", None):
        cfg.checks_filter = tuple(tok.strip() for tok in ns.checks.split(",") if tok.strip())
    return cfg


def _open_out(cfg: CliConfig):
    if cfg.out is None or cfg.out == "-":
        return sys.stdout, False
    return open(cfg.out, "w", newline="\n"), True


def _eval_kummer(cfg: CliConfig):
    prec = cfg.precision
    v = cfg.values
    if cfg.func == "M":
        return kummer_m(KummerArgs(v[0], v[1], v[2]), prec)
    if cfg.func == "U":
        return kummer_u(KummerArgs(v[0], v[1], v[2]), prec)
    if cfg.func == "dU":
        return kummer_u_deriv(KummerArgs(v[0], v[1], v[2]), prec)
    if cfg.func == "d2U":
        return kummer_u_deriv2(KummerArgs(v[0], v[1], v[2]), prec)
    if cfg.func == "W":
        return whittaker_w(v[0], v[1], v[2], prec)
    return gamma(v[0], prec)


def _profiles_for(cfg: CliConfig):
    lo, hi, count = cfg.omega_range
    grid = default_omega_grid(lo, hi, count)
    g_init = None
    if cfg.g0 is not None or cfg.g0_prime is not None:
        g_init = (
            cfg.g0 if cfg.g0 is not None else cfg.flow.mass_rate / 3,
            cfg.g0_prime if cfg.g0_prime is not None else Fraction(0),
        )
    return complete_profiles(cfg.flow, cfg.variant, g_init=g_init, omega_grid=grid, prec=cfg.precision)


def _grid_spec(cfg: CliConfig) -> GridSpec:
    (x0, x1, nx), (y0, y1, ny), (z0, z1, nz) = cfg.grid
    spacing = min((x1 - x0) / (nx - 1), (y1 - y0) / (ny - 1), (z1 - z0) / (nz - 1))
    return GridSpec(
        (x0, x1, nx), (y0, y1, ny), (z0, z1, nz),
        t=cfg.t, dt=default_dt(spacing, cfg.t, cfg.flow.nu),
    )


def run(cfg: CliConfig) -> int:
    """Dispatch a parsed configuration; returns the process exit status."""
    out, needs_close = _open_out(cfg)
    try:
        if cfg.subcommand == "eval-kummer":
            out.write(fmt_sci(_eval_kummer(cfg), cfg.precision.digits) + "\n")
            return 0
        if cfg.subcommand == "profile":
            write_profile_csv(out, _profiles_for(cfg), cfg.precision.digits, kernel_only=cfg.kernel_only)
            return 0
        if cfg.subcommand == "field":
            samples = sample_grid(_grid_spec(cfg), _profiles_for(cfg), cfg.precision)
            write_field_csv(out, samples, cfg.precision.digits)
            return 0
        if cfg.subcommand == "level-set":
            points = level_set_points(
                cfg.level, _profiles_for(cfg), cfg.t, _grid_spec(cfg), cfg.precision,
                include_tail=cfg.level_includes_tail,
            )
            write_points_csv(out, points, cfg.precision.digits)
            return 0
        # verify
        options = SuiteOptions(checks=cfg.checks_filter)
        report = run_suite(cfg.flow, options, cfg.precision)
        out.write(report.to_json())
        bad = [c for c in report.checks if c.verdict in ("fail", "error")]
        if bad:
            print(
                "failing checks: " + ", ".join(c.id for c in bad),
                file=sys.stderr,
            )
            return 3
        return 0
    finally:
        if needs_close:
            out.close()


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help/--version
        return int(exc.code or 0)
    try:
        return run(cfg)
    except SelfSimFlowError as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
