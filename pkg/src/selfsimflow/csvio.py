"""CSV emit/load for profiles, field samples and level-set points.

All writers produce LF line endings, '.' decimal separators and P-digit
scientific notation; identical inputs give byte-identical output.  The
readers invert the writers bit-for-bit at the same digit count, which the
verification machinery relies on for golden-file comparisons.
"""

from __future__ import annotations

from .precision import context, fmt_sci
from .reduction import ProfileSet

PROFILE_HEADER = "omega,f,g,h,l,f1,g1,h1,l1"
FIELD_HEADER = "x,y,z,t,u,v,w,p"
POINTS_HEADER = "x,y,z"


def write_profile_csv(fh, ps: ProfileSet, digits: int, kernel_only: bool = False):
    """Profile table; ``kernel_only`` drops the constant tail from the f column."""
    ctx = context(digits + 5)
    p = ps.params
    tail = ctx.mpf(0)
    if kernel_only:
        from .precision import to_mpf

        tail = to_mpf(ctx, p.mass_rate / 3 - 2 * p.accel / 3)
    fh.write(PROFILE_HEADER + "\n")
    for i, w in enumerate(ps.omega_grid):
        f_val = ctx.convert(ps.f[i]) - tail
        row = [
            fmt_sci(w, digits),
            fmt_sci(f_val, digits),
            fmt_sci(ps.g[i], digits),
            fmt_sci(ps.h[i], digits),
            fmt_sci(ps.l[i], digits),
            fmt_sci(ps.f1[i], digits),
            fmt_sci(ps.g1[i], digits),
            fmt_sci(ps.h1[i], digits),
            fmt_sci(ps.l1[i], digits),
        ]
        fh.write(",".join(row) + "\n")


def write_field_csv(fh, samples, digits: int):
    fh.write(FIELD_HEADER + "\n")
    for s in samples:
        row = [
            fmt_sci(s.point.x, digits),
            fmt_sci(s.point.y, digits),
            fmt_sci(s.point.z, digits),
            fmt_sci(s.point.t, digits),
            fmt_sci(s.u, digits),
            fmt_sci(s.v, digits),
            fmt_sci(s.w, digits),
            fmt_sci(s.p, digits),
        ]
        fh.write(",".join(row) + "\n")


def write_points_csv(fh, points, digits: int):
    fh.write(POINTS_HEADER + "\n")
    for x, y, z in points:
        fh.write(",".join(fmt_sci(v, digits) for v in (x, y, z)) + "\n")


def _read_csv(fh, expected_header: str):
    header = fh.readline().strip()
    if header != expected_header:
        raise ValueError(f"unexpected CSV header {header!r}, wanted {expected_header!r}")
    names = expected_header.split(",")
    columns = {n: [] for n in names}
    for line in fh:
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(names):
            raise ValueError(f"malformed CSV row: {line!r}")
        for n, v in zip(names, parts):
            columns[n].append(v)
    return columns


def read_profile_csv(fh, digits: int):
    """Columns as mpf lists at the writing precision; round-trips exactly."""
    ctx = context(digits + 5)
    cols = _read_csv(fh, PROFILE_HEADER)
    return {n: [ctx.mpf(v) for v in vals] for n, vals in cols.items()}


def read_field_csv(fh, digits: int):
    ctx = context(digits + 5)
    cols = _read_csv(fh, FIELD_HEADER)
    return {n: [ctx.mpf(v) for v in vals] for n, vals in cols.items()}


def read_points_csv(fh, digits: int):
    ctx = context(digits + 5)
    cols = _read_csv(fh, POINTS_HEADER)
    return {n: [ctx.mpf(v) for v in vals] for n, vals in cols.items()}
