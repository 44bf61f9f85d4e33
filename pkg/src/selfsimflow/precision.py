"""Working-precision configuration and arbitrary-precision arithmetic helpers.

All special-function internals run on mpmath arbitrary-precision floats.
Instead of mutating the process-global ``mpmath.mp`` context, every
computation grabs an immutable-by-convention context for an explicit number
of decimal digits from :func:`context`.  Contexts are cached per digit count
and never have their precision changed after creation, so concurrent use
from several threads is safe.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from fractions import Fraction

from mpmath.ctx_mp import MPContext

__all__ = ["PrecisionConfig", "context", "to_mpf", "as_fraction", "exact_fraction", "fmt_sci"]

_ctx_cache: dict[int, MPContext] = {}
_ctx_lock = threading.Lock()


def context(dps: int) -> MPContext:
    """Return a cached mpmath context with ``dps`` decimal digits.

    The returned context must be treated as read-only; its precision is set
    once here and never touched again.
    """
    if dps < 2:
        raise ValueError("context precision must be at least 2 digits")
    ctx = _ctx_cache.get(dps)
    if ctx is None:
        with _ctx_lock:
            ctx = _ctx_cache.get(dps)
            if ctx is None:
                ctx = MPContext()
                ctx.dps = dps
                _ctx_cache[dps] = ctx
    return ctx


def as_fraction(x) -> Fraction:
    """Coerce an exact-representable number to ``Fraction``.

    Strings go through ``Fraction`` directly so decimal literals like
    ``"0.1"`` stay exact; floats keep their exact binary value.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, str)):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x)
    raise TypeError(f"cannot interpret {x!r} as an exact rational")


def to_mpf(ctx: MPContext, x):
    """Convert ``x`` to an mpf of ``ctx`` with one correctly-rounded step."""
    if isinstance(x, Fraction):
        if x.denominator == 1:
            return ctx.mpf(x.numerator)
        return ctx.fdiv(x.numerator, x.denominator)
    return ctx.convert(x)


def exact_fraction(x) -> Fraction:
    """The exact rational value of a binary float or mpf (dyadic), or of
    anything :func:`as_fraction` accepts."""
    mpf_tuple = getattr(x, "_mpf_", None)
    if mpf_tuple is not None:
        sign, man, exp, _ = mpf_tuple
        if man == 0:
            return Fraction(0)
        v = Fraction(man) * Fraction(2) ** exp
        return -v if sign else v
    return as_fraction(x)


def fmt_sci(x, digits: int) -> str:
    """Format a number in scientific notation with ``digits`` significant digits.

    Deterministic, locale-independent, '.' decimal separator, always carries
    an explicit exponent (``0.0e+0`` for zero).
    """
    from mpmath.libmp import to_str

    ctx = context(max(digits + 2, 15))
    v = to_mpf(ctx, x)
    if not ctx.isfinite(v):
        return str(v)
    return to_str(
        v._mpf_,
        digits,
        strip_zeros=False,
        min_fixed=1,
        max_fixed=0,
        show_zero_exponent=True,
    )


@dataclass(frozen=True)
class PrecisionConfig:
    """Precision contract for every numeric operation in the package.

    digits
        Requested number of correct significant decimal digits P of final
        results.
    guard_digits
        Extra digits carried internally on top of ``digits``.
    series_rel_tol
        Term-to-sum stopping ratio for power series.  ``None`` means
        ``10**-(digits + guard_digits)``; during cancellation-margin retries
        the effective tolerance tightens by the margin so the extra digits
        are actually resolved.
    max_terms
        Hard cap on series length before :class:`~selfsimflow.errors.NoConvergence`.
    internal_cap_digits
        Optional hard cap on the *internal* working precision.  This exists
        to reproduce what happens when cancellation-prone evaluations are
        attempted at fixed low precision; normal use leaves it ``None``.
    """

    digits: int = 40
    guard_digits: int = 10
    series_rel_tol: float | None = None
    max_terms: int = 100_000
    internal_cap_digits: int | None = None

    def __post_init__(self):
        if self.digits < 15:
            raise ValueError("digits must be >= 15")
        if self.guard_digits < 5:
            raise ValueError("guard_digits must be >= 5")
        if self.max_terms < 1:
            raise ValueError("max_terms must be positive")
        if self.series_rel_tol is not None:
            # exact comparison via Fraction; avoids float underflow for large P
            if not Fraction(self.series_rel_tol) < Fraction(1, 10**self.digits):
                raise ValueError("series_rel_tol must be < 10**-digits")
        if self.internal_cap_digits is not None and self.internal_cap_digits < 2:
            raise ValueError("internal_cap_digits must be >= 2")

    @property
    def base_dps(self) -> int:
        return self.digits + self.guard_digits

    def working_dps(self, margin: int) -> int:
        """Internal working precision for a given cancellation margin."""
        dps = self.base_dps + max(0, margin)
        if self.internal_cap_digits is not None:
            dps = min(dps, self.internal_cap_digits)
        return dps

    def series_tol(self, ctx: MPContext, margin: int):
        """Effective stopping ratio at the given margin, as an mpf of ctx."""
        if self.series_rel_tol is None:
            return ctx.mpf(10) ** (-(self.digits + self.guard_digits + max(0, margin)))
        return ctx.convert(self.series_rel_tol) * ctx.mpf(10) ** (-max(0, margin))

    def out_context(self) -> MPContext:
        return context(self.digits)

    def round_out(self, x):
        """Round an internal value to the requested P digits."""
        return to_mpf(self.out_context(), x)
