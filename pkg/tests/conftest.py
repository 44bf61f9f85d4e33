from fractions import Fraction

import pytest

from selfsimflow.precision import PrecisionConfig, context
from selfsimflow.reduction import FlowParams, default_flow_params


@pytest.fixture(scope="session")
def prec40():
    return PrecisionConfig(digits=40)


@pytest.fixture(scope="session")
def prec60():
    return PrecisionConfig(digits=60)


@pytest.fixture(scope="session")
def figure_params() -> FlowParams:
    return default_flow_params()


@pytest.fixture(scope="session")
def ctx60():
    return context(60)


def rel_err(ctx, got, want):
    g = ctx.convert(got)
    w = ctx.mpf(want) if isinstance(want, str) else ctx.convert(want)
    if w == 0:
        return abs(g)
    return abs((g - w) / w)


@pytest.fixture(scope="session")
def relerr(ctx60):
    def _rel(got, want):
        return rel_err(ctx60, got, want)

    return _rel


@pytest.fixture(scope="session")
def small_grid():
    from selfsimflow.reduction import default_omega_grid

    return default_omega_grid(Fraction(-2), Fraction(2), 81)
