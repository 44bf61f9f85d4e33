"""Exception types shared across the package."""


class SelfSimFlowError(Exception):
    """Base class for all package-specific errors."""


class PoleError(SelfSimFlowError, ValueError):
    """Evaluation requested at a pole of a Gamma-type function."""


class DomainError(SelfSimFlowError, ValueError):
    """Argument outside the domain an operation is defined on."""


class NoConvergence(SelfSimFlowError, ArithmeticError):
    """A series or iteration hit its term/iteration cap before converging."""


class IntegratorFailure(SelfSimFlowError, ArithmeticError):
    """Adaptive ODE integration could not proceed (step size underflow)."""


class OutOfHull(SelfSimFlowError, ValueError):
    """A query point maps outside the tabulated profile range."""


class DegenerateFit(SelfSimFlowError, ArithmeticError):
    """Convergence-order fit rejected: norms sit at the arithmetic floor."""
