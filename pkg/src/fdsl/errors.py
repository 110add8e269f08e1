"""Exception and warning types raised across the package."""


class FDError(Exception):
    """Base class for all solver errors."""


class SingularEvaluation(FDError):
    """The potential was evaluated on (or numerically at) a singular abscissa."""


class BracketFailure(FDError):
    """No sign change of the characteristic function could be located."""


class ParameterSearchExhausted(FDError):
    """The quadrature parameter search hit its cap on K."""


class DegenerateDenominator(FDError):
    """A non-resonant formula met a vanishing denominator."""


class ZeroNorm(FDError):
    """The convergence radius is unbounded because the perturbation vanishes."""


class NotConvergent(FDError):
    """The a-priori convergence condition r_n < 1 does not hold."""


class StepUnderflow(FDError):
    """The adaptive ODE integrator could not make progress."""


class NoSignChange(FDError):
    """The shooting function does not change sign on the supplied bracket."""


class ConfigError(FDError):
    """Base class for configuration problems."""


class ParseError(ConfigError):
    """The configuration file is not well-formed."""


class ValidationError(ConfigError):
    """The configuration is well-formed but violates a constraint."""


class DivergenceWarning(RuntimeWarning):
    """Eigenvalue corrections kept growing; the series may diverge."""
