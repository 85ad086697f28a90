"""Exception hierarchy shared by the simulation and verification code."""


class GmflouError(Exception):
    """Base class for all package errors."""


class ParameterError(GmflouError, ValueError):
    """A model, noise or grid parameter is outside its admissible range."""


class DomainError(GmflouError, ValueError):
    """A closed form was evaluated where it is undefined (pole, divergence)."""


class StatisticsError(GmflouError, ValueError):
    """Too few replicas, or data unsuitable for the requested statistic."""


class CouplingError(GmflouError, ValueError):
    """Two ensembles that must share a noise realisation do not."""


class FitError(GmflouError, ValueError):
    """A regression could not be carried out on the supplied data."""


class QuadratureError(GmflouError, ArithmeticError):
    """Numerical integration failed to reach the requested tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
