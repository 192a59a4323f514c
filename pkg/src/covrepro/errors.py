"""Exception types raised across the package."""


class CovReproError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(CovReproError, ValueError):
    """A matrix that must be positive definite is not (within tolerance)."""

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class SingularLoadings(CovReproError, ValueError):
    """Loadings are column-rank deficient, so Lambda' Psi^-2 Lambda is singular."""


class CommunalityAtLeastOne(CovReproError, ValueError):
    """A requested population model implies a communality of one or more."""


class DimensionMismatch(CovReproError, ValueError):
    pass


class EmptyGrid(CovReproError, ValueError):
    pass


class InconsistentCoordinates(CovReproError, ValueError):
    pass


class ZeroVarianceColumn(CovReproError, ValueError):
    def __init__(self, column):
        super().__init__(f"column {column} has zero variance")
        self.column = column


class NonConvergence(CovReproError, RuntimeError):
    """Raised only on request; extraction normally flags non-convergence instead."""


class ParseError(CovReproError, ValueError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ConfigError(CovReproError, ValueError):
    pass
