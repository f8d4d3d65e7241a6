"""Exception types shared across the package."""


class IsolabError(Exception):
    """Base class for all package-specific errors."""


class NonUnitDeterminant(IsolabError):
    """A 2x2 matrix expected in SL2(C) has determinant away from 1."""


class OutOfChart(IsolabError):
    """A logarithm / chart inversion was requested outside its radius."""


class IsotropicForm(IsolabError):
    """The requested quadratic form has a nontrivial rational zero."""


class BudgetExceeded(IsolabError):
    """An enumeration exceeded its element or norm budget."""


class BallTooSmall(IsolabError):
    """A max/min over the group could not be certified inside the cached ball."""


class ElementaryStabilizer(IsolabError):
    """A plane stabilizer turned out elementary (no surface group found)."""


class InsufficientMass(IsolabError):
    """A measurement had too few hits to report a stable number."""


class IncompleteOrbitReduction(IsolabError):
    """Orbit classification could not be certified within the search budget."""


class SlowConvergence(IsolabError):
    """An approximation scheme failed its internal stabilization check."""


class NotCertified(IsolabError):
    """A freeness / discreteness certificate could not be established."""


class NoConvergence(IsolabError):
    """An iterative solver left its basin or stalled."""


class InfiniteArea(IsolabError):
    """A fundamental domain has free boundary sides (infinite covolume)."""


class UnsupportedMode(IsolabError):
    """An operation was requested outside the geometry mode it supports."""


class InsufficientGrowthData(IsolabError):
    """Too few orbit-growth windows to fit an exponent."""


class EmptyWindow(IsolabError):
    """A measure window contains no atoms."""


class NonConvergedAverage(IsolabError):
    """Two independent estimators of the same average disagree."""


class ConfigError(IsolabError):
    """A run configuration failed validation."""


class AssertionFailure(IsolabError):
    """A configured experiment assertion did not hold."""
