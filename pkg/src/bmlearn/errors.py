"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, data problems
exit 2, inference failures exit 3.
"""


class BmlError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(BmlError):
    """The caller violated an API contract (bad argument, wrong state)."""


class ShapeError(UsageError):
    """Array dimensions do not conform to an operation's signature."""


class StateError(UsageError):
    """Operation requires a state the object is not in (e.g. unfitted)."""


class DataError(BmlError):
    """Input data is unusable (non-finite, ragged, constant column, ...)."""


class PersistenceError(DataError):
    """A saved-model file is corrupt, truncated, or incompatible."""


class UndefinedScoreError(DataError):
    """The requested score is mathematically undefined for this data."""


class NumericError(BmlError):
    """A numerical routine failed (e.g. Cholesky on a non-SPD matrix)."""


class DivergenceError(BmlError):
    """An inference run failed to make progress and was aborted."""
