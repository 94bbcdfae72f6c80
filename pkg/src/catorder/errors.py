"""Exception hierarchy shared across the package.

Every computational failure raises a subclass of :class:`CatorderError`
so that the service layer can map domain errors onto structured HTTP
responses and the CLI onto exit code 1.
"""

from __future__ import annotations


class CatorderError(Exception):
    """Base class for all catorder errors."""


class DimensionError(CatorderError):
    """A parameter block or data matrix has the wrong shape.

    Carries the name of the offending block so callers can report it.
    """

    def __init__(self, block: str, expected, got):
        self.block = block
        self.expected = expected
        self.got = got
        super().__init__(f"dimension mismatch in {block}: expected {expected}, got {got}")


class InfeasibleError(CatorderError):
    """A cumulative-model parameter lies outside the feasible region.

    ``row`` and ``category`` identify the first violated constraint
    (0-based design row, 0-based category whose probability is <= 0).
    """

    def __init__(self, row: int, category: int, message: str | None = None):
        self.row = row
        self.category = category
        super().__init__(
            message
            or f"infeasible cumulative parameters: probability <= 0 at row {row}, category {category}"
        )


class NonFiniteLikelihoodError(CatorderError):
    """A category with positive count has probability underflowing to zero."""


class SingularHessianError(CatorderError):
    """The (damped) information matrix could not be factorized."""


class NonConvergenceError(CatorderError):
    """Newton iteration exhausted its budget without meeting the tolerance."""


class JTooLargeError(CatorderError):
    """Permutation enumeration requested beyond the J <= 8 guard."""


class NotEquivalentError(CatorderError):
    """Parameter transformation requested between non-equivalent orders."""


class UnsupportedTransformError(CatorderError):
    """No exact parameter transformation exists (continuation-ratio po/ppo)."""


class DataError(CatorderError):
    """Malformed input data (CSV rows, counts, plan files)."""
