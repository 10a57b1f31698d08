"""Exception hierarchy.

Every failure the library raises on purpose derives from :class:`ArchMxError`,
so callers (and the CLI) can separate data problems from programming errors.
"""


class ArchMxError(Exception):
    """Base class for all library errors."""


# -- input validation -------------------------------------------------------
class LengthMismatch(ArchMxError, ValueError):
    pass


class DegenerateColumn(ArchMxError, ValueError):
    def __init__(self, name):
        super().__init__(f"covariate column {name!r} is constant")
        self.name = name


class NonFiniteData(ArchMxError, ValueError):
    pass


class InvalidOrder(ArchMxError, ValueError):
    pass


class EmptyInput(ArchMxError, ValueError):
    pass


class DimensionMismatch(ArchMxError, ValueError):
    pass


class IndexOutOfRange(ArchMxError, IndexError):
    pass


# -- simulation ---------------------------------------------------------------
class CholeskyFailure(ArchMxError):
    pass


class InvalidDf(ArchMxError, ValueError):
    pass


class NonPositiveVolatility(ArchMxError):
    pass


class Overflow(ArchMxError):
    """The simulated recursion exploded (non-stationary parameters)."""


# -- estimation -----------------------------------------------------------------
class ZeroRowSum(ArchMxError):
    pass


class SingularNormalEquations(ArchMxError):
    pass


class OptimizerDiverged(ArchMxError):
    pass


class DimensionTooHigh(ArchMxError):
    pass


# -- testing ----------------------------------------------------------------------
class WindowTooLarge(ArchMxError, ValueError):
    pass


class EvenWindow(ArchMxError, ValueError):
    pass


class MemoryGuard(ArchMxError):
    pass


class TooShort(ArchMxError, ValueError):
    pass


# -- selection --------------------------------------------------------------------
class InvalidLevel(ArchMxError, ValueError):
    pass


class InvalidPValue(ArchMxError, ValueError):
    pass


# -- ingestion --------------------------------------------------------------------
class FileNotFound(ArchMxError, FileNotFoundError):
    pass


class MissingColumn(ArchMxError, KeyError):
    def __init__(self, name):
        super().__init__(f"column {name!r} not found")
        self.name = name

    def __str__(self):
        return self.args[0]


class NonNumericCell(ArchMxError, ValueError):
    def __init__(self, row, col):
        super().__init__(f"non-numeric value at row {row}, column {col!r}")
        self.row = row
        self.col = col


class NonPositivePrice(ArchMxError, ValueError):
    pass
