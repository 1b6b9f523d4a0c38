"""Exception hierarchy shared by every module.

Each class carries a stable ``code`` used by the command line front end.
"""


class MMSpaceError(Exception):
    code = "MMSpaceError"
    exit_status = 1


class NotAMetric(MMSpaceError, ValueError):
    code = "NotAMetric"


class BadWeights(MMSpaceError, ValueError):
    code = "BadWeights"


class DuplicatePoints(MMSpaceError, ValueError):
    code = "DuplicatePoints"


class BadScale(MMSpaceError, ValueError):
    code = "BadScale"


class ParseError(MMSpaceError, ValueError):
    code = "ParseError"


class DimensionMismatch(MMSpaceError, ValueError):
    code = "DimensionMismatch"


class NotDivisible(MMSpaceError, ValueError):
    code = "NotDivisible"


class NotIrreducible(MMSpaceError, ValueError):
    code = "NotIrreducible"


class AmbiguousFactorization(MMSpaceError, ArithmeticError):
    code = "AmbiguousFactorization"


class SizeOverflow(MMSpaceError):
    """A product would exceed the configured point budget."""

    code = "SizeOverflow"
    exit_status = 2


class BudgetExceeded(MMSpaceError):
    """An exact evaluation would enumerate more terms than allowed."""

    code = "BudgetExceeded"
    exit_status = 2


class TooLarge(MMSpaceError):
    code = "TooLarge"
    exit_status = 2
