"""Error hierarchy. Each category carries the exit code the CLI reports."""


class NewtonDualError(Exception):
    """Base class for every error raised by newton_dual"""

    exit_code = 5


class InputError(NewtonDualError, ValueError):
    exit_code = 2


class PartialResultWarning(NewtonDualError):
    exit_code = 3


class VerificationFailure(NewtonDualError):
    exit_code = 4


class NumericalError(NewtonDualError, ArithmeticError):
    exit_code = 5


# heunfn
class NonConvergent(NumericalError):
    """Series did not meet the truncation rule within max_terms"""


SeriesNonConvergent = NonConvergent


class InvalidAlpha(InputError):
    """(1+alpha)_n vanishes: alpha is a negative integer"""


class InvalidB(InputError):
    """Kummer lower parameter is a non-positive integer"""


class DivergentTail(NumericalError):
    """Asymptotic series terms started growing before n_terms"""


class PreconditionViolated(InputError):
    pass


# connection
class QuadratureFailed(NumericalError):
    pass


class IntegrandDiverged(NumericalError):
    pass


class Indeterminate(NumericalError):
    pass


class IllConditioned(NumericalError):
    pass


# duality
class PoleAtMinusThree(InputError):
    """Pivot power -2 (a = -3) has no dual"""


class MultiTermInput(InputError):
    pass


class PivotOutOfRange(InputError):
    pass


class UnsolvableAngular(NumericalError):
    pass


class NoBracket(NumericalError):
    pass


class NonMonotone(NumericalError):
    pass


# spectra
class NotHeunReducible(InputError):
    pass


class NoneFound(NumericalError):
    pass


class ReductionFailed(NumericalError):
    pass


class UnsupportedFamily(InputError):
    pass


# oracle
class GridTooCoarse(NumericalError):
    pass


class MatchUnstable(NumericalError):
    pass


class NoAllowedRegion(InputError):
    pass


class TurningPointNotBracketed(NumericalError):
    pass
