"""Exception hierarchy.

Errors split into user errors (bad input, inconsistent files, invalid
parameters) and numerical failures; the command line maps the first family to
exit status 1 and the second to exit status 2.
"""

from __future__ import annotations


class HeritRidgeError(Exception):
    """Base class for all toolkit errors."""


class UserInputError(HeritRidgeError):
    """Invalid input supplied by the caller."""


class NumericalError(HeritRidgeError):
    """A numerical routine failed on otherwise valid input."""


class DimensionMismatch(UserInputError, ValueError):
    pass


class OutOfRange(UserInputError, ValueError):
    pass


class ZeroVarianceColumn(UserInputError, ValueError):
    def __init__(self, column: int):
        self.column = column
        super().__init__(f"column {column} has zero variance (monomorphic variant)")


class NonPositiveSd(UserInputError, ValueError):
    def __init__(self, column: int):
        self.column = column
        super().__init__(f"standard deviation for column {column} is not positive")


class InvalidGenotype(UserInputError, ValueError):
    pass


class RankDeficientCovariates(UserInputError, ValueError):
    pass


class NoConstantNullEigenvector(UserInputError, ValueError):
    pass


class BadMagic(UserInputError, ValueError):
    pass


class TruncatedPayload(UserInputError, ValueError):
    pass


class InconsistentDimensions(UserInputError, ValueError):
    pass


class FoldTooSmall(UserInputError, ValueError):
    pass


class StandardizationSetTooSmall(UserInputError, ValueError):
    pass


class NoCausalVariants(UserInputError, ValueError):
    pass


class EmptyCurve(UserInputError, ValueError):
    pass


class InvalidInversion(UserInputError, ValueError):
    pass


class NumericalFailure(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class HatDiagonalOne(NumericalError):
    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(
            f"hat-matrix diagonal entry {index} is {value:.15g}; penalty too small for the data"
        )


class NonConvergence(NumericalError):
    pass
