"""Exception hierarchy.

User/configuration problems derive from :class:`InputError` (CLI exit code 2),
numerical failures from :class:`NumericalError` (CLI exit code 3).
"""


class SievePanelError(Exception):
    """Base class for all package errors."""


class InputError(SievePanelError, ValueError):
    """Bad data, bad arguments or bad configuration."""


class NumericalError(SievePanelError, ArithmeticError):
    """A linear system could not be solved reliably."""


# panel data
class SchemaError(InputError):
    pass


class MissingCell(InputError):
    pass


class DuplicateCell(InputError):
    pass


class NonNumeric(InputError):
    pass


class ConstantRegressor(InputError):
    def __init__(self, j, name=None):
        self.j = j
        label = f"{name!r} (index {j})" if name is not None else f"index {j}"
        super().__init__(f"regressor {label} is constant; cannot scale to [0, 1]")


class PanelShapeError(InputError):
    pass


# basis / penalty / estimation
class InvalidKnotCount(InputError):
    pass


class InvalidKnots(InputError):
    pass


class NegativeArgument(InputError):
    pass


class BelowThreshold(SievePanelError):
    """Raised by the LQA weight when a block norm is numerically zero.

    Not a user error: the solver catches it and hard-zeroes the block.
    """


class ShapeMismatch(InputError):
    pass


class SingularDesign(NumericalError):
    pass


class MaxIterExceeded(UserWarning):
    """Warning category: LQA stopped at ``max_iter`` without converging."""


# path / tuning
class UnsortedGrid(InputError):
    pass


class EmptyGrid(InputError):
    pass


class TooManyFolds(InputError):
    pass


class NoValidCandidate(NumericalError):
    pass


class EmptyModelList(InputError):
    pass


class ModelNotOnPath(InputError):
    pass


# inference
class SingularVNT(NumericalError):
    pass


class MissingEvaluationPoint(InputError):
    pass


class WindowTooLarge(InputError):
    pass


# simulation
class OutOfDomain(InputError):
    pass
