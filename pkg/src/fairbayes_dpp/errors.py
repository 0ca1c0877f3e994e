"""Exception hierarchy shared by every module."""


class FairBayesError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(FairBayesError, KeyError):
    """A required column is missing or the column roles are inconsistent."""

    def __str__(self):
        return Exception.__str__(self)


class DataError(FairBayesError, ValueError):
    """Input data violates a dataset invariant (empty, non-binary labels, ...)."""


class ConfigError(FairBayesError, ValueError):
    """A configuration value is out of range."""


class ShapeError(FairBayesError, ValueError):
    pass


class PreconditionError(FairBayesError, ValueError):
    pass


class DivergenceError(FairBayesError, ArithmeticError):
    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"non-finite parameters or loss at epoch {epoch}")


class CalibrationInputError(FairBayesError, ValueError):
    """A group required for calibration has no rows."""


class UndefinedPPVError(FairBayesError, ValueError):
    """No score reaches the threshold, so the empirical PPV has an empty denominator."""


class UnreachableTargetError(FairBayesError, ValueError):
    """A PPV target lies outside the range a group can attain."""


class CalibrationInfeasibleError(FairBayesError, RuntimeError):
    """The anchor group's PPV never reaches the largest group base rate."""


class ConditionFailure(FairBayesError, RuntimeError):
    """The sufficient condition for group-wise thresholding does not hold.

    Predictive parity may be the wrong target here; consider other fairness
    measures.
    """


class OracleInfeasibleError(ConditionFailure):
    pass


class DegenerateTestError(FairBayesError, ValueError):
    pass


class DomainError(FairBayesError, ValueError):
    pass


RECOMMENDATION = (
    "sufficient condition fails: min group PPV at the cost threshold is below "
    "the largest group base rate; consider other fairness measures"
)
