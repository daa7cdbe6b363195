"""Exception hierarchy.

Every error carries the process exit code the CLI maps it to:
2 for configuration/IO problems, 3 for data validation, 4 for numeric failures.
"""


class XcsgeError(Exception):
    exit_code = 3


# configuration / IO
class ConfigError(XcsgeError):
    exit_code = 2


class DatasetNotFound(ConfigError):
    pass


# data validation
class ParseError(XcsgeError, ValueError):
    pass


class SchemaMismatch(XcsgeError, ValueError):
    pass


class TimestampOrderError(XcsgeError, ValueError):
    pass


class ShapeMismatch(XcsgeError, ValueError):
    pass


class DimensionMismatch(ShapeMismatch):
    pass


class EmptyDataset(XcsgeError, ValueError):
    pass


class EmptyFitSet(EmptyDataset):
    pass


class InsufficientSamples(XcsgeError, ValueError):
    pass


class TooFewSamples(InsufficientSamples):
    pass


class TooFewGroups(InsufficientSamples):
    pass


class ShiftTooLarge(XcsgeError, ValueError):
    pass


class NonPositiveMax(XcsgeError, ValueError):
    pass


class TransformError(XcsgeError, ValueError):
    pass


class LeadtimeOutOfRange(XcsgeError, IndexError):
    pass


class UnknownLabel(XcsgeError, ValueError):
    pass


class MissingPrediction(XcsgeError, KeyError):
    pass


class IncompleteCoverage(MissingPrediction):
    def __init__(self, missing):
        self.missing = list(missing)
        shown = ", ".join(f"({s}, {t})" for s, t in self.missing[:10])
        more = "" if len(self.missing) <= 10 else f" ... (+{len(self.missing) - 10} more)"
        super().__init__(f"missing predictions for (sample_id, leadtime): {shown}{more}")

    def __str__(self):
        return self.args[0]


class InvalidLagCount(XcsgeError, ValueError):
    pass


class AllMembersMasked(XcsgeError, ValueError):
    pass


class EmptyEnsemble(XcsgeError, ValueError):
    pass


class EmptyGrid(XcsgeError, ValueError):
    pass


class DegenerateShape(XcsgeError, ValueError):
    pass


class UnsupportedAlpha(XcsgeError, ValueError):
    pass


class UnsupportedA(XcsgeError, ValueError):
    pass


class ZeroReference(XcsgeError, ZeroDivisionError):
    pass


class ZeroVariance(XcsgeError, ZeroDivisionError):
    pass


class EmptySet(EmptyDataset):
    pass


# numeric failures
class NumericError(XcsgeError, ArithmeticError):
    exit_code = 4


class NonFiniteInput(NumericError, ValueError):
    pass


class SingularSystem(NumericError):
    pass


class ZeroColumn(NumericError):
    pass
