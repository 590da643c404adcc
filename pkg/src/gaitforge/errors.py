"""Exception taxonomy and warnings shared across the pipeline."""


class GaitForgeError(Exception):
    """Base class for all gaitforge errors."""


# --- data ingestion -------------------------------------------------------

class DataError(GaitForgeError):
    """Problems with input files or the dataset model (CLI exit code 3)."""


class MissingRecording(DataError):
    pass


class MalformedRow(DataError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class UnitViolation(DataError):
    pass


# --- numerics / signal processing ----------------------------------------

class NumericalError(GaitForgeError):
    """Signal-processing or optimization failures (CLI exit code 4)."""


class CutoffAboveNyquist(NumericalError):
    pass


class NoStanceDetected(NumericalError):
    pass


class DegenerateStance(NumericalError):
    pass


class NoSignChange(NumericalError):
    pass


class LandmarkNotFound(NumericalError):
    pass


class SinglePlateOnly(NumericalError):
    pass


class DegenerateData(NumericalError):
    pass


class DimensionMismatch(NumericalError):
    pass


class SingularScatter(NumericalError):
    pass


class ClassTooSmall(NumericalError):
    pass


class NonConvergence(NumericalError):
    pass


class DivergingLoss(NumericalError):
    pass


class ConfigInvalid(GaitForgeError):
    pass


class QuotaInfeasible(GaitForgeError):
    pass


# --- warnings -------------------------------------------------------------

class MultipleStancesWarning(UserWarning):
    """More than one supra-threshold run found; longest run was used."""


class ConstantColumnWarning(UserWarning):
    """A constant feature column was dropped before PCA."""


class ZeroSpreadWarning(UserWarning):
    """A dimension had zero variance/range; passed through unnormalized."""
