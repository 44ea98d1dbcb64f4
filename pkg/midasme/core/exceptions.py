"""
Exception hierarchy shared by the services and the CLI
"""
from typing import Optional


class MidasError(Exception):
    """Base class for every error raised by midasme"""


# ---- input / shape problems -------------------------------------------------

class DomainError(MidasError, ValueError):
    """Argument outside the mathematical domain of an operation"""


class DimensionError(MidasError, ValueError):
    """Arrays whose shapes do not agree"""


class InsufficientHistoryError(MidasError, ValueError):
    """Not enough observations to build the requested design or recursion"""


class NonStationaryError(DomainError):
    """Autoregressive coefficient on or outside the unit circle"""


class EmptySampleError(MidasError, ValueError):
    """A summary statistic was requested over no observations"""


# ---- numerical problems -----------------------------------------------------

class NumericalError(MidasError):
    """Linear algebra or optimization failure"""


class SingularDesignError(NumericalError):
    """X(theta)'X(theta) is numerically singular"""

    def __init__(self, condition_number: float, theta: Optional[float] = None):
        self.condition_number = condition_number
        self.theta = theta
        where = f" at theta={theta:.6g}" if theta is not None else ""
        super().__init__(
            f"singular design{where}: condition number {condition_number:.3e} exceeds 1e12"
        )


class CorrectionNotInvertibleError(NumericalError):
    """X(theta)'X(theta) - n*Sigma_c is singular or indefinite.

    Usually means the measurement error variances are too large for the sample.
    """

    def __init__(self, condition_number: float, min_eigenvalue: float,
                 theta: Optional[float] = None):
        self.condition_number = condition_number
        self.min_eigenvalue = min_eigenvalue
        self.theta = theta
        where = f" at theta={theta:.6g}" if theta is not None else ""
        super().__init__(
            f"corrected normal matrix not invertible{where}: "
            f"condition number {condition_number:.3e}, smallest eigenvalue {min_eigenvalue:.3e}"
        )


class OptimizationError(NumericalError):
    """Both golden-section evaluation points failed to evaluate"""


class CovarianceError(NumericalError):
    """D'QD is singular, so no asymptotic covariance exists"""


# ---- configuration ------------------------------------------------------------

class ConfigError(MidasError):
    """Run configuration could not be parsed or validated"""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        self.line = line
        self.field = field
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field is not None:
            prefix += f"field '{field}': "
        super().__init__(prefix + message)


# ---- CSV ingestion ------------------------------------------------------------

class IngestionError(MidasError):
    """Problem with a user supplied CSV file"""

    code = "ingestion"

    def __init__(self, message: str, path: Optional[str] = None, row: Optional[int] = None):
        self.path = path
        self.row = row
        location = ""
        if path is not None:
            location += f"{path}"
        if row is not None:
            location += f" row {row}"
        text = f"[{self.code}] {message}"
        if location:
            text = f"{text} ({location.strip()})"
        super().__init__(text)


class MissingValueError(IngestionError):
    code = "missing-value"


class RaggedSubperiodsError(IngestionError):
    code = "ragged-subperiods"


class PeriodMismatchError(IngestionError):
    code = "period-mismatch"


class MalformedCsvError(IngestionError):
    code = "malformed-csv"
