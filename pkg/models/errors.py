"""
Error Hierarchy

Design Decisions:
1. Every failure the CLI can report derives from AnalysisError
2. Each family carries its own process exit code so the CLI never has to
   inspect messages to decide how to exit
3. Module-specific errors subclass a family (a bad CSV row is a DataError,
   a too-large model space is a SearchCapError)
"""

from typing import Optional


class AnalysisError(Exception):
    """Base class for all analysis failures"""
    exit_code: int = 1
    module: str = "analysis"

    def __str__(self) -> str:
        return f"[{self.module}] {super().__str__()}"


class ConfigError(AnalysisError):
    """Invalid settings, flags or generator configuration"""
    exit_code = 2
    module = "config"


class DataError(AnalysisError):
    """Input data that does not satisfy the dataset contract"""
    exit_code = 3
    module = "dataset"


class SearchCapError(AnalysisError):
    """A desk-scale computation was asked to exceed its configured cap"""
    exit_code = 4
    module = "model_space"


class TrialSchemaError(DataError):
    """Header / schema level problem (e.g. missing column)"""

    def __init__(self, message: str, column: Optional[str] = None):
        super().__init__(message)
        self.column = column


class TrialRowError(DataError):
    """A single record failed validation"""

    def __init__(self, row: int, column: str, value: object, reason: str):
        super().__init__(f"row {row}, column {column}: {reason} (got {value!r})")
        self.row = row
        self.column = column
        self.value = value


class SimulationConfigError(ConfigError):
    """Generator configuration is unusable"""
    module = "dataset"


class OracleCapError(SearchCapError):
    """Quadrature oracle asked to integrate groups above its size cap"""
    module = "likelihood"


class ExhaustiveCapError(SearchCapError):
    """Too many covariates for exhaustive enumeration"""


class SamplerError(AnalysisError):
    """The Metropolis-Hastings chain cannot be run"""
    module = "model_space"


class ReportError(AnalysisError):
    """A report failed schema validation or could not be written"""
    module = "cli"
