"""Exception hierarchy for fusetree.

Every error raised on purpose by the library derives from ``FusetreeError`` and
carries a short machine-readable ``code``. The CLI turns these into a single
``error: <code>: <message>`` line and the matching exit status.
"""

from typing import Iterable, Optional


class FusetreeError(Exception):
    """Base class for all fusetree errors.

    Attributes:
        code (str): Machine-readable error identifier
        exit_code (int): Process exit status used by the CLI
    """

    code: str = "fusetree"
    exit_code: int = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def one_line(self) -> str:
        """Render the error as a single machine-parsable line."""
        text = " ".join(self.message.split())
        return f"error: {self.code}: {text}"


class ConfigError(FusetreeError):
    """Invalid command-line flags or run configuration."""

    code = "config"
    exit_code = 2


class SchemaError(FusetreeError):
    """Schema file is malformed or inconsistent with the data."""

    code = "schema"
    exit_code = 2


class IngestError(FusetreeError):
    """A data value cannot be ingested.

    Attributes:
        row (Optional[int]): 1-based data row (header excluded), if known
        column (Optional[str]): Column name, if known
    """

    code = "ingest"
    exit_code = 2

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        where = []
        if column is not None:
            where.append(f"column={column}")
        if row is not None:
            where.append(f"row={row}")
        full = f"{message} ({', '.join(where)})" if where else message
        super().__init__(full)
        self.row = row
        self.column = column


class DesignError(FusetreeError):
    """Design matrix request is invalid (duplicate split, column mismatch)."""

    code = "design"


class SingularDesignError(FusetreeError):
    """The working design is rank deficient.

    Attributes:
        columns (list): Names of the columns found to be linearly dependent
    """

    code = "singular_design"

    def __init__(self, columns: Iterable[str]):
        self.columns = list(columns)
        super().__init__(f"design is rank deficient in columns {', '.join(self.columns)}")


class NonNestedError(FusetreeError):
    """Likelihood-ratio test requested for fits that are not nested."""

    code = "non_nested"


class SmoothingError(FusetreeError):
    """A smooth term cannot be built for the supplied covariate."""

    code = "smoothing"


class InsufficientReplicatesError(FusetreeError):
    """Too few successful bootstrap replicates for an interval."""

    code = "bootstrap"
