"""Exception types shared across the package."""


class InputError(ValueError):
    """Bad input data (file contents, schema, or value ranges)."""


class ParseError(InputError):
    """A malformed row in a tabular input; carries the 1-based line number."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class ValidationError(InputError):
    """Structurally parseable input that violates an invariant."""


class DegenerateCovariateError(ValueError):
    """A covariate column with zero variance cannot be standardized."""


class UndefinedInputError(ValueError):
    """An operation was asked about an entity with no supporting data."""


class DesignError(ValueError):
    """The fixed-effects design matrix is unusable (rank deficient, wrong shape)."""


class NumericError(RuntimeError):
    """A non-finite intermediate value; carries the offending cluster id."""

    def __init__(self, message, cluster_id=None):
        if cluster_id is not None:
            message = f"cluster {cluster_id!r}: {message}"
        super().__init__(message)
        self.cluster_id = cluster_id


class FitNonConvergenceError(RuntimeError):
    """Optimizer hit its iteration budget; ``.best`` holds the best iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DegenerateTestError(ValueError):
    """A test statistic whose denominator is zero."""


class NotFoundError(LookupError):
    """A requested stored document does not exist."""


class ConflictError(RuntimeError):
    """An attempt to overwrite an existing stored edition."""
