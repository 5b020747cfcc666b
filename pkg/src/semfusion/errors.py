"""Exception hierarchy.

Everything derives from :class:`SemfusionError` so the CLI can map any
library failure to exit code 1 with a single handler.
"""


class SemfusionError(Exception):
    pass


class DomainError(SemfusionError, ValueError):
    """A numeric argument lies outside its admissible range."""


class ParseError(SemfusionError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DataError(SemfusionError, ValueError):
    """Input is well-formed but semantically inconsistent (duplicate ids, ...)."""


class ContractError(SemfusionError, ValueError):
    pass


class SpecError(SemfusionError, ValueError):
    """Infeasible generator specification."""


class AlignmentError(SemfusionError, ValueError):
    pass


class DegenerateFeedbackError(AlignmentError):
    """A partial-media run has zero interpolated precision at the recall level."""


class EvaluationError(SemfusionError, ValueError):
    pass


class UndefinedQueryError(EvaluationError):
    """The query has no relevant judgment, so AP is undefined."""


class ConsistencyError(SemfusionError, ValueError):
    pass
