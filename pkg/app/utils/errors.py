from typing import List, Optional, Tuple


class TransferMdpError(Exception):
    """Base class for every error raised by the toolkit"""


class MdpValidationError(TransferMdpError, ValueError):
    """An MDP violates one of its construction invariants

    Args:
        message: Summary of the failure
        diagnostics: Optional list of (line, message) pairs from the file loader
    """

    def __init__(self, message: str, diagnostics: Optional[List[Tuple[Optional[int], str]]] = None):
        self.diagnostics = list(diagnostics or [])
        if self.diagnostics:
            details = "; ".join(
                f"line {line}: {msg}" if line is not None else msg
                for line, msg in self.diagnostics
            )
            message = f"{message}: {details}"
        super().__init__(message)


class PlanningError(TransferMdpError, ArithmeticError):
    """Planning produced non-finite values or failed to converge"""


class IncompatibleModelsError(TransferMdpError, ValueError):
    """Two models do not share states, per-state actions and discount"""


class InvalidActionError(TransferMdpError, ValueError):
    """A sample was requested for an action that is unavailable at its state"""


class SampleBudgetError(TransferMdpError, ValueError):
    """A learner was given a zero budget or an empty action set"""


class ParameterDomainError(TransferMdpError, ValueError):
    """Hard-case parameters fall outside the construction's domain

    Args:
        constraint: The violated constraint, e.g. "eps < eps0"
        detail: Values that violated it
    """

    def __init__(self, constraint: str, detail: str = ""):
        self.constraint = constraint
        message = f"parameter constraint violated: {constraint}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class AssumptionViolationError(TransferMdpError, ValueError):
    """The base models of a convex hull do not stack to full column rank"""


class InternalInvariantError(TransferMdpError, AssertionError):
    """A guaranteed post-condition was observed to fail"""


class ExperimentConfigError(TransferMdpError, ValueError):
    """An experiment config is invalid

    Args:
        field: Name of the offending field
        message: What is wrong with it
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"invalid experiment config field '{field}': {message}")
