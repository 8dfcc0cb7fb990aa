# src/errors.py


class BsnomaError(Exception):
    """Base class for every error raised by the solver package."""


class DomainError(BsnomaError, ValueError):
    """Input outside the domain of a rate expression or closed form."""


class DegenerateDenominatorError(DomainError):
    """A closed-form update divides by zero; the caller compares box endpoints instead."""


class BudgetExceededError(BsnomaError):
    def __init__(self, required: int, budget: int):
        super().__init__(
            f"brute-force grid needs {required} evaluations, budget is {budget}"
        )
        self.required = required
        self.budget = budget


class ConfigError(BsnomaError, ValueError):
    """Configuration text could not be parsed or failed validation."""


class TraceMissingError(BsnomaError):
    """Trace output was requested from a run that did not record one."""


class SinkError(BsnomaError, OSError):
    """Writing a result table or manifest failed."""
