"""Shared exception types."""


class DomainError(ValueError):
    """An argument is outside the mathematical domain of an operation."""


class EvaluationError(RuntimeError):
    """A numerical evaluation produced a non-finite or undefined value."""


class ConstructionError(RuntimeError):
    """A geometric construction could not be completed (e.g. certification failed)."""


class KernelError(RuntimeError):
    """A smoothing kernel could not be sampled adequately."""


class SearchError(RuntimeError):
    """A counterexample search exhausted its sweep without a conclusive hit.

    Carries the sweep diagnostics so a caller can report what was tried.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics if diagnostics is not None else []
