"""Exception hierarchy for rgg-lab.

Every library failure is a :class:`LabError`. Each subclass carries the process
exit code the CLI maps it to, so the command-line layer never has to inspect
messages to decide how to exit.

Exit codes:
    2: :class:`ValidationError` and subclasses (bad arguments, domains, masks, config).
    3: :class:`BudgetError` and subclasses (size caps, enumeration budgets).
    4: :class:`NumericError` (quadrature or root-finding failures).
"""

from __future__ import annotations

from collections.abc import Mapping


class LabError(Exception):
    """Base class for all rgg-lab errors."""

    exit_code: int = 1


class ValidationError(LabError):
    """An input failed validation."""

    exit_code = 2


class DomainError(ValidationError):
    """An argument lies outside the mathematical domain of an operation."""


class MaskViolationError(ValidationError):
    """A pattern copy uses a pair the mask does not observe."""


class ConfigError(ValidationError):
    """An experiment config failed validation.

    Attributes:
        field_path: Dotted path of the offending field, e.g. ``experiment.reps``.
    """

    def __init__(self, field_path: str, message: str) -> None:
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path


class BudgetError(LabError):
    """A computation would exceed a configured budget."""

    exit_code = 3


class SizeError(BudgetError):
    """A pattern, graph or matrix exceeds a configured size cap."""


class NumericError(LabError):
    """A numerical routine failed to converge.

    Attributes:
        diagnostics: Solver state at the point of failure (bracket, residual, ...).
    """

    exit_code = 4

    def __init__(self, message: str, *, diagnostics: Mapping[str, object] | None = None) -> None:
        super().__init__(message)
        self.diagnostics: dict[str, object] = dict(diagnostics or {})
