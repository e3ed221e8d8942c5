"""Shared exception types.

Three failure families are kept distinct so callers (and the CLI) can map
them to stable exit codes: bad values, exhausted resource budgets, and
operations invoked on states where they are undefined.
"""


class DomainError(ValueError):
    """An argument is outside the documented domain of an operation."""


class PreconditionError(ValueError):
    """The operation is undefined in this state (e.g. a flag past the

    sampled depth, or a word with a dead prefix)."""


class CapacityError(RuntimeError):
    """A configurable resource budget was exhausted; nothing was truncated."""
