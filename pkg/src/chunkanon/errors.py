"""Exception hierarchy shared across the package."""

from __future__ import annotations


class AnonymisationError(Exception):
    """Base class. ``phase`` is filled in by the pipeline when known."""

    phase: int | None = None


class SchemaError(AnonymisationError):
    pass


class ValueNotInDomain(AnonymisationError):
    pass


class LevelOutOfRange(AnonymisationError):
    pass


class IngestError(AnonymisationError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.row = row
        self.column = column


class EmptyDomain(AnonymisationError):
    pass


class TooManyUniques(AnonymisationError):
    pass


class CodebookMiss(AnonymisationError):
    pass


class BudgetExceeded(AnonymisationError):
    pass


class NonComparableNodes(AnonymisationError):
    pass


class NoFeasibleNode(AnonymisationError):
    pass


class EmptyDataset(AnonymisationError):
    pass


class PredicateError(AnonymisationError):
    def __init__(self, node: tuple[int, ...], cause: BaseException):
        super().__init__(f"predicate failed at node {node}: {cause}")
        self.node = node
        self.cause = cause
