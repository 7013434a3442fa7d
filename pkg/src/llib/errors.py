"""Exception hierarchy shared by the relation store, parser, engine and library.

Every error carries a ``kind`` string (stable across releases, used by the
HTTP service) and, where it makes sense, a source position.
"""
from __future__ import annotations


class LlibError(Exception):
    """Base class for all errors raised by this package."""

    kind = "Error"

    def __init__(self, message: str, *, line: int | None = None, column: int | None = None):
        super().__init__(message)
        self.line = line
        self.column = column


# --- relations / CSV ---------------------------------------------------------

class CsvParseError(LlibError):
    kind = "ParseError"


class UnknownColumnError(LlibError):
    kind = "UnknownColumn"


class DuplicateColumnError(LlibError):
    kind = "DuplicateColumn"


class SchemaMismatchError(LlibError):
    kind = "SchemaMismatch"


# --- parsing -----------------------------------------------------------------

class DatalogSyntaxError(LlibError):
    kind = "SyntaxError"

    def __init__(self, message: str, *, line: int | None = None,
                 column: int | None = None, expected: tuple[str, ...] = ()):
        super().__init__(message, line=line, column=column)
        self.expected = frozenset(expected)


class ArityError(LlibError):
    kind = "ArityError"


class SafetyError(LlibError):
    kind = "SafetyError"

    def __init__(self, message: str, *, variable: str | None = None,
                 line: int | None = None, column: int | None = None):
        super().__init__(message, line=line, column=column)
        self.variable = variable


class DeclConflictError(LlibError):
    kind = "DeclConflict"


# --- analysis ----------------------------------------------------------------

class UndefinedPredicateError(LlibError):
    kind = "UndefinedPredicate"


class UnknownPredicateError(LlibError):
    kind = "UnknownPredicate"


class UnstratifiableAggregateError(LlibError):
    kind = "UnstratifiableAggregate"


# --- compilation / evaluation ------------------------------------------------

class TypeMismatchError(LlibError):
    kind = "TypeMismatch"


class EvalError(LlibError):
    kind = "EvalError"


class InternalError(LlibError):
    kind = "InternalError"


class LimitExceededError(LlibError):
    kind = "LimitExceeded"

    def __init__(self, message: str, *, limit: str):
        super().__init__(message)
        self.limit = limit


class EvalTimeoutError(LlibError):
    kind = "Timeout"


class MissingRelationError(LlibError):
    kind = "MissingRelation"


# --- library functions -------------------------------------------------------

class UnknownFunctionError(LlibError):
    kind = "UnknownFunction"


class UnknownAttributeError(LlibError):
    kind = "UnknownAttribute"


class IncompleteMappingError(LlibError):
    kind = "IncompleteMapping"


class UnknownParamError(LlibError):
    kind = "UnknownParam"


class ParamError(LlibError):
    kind = "ParamError"


class CycleError(LlibError):
    kind = "CycleError"


class NameCollisionError(LlibError):
    kind = "NameCollision"
