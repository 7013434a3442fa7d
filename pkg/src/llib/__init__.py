"""llib: a bottom-up Datalog engine with aggregates in recursion, a library of
encapsulated recursive algorithms, a CLI and an HTTP playground service."""

from . import errors
from .analysis import DependencyGraph, Stratification, analyze, is_recursive
from .engine import (
    Database,
    EvalStats,
    Limits,
    compile_program,
    eval_aggregate,
    evaluate,
    evaluate_naive,
    query_relation,
    run_program,
)
from .errors import LlibError
from .library import (
    Catalog,
    FunctionSpec,
    LibraryFunction,
    ParamSpec,
    SlotSpec,
    catalog_reference,
    new_function,
    predict,
)
from .parser import Program, format_program, parse_program
from .relation import (
    ColumnType,
    Relation,
    Schema,
    Value,
    read_csv,
    rename_columns,
    write_csv,
)
from .session import Session, build_session, run_file

__version__ = "0.1.0"

__all__ = [
    "Catalog",
    "ColumnType",
    "Database",
    "DependencyGraph",
    "EvalStats",
    "FunctionSpec",
    "LibraryFunction",
    "Limits",
    "LlibError",
    "ParamSpec",
    "Program",
    "Relation",
    "Schema",
    "Session",
    "SlotSpec",
    "Stratification",
    "Value",
    "analyze",
    "build_session",
    "catalog_reference",
    "compile_program",
    "errors",
    "eval_aggregate",
    "evaluate",
    "evaluate_naive",
    "format_program",
    "is_recursive",
    "new_function",
    "parse_program",
    "predict",
    "query_relation",
    "read_csv",
    "rename_columns",
    "run_file",
    "run_program",
    "write_csv",
]
