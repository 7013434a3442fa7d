"""Typed in-memory relations with set semantics, plus CSV load/store.

A Relation is an immutable pair of a Schema and a deduplicated set of row
tuples. Values are plain Python ``int`` / ``float`` / ``str``; the column type
decides which one is legal in a column. Two rules keep set semantics and
sorting well defined for doubles: NaN is rejected everywhere, and -0.0 is
normalized to +0.0 on the way in.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence, Union

from .errors import (
    CsvParseError,
    DuplicateColumnError,
    SchemaMismatchError,
    UnknownColumnError,
)

Value = Union[int, float, str]


class ColumnType(Enum):
    INTEGER = "integer"
    DOUBLE = "double"
    TEXT = "string"

    @classmethod
    def from_name(cls, name: str) -> "ColumnType":
        for member in cls:
            if member.value == name:
                return member
        raise SchemaMismatchError(f"unknown column type {name!r}")

    def __repr__(self) -> str:  # keeps schema reprs short
        return f"ColumnType.{self.name}"


@dataclass(frozen=True)
class Schema:
    """Ordered, uniquely named, typed columns."""

    columns: tuple[tuple[str, ColumnType], ...]

    def __init__(self, columns: Iterable[tuple[str, ColumnType]]):
        cols = tuple((name, ctype) for name, ctype in columns)
        if not cols:
            raise SchemaMismatchError("schema must have at least one column")
        names = [name for name, _ in cols]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            raise DuplicateColumnError(f"duplicate column name {dup!r}")
        object.__setattr__(self, "columns", cols)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.columns)

    @property
    def types(self) -> tuple[ColumnType, ...]:
        return tuple(ctype for _, ctype in self.columns)

    def index(self, name: str) -> int:
        for i, (col, _) in enumerate(self.columns):
            if col == name:
                return i
        raise UnknownColumnError(f"no column named {name!r}")

    def __len__(self) -> int:
        return len(self.columns)


def normalize_value(value: Value, ctype: ColumnType, *, context: str = "value") -> Value:
    """Validate ``value`` against ``ctype``; widen int->float for double columns."""
    if ctype is ColumnType.INTEGER:
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaMismatchError(f"{context}: expected integer, got {value!r}")
        return value
    if ctype is ColumnType.DOUBLE:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaMismatchError(f"{context}: expected double, got {value!r}")
        value = float(value)
        if math.isnan(value):
            raise SchemaMismatchError(f"{context}: NaN is not a legal double value")
        return 0.0 if value == 0.0 else value  # normalize -0.0
    if not isinstance(value, str):
        raise SchemaMismatchError(f"{context}: expected string, got {value!r}")
    if "\x00" in value:
        raise SchemaMismatchError(f"{context}: NUL byte in string value")
    try:
        value.encode("utf-8")
    except UnicodeEncodeError:
        raise SchemaMismatchError(
            f"{context}: string is not UTF-8 encodable") from None
    return value


@dataclass(frozen=True)
class Relation:
    """An immutable schema + set of rows. Rows are deduplicated tuples."""

    schema: Schema
    rows: frozenset = field(default_factory=frozenset)

    @classmethod
    def from_rows(cls, schema: Schema, rows: Iterable[Sequence[Value]]) -> "Relation":
        types = schema.types
        width = len(types)
        out = set()
        for row in rows:
            row = tuple(row)
            if len(row) != width:
                raise SchemaMismatchError(
                    f"row {row!r} has {len(row)} values, schema has {width} columns")
            out.add(tuple(
                normalize_value(v, t, context=f"column {schema.names[i]!r}")
                for i, (v, t) in enumerate(zip(row, types))))
        return cls(schema, frozenset(out))

    @property
    def arity(self) -> int:
        return len(self.schema)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[tuple]:
        return iter(self.rows)

    def sorted_rows(self) -> list[tuple]:
        """Rows in the deterministic output order (lexicographic by column)."""
        return sorted(self.rows)


def rename_columns(rel: Relation, mapping: Sequence[tuple[str, str]]) -> Relation:
    """Rename columns per (old, new) pairs; order and rows are untouched."""
    renames = {}
    for old, new in mapping:
        rel.schema.index(old)  # raises UnknownColumnError
        if old in renames:
            raise DuplicateColumnError(f"column {old!r} renamed twice")
        renames[old] = new
    new_cols = tuple(
        (renames.get(name, name), ctype) for name, ctype in rel.schema.columns)
    names = [n for n, _ in new_cols]
    if len(set(names)) != len(names):
        dup = next(n for n in names if names.count(n) > 1)
        raise DuplicateColumnError(f"renaming produces duplicate column {dup!r}")
    return Relation(Schema(new_cols), rel.rows)


def select_columns(rel: Relation, names: Sequence[str]) -> Relation:
    """Project onto the named columns, in the given order (rows dedup again)."""
    idx = [rel.schema.index(n) for n in names]
    schema = Schema(rel.schema.columns[i] for i in idx)
    return Relation(schema, frozenset(tuple(row[i] for i in idx) for row in rel.rows))


def coerce_relation(rel: Relation, schema: Schema) -> Relation:
    """Re-check ``rel`` against ``schema`` by position, widening int -> double.

    Column names come from ``schema``; any other type change is an error.
    """
    if rel.arity != len(schema):
        raise SchemaMismatchError(
            f"expected {len(schema)} columns, got {rel.arity}")
    for (name, want), (_, have) in zip(schema.columns, rel.schema.columns):
        if want is have:
            continue
        if want is ColumnType.DOUBLE and have is ColumnType.INTEGER:
            continue
        raise SchemaMismatchError(
            f"column {name!r}: expected {want.value}, got {have.value}")
    return Relation.from_rows(schema, rel.rows)


def _parse_field(text: str, ctype: ColumnType, line: int) -> Value:
    if ctype is ColumnType.TEXT:
        return text
    if text == "":
        raise CsvParseError(f"line {line}: empty field (nulls are rejected)", line=line)
    try:
        if ctype is ColumnType.INTEGER:
            return int(text)
        value = float(text)
    except ValueError:
        raise CsvParseError(
            f"line {line}: cannot parse {text!r} as {ctype.value}", line=line) from None
    if math.isnan(value):
        raise CsvParseError(f"line {line}: NaN is not accepted", line=line)
    return 0.0 if value == 0.0 else value


def read_csv(path: str | Path, schema: Schema, has_header: bool = False) -> Relation:
    """Load a CSV file against ``schema``; duplicates collapse, nulls reject."""
    types = schema.types
    width = len(types)
    rows = set()
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        for record in reader:
            line = reader.line_num
            if has_header and line == 1:
                continue
            if not record:
                continue  # blank line
            if len(record) != width:
                raise CsvParseError(
                    f"line {line}: expected {width} fields, got {len(record)}",
                    line=line)
            rows.add(tuple(
                _parse_field(f, t, line) for f, t in zip(record, types)))
    return Relation(schema, frozenset(rows))


def format_value(value: Value) -> str:
    """Render a value the way CSV output and tables show it (round-trip exact)."""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(rel: Relation, path: str | Path) -> None:
    """Write header + rows in deterministic (lexicographic) order."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(rel.schema.names)
        for row in rel.sorted_rows():
            writer.writerow([format_value(v) for v in row])
