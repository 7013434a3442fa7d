"""Working sessions: a named-relation catalog, a function catalog, limits and
an append-only execution-statistics log.

Sessions are the working-environment object shared by the CLI, the REPL and
library-function execution. ``run_file`` is the batch entry point: it binds
CSV files to the program's declared relations, evaluates, and prints or
persists the query relation.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, TextIO

from .engine import EvalStats, Limits, RunResult, run_program
from .errors import LlibError, MissingRelationError
from .library import Catalog, FunctionSpec, LibraryFunction, ParamSpec
from .parser import parse_program
from .relation import Relation, Schema, format_value, read_csv, write_csv


@dataclass
class Session:
    app_name: str
    limits: Limits = field(default_factory=Limits)
    catalog: dict[str, Relation] = field(default_factory=dict)
    functions: Catalog = field(default_factory=Catalog)
    stats_log: list[tuple[str, EvalStats]] = field(default_factory=list)

    def record_stats(self, label: str, stats: EvalStats) -> None:
        self.stats_log.append((label, stats))

    def load_relation(self, name: str, rel: Relation) -> None:
        self.catalog[name] = rel

    def new_function(self, name: str) -> LibraryFunction:
        return self.functions.new(name)

    def register_function(self, name: str, template: str, input_slots,
                          params: Sequence[ParamSpec] = (),
                          doc: str = "") -> FunctionSpec:
        return self.functions.register(name, template, input_slots, params, doc)

    def run_text(self, text: str, bindings: Optional[dict[str, Relation]] = None,
                 label: str = "program", *, naive: bool = False) -> RunResult:
        db = dict(self.catalog)
        if bindings:
            db.update(bindings)
        result = run_program(text, db, self.limits, naive=naive)
        self.record_stats(label, result.stats)
        return result


def build_session(app_name: str, limits: Optional[Limits] = None) -> Session:
    """A fresh session with an empty relation catalog and default limits."""
    return Session(app_name, limits or Limits())


def sniff_header(path: str | Path, schema: Schema) -> bool:
    """True when the file's first record is exactly the schema's column names."""
    import csv as _csv
    with open(path, "r", encoding="utf-8", newline="") as fh:
        try:
            first = next(_csv.reader(fh))
        except StopIteration:
            return False
    return tuple(first) == schema.names


def format_table(rel: Relation) -> str:
    """Column-aligned text table with a header, rows in deterministic order."""
    header = list(rel.schema.names)
    body = [[format_value(v) for v in row] for row in rel.sorted_rows()]
    widths = [len(h) for h in header]
    for row in body:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    def fmt(cells: list[str]) -> str:
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    lines = [fmt(header), fmt(["-" * w for w in widths])]
    lines.extend(fmt(row) for row in body)
    return "\n".join(lines)


def format_stats(stats: EvalStats, *, deterministic: bool = False) -> str:
    elapsed = "-" if deterministic else f"{stats.elapsed_s * 1000:.1f}ms"
    rows = sum(stats.rows_produced.values())
    return (f"stats: iterations={stats.total_iterations} rows={rows} "
            f"elapsed={elapsed}")


def run_file(session: Session, program_path: str | Path,
             bindings: dict[str, str | Path],
             out: Optional[str | Path] = None, *,
             deterministic: bool = False,
             stream: Optional[TextIO] = None) -> RunResult:
    """Evaluate a program file with CSV-backed relations.

    Every declared relation must be bound to a CSV path (a header row is
    skipped when it matches the declared column names exactly). The query
    relation is printed as a table, or written to ``out`` as CSV with only
    the stats line going to ``stream``.
    """
    stream = stream if stream is not None else sys.stdout
    text = Path(program_path).read_text(encoding="utf-8")
    program = parse_program(text)
    db: dict[str, Relation] = {}
    for name, schema in program.declarations:
        if name not in bindings:
            raise MissingRelationError(
                f"declared relation {name!r} has no --bind {name}=<csv>")
        path = bindings[name]
        db[name] = read_csv(path, schema, has_header=sniff_header(path, schema))
    unknown = set(bindings) - {name for name, _ in program.declarations}
    if unknown:
        raise MissingRelationError(
            f"bindings for undeclared relation(s): {', '.join(sorted(unknown))}")
    if program.query is None:
        raise LlibError("program has no query directive")
    result = session.run_text(text, db, label=str(program_path))
    if out is not None:
        write_csv(result.result, out)
    else:
        print(format_table(result.result), file=stream)
    print(format_stats(result.stats, deterministic=deterministic), file=stream)
    return result
