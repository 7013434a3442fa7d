"""Command-line interface: batch runs, an interactive REPL, the HTTP service
and a formatter.

    llib run <file> --bind name=path ... [--out path] [--max-iters N] [--deterministic]
    llib repl
    llib serve [--port P] [--host H] [--ui-dir DIR] [--cors]
    llib fmt <file>

Exit codes: 0 ok, 1 evaluation error (limits, runtime arithmetic, timeouts),
2 usage or input error (bad syntax, missing bindings, unreadable files).
"""
from __future__ import annotations

import argparse
import os
import re
import sys
from pathlib import Path
from typing import Optional, TextIO

from .engine import EvalError, Limits
from .errors import (
    DatalogSyntaxError,
    EvalTimeoutError,
    LimitExceededError,
    LlibError,
)
from .parser import format_program, parse_program
from .relation import read_csv
from .session import (
    Session,
    build_session,
    format_stats,
    format_table,
    run_file,
    sniff_header,
)

_EVAL_ERRORS = (LimitExceededError, EvalError, EvalTimeoutError)


def _error_message(exc: LlibError) -> str:
    where = ""
    if exc.line is not None:
        where = f" (line {exc.line}, column {exc.column})" \
            if exc.column is not None else f" (line {exc.line})"
    return f"error [{exc.kind}]{where}: {exc}"


def _parse_bindings(pairs: list[str]) -> dict[str, str]:
    bindings = {}
    for pair in pairs:
        name, sep, path = pair.partition("=")
        if not sep or not name or not path:
            raise LlibError(f"--bind expects name=path, got {pair!r}")
        bindings[name] = path
    return bindings


def cmd_run(args: argparse.Namespace) -> int:
    limits = Limits()
    if args.max_iters is not None:
        limits.max_iterations = args.max_iters
    if args.max_rows is not None:
        limits.max_rows = args.max_rows
    session = build_session("llib", limits)
    run_file(session, args.file, _parse_bindings(args.bind), out=args.out,
             deterministic=args.deterministic)
    return 0


def cmd_fmt(args: argparse.Namespace) -> int:
    text = Path(args.file).read_text(encoding="utf-8")
    sys.stdout.write(format_program(parse_program(text)))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service.app import ServiceConfig, create_app

    ui_dir = args.ui_dir
    if ui_dir is None and Path("frontend/index.html").exists():
        ui_dir = "frontend"
    config = ServiceConfig.from_env(ui_dir=ui_dir, cors=args.cors)
    port = args.port if args.port is not None else int(os.environ.get("LLIB_PORT", "8000"))
    uvicorn.run(create_app(config), host=args.host, port=port)
    return 0


# --- REPL ---------------------------------------------------------------------

_REPL_HELP = """statements: facts, rules and `query p(X, ...).` run against what
you entered so far. Meta commands:
  .load <name> <path> <Cols>   load a CSV (Cols like From:integer,To:integer)
  .funcs                       list library functions
  .stats                       show execution statistics
  .reset                       drop rules, loaded relations and stats
  .help                        this text
  .quit                        leave"""


class _ReplState:
    def __init__(self, session: Session):
        self.session = session
        self.decls: dict[str, str] = {}  # name -> reldecl text
        self.statements: list[str] = []

    def program_text(self, extra: str = "") -> str:
        parts = []
        if self.decls:
            parts.append("database({ " + ", ".join(self.decls.values()) + " }).")
        parts.extend(self.statements)
        if extra:
            parts.append(extra)
        return "\n".join(parts) + "\n"


def _repl_load(state: _ReplState, argv: list[str], out: TextIO) -> None:
    if len(argv) != 3:
        print("usage: .load <name> <path> <Col:type,...>", file=out)
        return
    name, path, cols = argv
    reldecl = cols if "(" in cols else f"{name}({cols})"
    probe = parse_program(f"database({{ {reldecl} }}).")
    decl_name, schema = probe.declarations[0]
    if decl_name != name:
        print(f"error: schema names {decl_name!r}, expected {name!r}", file=out)
        return
    rel = read_csv(path, schema, has_header=sniff_header(path, schema))
    state.decls[name] = reldecl
    state.session.load_relation(name, rel)
    print(f"loaded {name}: {len(rel)} rows", file=out)


_QUERY_STMT = re.compile(r"query\s+[a-z]")


def _repl_statement(state: _ReplState, statement: str, out: TextIO) -> None:
    if not _QUERY_STMT.match(statement.strip()):
        parse_program(state.program_text(statement))  # validate before keeping
        state.statements.append(statement)
        return
    result = state.session.run_text(state.program_text(statement), label="repl")
    print(format_table(result.result), file=out)
    print(format_stats(result.stats), file=out)


def repl(session: Session, stdin: TextIO = sys.stdin,
         stdout: TextIO = sys.stdout) -> None:
    """Line-oriented loop; statement errors are reported and the loop continues."""
    state = _ReplState(session)
    interactive = hasattr(stdin, "isatty") and stdin.isatty()
    if interactive:
        print(f"llib session {session.app_name!r} — .help for commands",
              file=stdout)
    buffer: list[str] = []
    while True:
        if interactive:
            stdout.write("llib> " if not buffer else "...> ")
            stdout.flush()
        line = stdin.readline()
        if not line:
            break
        stripped = line.strip()
        if not buffer and stripped.startswith("."):
            cmd, *argv = stripped.split()
            try:
                if cmd == ".quit":
                    break
                elif cmd == ".help":
                    print(_REPL_HELP, file=stdout)
                elif cmd == ".funcs":
                    for name in state.session.functions.names():
                        spec = state.session.functions.get(name)
                        slots = "; ".join(
                            f"{s.name}({', '.join(s.attr_names)})" for s in spec.slots)
                        params = ", ".join(p.name for p in spec.params) or "-"
                        print(f"{name}: inputs {slots} | params {params}",
                              file=stdout)
                elif cmd == ".stats":
                    for label, stats in state.session.stats_log:
                        print(f"{label}: {format_stats(stats)}", file=stdout)
                elif cmd == ".reset":
                    state.decls.clear()
                    state.statements.clear()
                    state.session.catalog.clear()
                    state.session.stats_log.clear()
                    print("reset", file=stdout)
                elif cmd == ".load":
                    _repl_load(state, argv, stdout)
                else:
                    print(f"unknown command {cmd!r} (.help)", file=stdout)
            except (LlibError, OSError) as exc:
                print(_format_repl_error(exc), file=stdout)
            continue
        if not stripped:
            continue
        buffer.append(line.rstrip("\n"))
        if not stripped.endswith("."):
            continue
        statement = "\n".join(buffer)
        buffer = []
        try:
            _repl_statement(state, statement, stdout)
        except (LlibError, OSError) as exc:
            print(_format_repl_error(exc), file=stdout)


def _format_repl_error(exc: Exception) -> str:
    if isinstance(exc, DatalogSyntaxError) and exc.column is not None:
        return _error_message(exc) + "\n" + " " * (exc.column - 1) + "^"
    if isinstance(exc, LlibError):
        return _error_message(exc)
    return f"error: {exc}"


def cmd_repl(args: argparse.Namespace) -> int:
    repl(build_session("llib"))
    return 0


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="llib",
        description="Datalog engine with encapsulated recursive algorithms")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="evaluate a program file")
    p_run.add_argument("file")
    p_run.add_argument("--bind", action="append", default=[],
                       metavar="NAME=PATH",
                       help="bind a declared relation to a CSV file")
    p_run.add_argument("--out", default=None, help="write the result as CSV")
    p_run.add_argument("--max-iters", type=int, default=None)
    p_run.add_argument("--max-rows", type=int, default=None)
    p_run.add_argument("--deterministic", action="store_true",
                       help="redact elapsed time from the stats line")
    p_run.set_defaults(fn=cmd_run)

    p_repl = sub.add_parser("repl", help="interactive session")
    p_repl.set_defaults(fn=cmd_repl)

    p_serve = sub.add_parser("serve", help="start the HTTP playground service")
    p_serve.add_argument("--port", type=int, default=None)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--ui-dir", default=None,
                         help="directory with the playground UI bundle")
    p_serve.add_argument("--cors", action="store_true",
                         help="allow cross-origin requests (local dev)")
    p_serve.set_defaults(fn=cmd_serve)

    p_fmt = sub.add_parser("fmt", help="parse and pretty-print a program")
    p_fmt.add_argument("file")
    p_fmt.set_defaults(fn=cmd_fmt)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_arg_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except _EVAL_ERRORS as exc:
        print(_error_message(exc), file=sys.stderr)
        return 1
    except LlibError as exc:
        print(_error_message(exc), file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error [IoError]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
