import io
import subprocess
import sys

import pytest

from llib.cli import main, repl
from llib.engine import Limits
from llib.errors import MissingRelationError
from llib.relation import ColumnType, Relation, Schema
from llib.session import build_session, format_table, run_file

INT = ColumnType.INTEGER

TC_TEXT = """database({ arc(From: integer, To: integer) }).
tc(From,To) <- arc(From,To).
tc(From,To) <- tc(From,Tmp), arc(Tmp,To).
query tc(From, To).
"""


@pytest.fixture
def tc_files(tmp_path):
    program = tmp_path / "tc.dl"
    program.write_text(TC_TEXT)
    data = tmp_path / "arc.csv"
    data.write_text("1,2\n2,3\n")
    return program, data


def test_build_session_defaults_and_independence():
    a = build_session("TC")
    b = build_session("other")
    assert a.app_name == "TC"
    assert a.limits.max_iterations == Limits().max_iterations
    assert a.limits.max_rows == Limits().max_rows
    a.load_relation("x", Relation.from_rows(Schema([("A", INT)]), [(1,)]))
    assert "x" not in b.catalog


def test_run_file_prints_table_and_stats(tc_files):
    program, data = tc_files
    out = io.StringIO()
    run_file(build_session("t"), program, {"arc": data}, stream=out)
    text = out.getvalue()
    assert "From" in text and "To" in text
    assert "1     2" in text.replace("  ", "  ")  # aligned columns
    assert "stats: iterations=" in text


def test_run_file_deterministic_output(tc_files):
    program, data = tc_files
    outputs = set()
    for _ in range(3):
        out = io.StringIO()
        run_file(build_session("t"), program, {"arc": data},
                 deterministic=True, stream=out)
        outputs.add(out.getvalue())
    assert len(outputs) == 1
    assert "elapsed=-" in outputs.pop()


def test_run_file_missing_binding(tc_files):
    program, _ = tc_files
    with pytest.raises(MissingRelationError):
        run_file(build_session("t"), program, {}, stream=io.StringIO())


def test_run_file_out_writes_csv_and_keeps_stdout_quiet(tc_files, tmp_path):
    program, data = tc_files
    out_path = tmp_path / "result.csv"
    stream = io.StringIO()
    run_file(build_session("t"), program, {"arc": data}, out=out_path,
             stream=stream)
    assert out_path.read_text().splitlines()[0] == "From,To"
    assert stream.getvalue().startswith("stats:")


def test_run_file_header_autodetection(tc_files, tmp_path):
    program, _ = tc_files
    headered = tmp_path / "arc2.csv"
    headered.write_text("From,To\n1,2\n2,3\n")
    out = io.StringIO()
    result = run_file(build_session("t"), program, {"arc": headered}, stream=out)
    assert len(result.result) == 3


def test_cli_run_and_exit_codes(tc_files, tmp_path, capsys):
    program, data = tc_files
    assert main(["run", str(program), "--bind", f"arc={data}"]) == 0
    captured = capsys.readouterr()
    assert "1     2" in captured.out or "1  2" in captured.out

    # missing binding -> usage/input error
    assert main(["run", str(program)]) == 2
    # unparseable program -> 2
    bad = tmp_path / "bad.dl"
    bad.write_text("p(X <-")
    assert main(["run", str(bad)]) == 2
    # evaluation limit -> 1
    runaway = tmp_path / "runaway.dl"
    runaway.write_text("""database({ s(X: integer) }).
inf(X) <- s(X).
inf(Y) <- inf(X), Y = X + 1.
query inf(X).
""")
    seed = tmp_path / "seed.csv"
    seed.write_text("0\n")
    assert main(["run", str(runaway), "--bind", f"s={seed}",
                 "--max-iters", "5"]) == 1


def test_cli_fmt_roundtrips(tmp_path, capsys):
    source = tmp_path / "p.dl"
    source.write_text("p(X,Y):-e(X,Y).  % comment\nquery p(А,B)." .replace("А", "A"))
    assert main(["fmt", str(source)]) == 0
    formatted = capsys.readouterr().out
    assert formatted == "p(X, Y) <- e(X, Y).\nquery p(A, B).\n"
    assert main(["fmt", str(tmp_path / "nope.dl")]) == 2


def test_format_table_alignment():
    rel = Relation.from_rows(Schema([("Name", ColumnType.TEXT), ("N", INT)]),
                             [("long-name", 1), ("x", 22)])
    text = format_table(rel)
    lines = text.splitlines()
    assert lines[0].startswith("Name")
    assert len(lines) == 4
    assert all(len(l) <= len(lines[0]) + 4 for l in lines)


def _run_repl(lines: str) -> str:
    out = io.StringIO()
    repl(build_session("repl-test"), stdin=io.StringIO(lines), stdout=out)
    return out.getvalue()


def test_repl_rules_then_query(tmp_path):
    data = tmp_path / "arc.csv"
    data.write_text("1,2\n2,3\n")
    script = f""".load arc {data} From:integer,To:integer
tc(From,To) <- arc(From,To).
tc(From,To) <- tc(From,Tmp), arc(Tmp,To).
query tc(From, To).
.quit
"""
    output = _run_repl(script)
    assert "loaded arc: 2 rows" in output
    assert "1     2" in output
    assert "stats:" in output


def test_repl_matches_batch_evaluation(tmp_path):
    """Incremental statements behave exactly like the concatenated program."""
    data = tmp_path / "arc.csv"
    data.write_text("1,2\n2,3\n3,4\n")
    statements = [
        "tc(From,To) <- arc(From,To).",
        "tc(From,To) <- tc(From,Tmp), arc(Tmp,To).",
    ]
    repl_out = _run_repl(
        f".load arc {data} From:integer,To:integer\n"
        + "\n".join(statements) + "\nquery tc(From, To).\n.quit\n")

    program = tmp_path / "batch.dl"
    program.write_text(
        "database({ arc(From: integer, To: integer) }).\n"
        + "\n".join(statements) + "\nquery tc(From, To).\n")
    batch_out = io.StringIO()
    run_file(build_session("batch"), program, {"arc": data}, stream=batch_out)

    table = lambda text: [l for l in text.splitlines()
                          if l and not l.startswith(("stats:", "loaded"))]
    assert table(repl_out) == table(batch_out.getvalue())


def test_repl_error_keeps_loop_alive():
    output = _run_repl("p(X <- q(X).\np(1).\nquery p(X).\n.quit\n")
    assert "error [SyntaxError]" in output
    assert "^" in output  # caret under the offending column
    assert "X" in output  # the later query still ran


def test_repl_funcs_stats_reset():
    output = _run_repl(".funcs\n.stats\n.reset\n.quit\n")
    for name in ("TC", "ConnectedComponents", "SSSP", "MLM", "LinRegBGD",
                 "LogRegBGD"):
        assert name in output
    assert "reset" in output


def test_repl_multiline_statement():
    output = _run_repl("p(1,\n2).\nquery p(X, Y).\n.quit\n")
    assert "1" in output and "2" in output


def test_cli_entry_point_installed():
    proc = subprocess.run([sys.executable, "-m", "llib.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode in (0, 2)
    assert "run" in proc.stdout and "repl" in proc.stdout


def test_repl_predicate_named_like_the_query_keyword():
    output = _run_repl(
        "query_helper(1).\nquerylike(2).\nquery query_helper(X).\n.quit\n")
    assert "error" not in output.lower()
    assert "1" in output
