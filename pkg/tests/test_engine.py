import random
import threading
import time

import pytest

from llib.engine import (
    Limits,
    compile_program,
    eval_aggregate,
    evaluate,
    evaluate_naive,
    run_program,
)
from llib.errors import (
    EvalError,
    EvalTimeoutError,
    LimitExceededError,
    MissingRelationError,
    TypeMismatchError,
)
from llib.parser import parse_program
from llib.relation import ColumnType, Relation, Schema
from oracles import dijkstra, warshall_closure

INT = ColumnType.INTEGER
DBL = ColumnType.DOUBLE
TXT = ColumnType.TEXT

TC = """database({ arc(From: integer, To: integer) }).
tc(From,To) <- arc(From,To).
tc(From,To) <- tc(From,Tmp), arc(Tmp,To).
query tc(From, To)."""


def arcs(pairs):
    return Relation.from_rows(Schema([("From", INT), ("To", INT)]), pairs)


def test_tc_on_three_cycle_matches_closure_oracle():
    rows = {(1, 2), (2, 3), (3, 1)}
    r = run_program(TC, {"arc": arcs(rows)})
    assert r.result.rows == warshall_closure({1, 2, 3}, rows)
    assert len(r.result) == 9


def test_tc_on_empty_input_is_single_iteration():
    r = run_program(TC, {"arc": arcs([])})
    assert len(r.result) == 0
    assert r.stats.strata[-1].iterations == 1


def test_chain_iterations_and_delta_sizes():
    chain = [(i, i + 1) for i in range(1, 6)]
    r = run_program(TC, {"arc": arcs(chain)})
    st = r.stats.strata[-1]
    assert len(r.result) == 15
    assert st.iterations == 5
    assert st.delta_history == [5, 4, 3, 2, 1]


def test_naive_equals_seminaive_and_costs_more_on_chains():
    chain = [(i, i + 1) for i in range(1, 6)]
    fast = run_program(TC, {"arc": arcs(chain)})
    slow = run_program(TC, {"arc": arcs(chain)}, naive=True)
    assert fast.database["tc"] == slow.database["tc"]
    semi = fast.stats.strata[-1].evaluated_history
    naive = slow.stats.strata[-1].evaluated_history
    assert all(s <= n for s, n in zip(semi, naive))
    assert sum(naive) > sum(semi)


def test_compiled_plan_shape_for_tc():
    compiled = compile_program(parse_program(TC))
    assert len(compiled.strata) == 1  # the declared stratum is implicit
    rec = compiled.strata[0].node
    assert rec.preds == ("tc",)
    assert len(rec.exit_rules) == 1 and len(rec.rec_rules) == 1
    assert rec.rec_rules[0].scc_scans[0][1] == "tc"


def test_fact_only_program():
    r = run_program("p(1). p(2). query p(X).", {})
    assert r.result.rows == {(1,), (2,)}


def test_eval_aggregate_examples():
    rows = {(0, 1, 1, 2.0), (0, 1, 2, 2.0)}
    cols = ("J", "C", "Id", "G0")
    assert eval_aggregate(cols, rows, ("J", "C"), "sum", ("Id",), "G0") == \
        {(0, 1, 4.0)}
    assert eval_aggregate(("J", "C", "G0"), {(0, 1, 2.0)}, ("J", "C"), "sum",
                          (), "G0") == {(0, 1, 2.0)}
    assert eval_aggregate(("A", "V"), {(1, 3), (1, 5)}, ("A",), "min", (),
                          "V") == {(1, 3)}
    assert eval_aggregate(("A", "V"), {(1, 3), (1, 5), (2, 9)}, ("A",),
                          "count", (), "V") == {(1, 2), (2, 1)}
    assert eval_aggregate(("A", "V"), {(1, 3), (1, 5)}, ("A",), "avg", (),
                          "V") == {(1, 4.0)}
    with pytest.raises(TypeMismatchError):
        eval_aggregate(("A", "V"), {(1, "x")}, ("A",), "sum", (), "V")


def test_aggregate_group_without_rows_is_empty():
    text = """database({ e(A: integer, B: integer) }).
    s(count<B>) <- e(_, B).
    query s(N)."""
    r = run_program(text, {"e": Relation.from_rows(
        Schema([("A", INT), ("B", INT)]), [])})
    assert r.result.rows == set()


def test_schema_inference_promotes_to_double_and_propagates_text():
    text = """database({ e(A: integer, W: double), t(S: string) }).
    p(X, Y) <- e(X, W), Y = X + 1.
    q(X, Z) <- e(X, W), Z = W * 2.
    r(S) <- t(S).
    query q(X, Z)."""
    compiled = compile_program(parse_program(text))
    assert compiled.schemas["p"].types == (INT, INT)
    assert compiled.schemas["q"].types == (INT, DBL)
    assert compiled.schemas["r"].types == (TXT,)


def test_arithmetic_on_text_is_a_compile_error():
    text = """database({ t(S: string) }).
    p(S, X) <- t(S), X = S + 1.
    query p(S, X)."""
    with pytest.raises(TypeMismatchError):
        compile_program(parse_program(text))


def test_text_numeric_comparison_rejected():
    text = """database({ t(S: string) }).
    p(S) <- t(S), S < 3.
    query p(S)."""
    with pytest.raises(TypeMismatchError):
        compile_program(parse_program(text))


def test_integer_division_truncates_toward_zero():
    text = """database({ n(A: integer, B: integer) }).
    d(A, B, Q) <- n(A, B), Q = A / B.
    query d(A, B, Q)."""
    rel = Relation.from_rows(Schema([("A", INT), ("B", INT)]),
                             [(7, 2), (-7, 2), (7, -2)])
    r = run_program(text, {"n": rel})
    assert r.result.rows == {(7, 2, 3), (-7, 2, -3), (7, -2, -3)}


def test_division_by_zero_raises():
    text = """database({ n(A: integer) }).
    d(A, Q) <- n(A), Q = A / 0.
    query d(A, Q)."""
    with pytest.raises(EvalError):
        run_program(text, {"n": Relation.from_rows(Schema([("A", INT)]), [(1,)])})


def test_missing_relation():
    with pytest.raises(MissingRelationError):
        run_program(TC, {})


def test_limit_exceeded_on_runaway_recursion():
    runaway = """database({ s(X: integer) }).
    inf(X) <- s(X).
    inf(Y) <- inf(X), Y = X + 1.
    query inf(X)."""
    s = Relation.from_rows(Schema([("X", INT)]), [(0,)])
    with pytest.raises(LimitExceededError) as err:
        run_program(runaway, {"s": s}, Limits(max_iterations=10))
    assert err.value.limit == "max_iterations"
    with pytest.raises(LimitExceededError) as err:
        run_program(runaway, {"s": s}, Limits(max_rows=50))
    assert err.value.limit == "max_rows"


def test_engine_never_hangs_past_limits():
    runaway = """database({ s(X: integer) }).
    inf(X) <- s(X).
    inf(Y) <- inf(X), Y = X + 1.
    query inf(X)."""
    s = Relation.from_rows(Schema([("X", INT)]), [(0,)])
    outcome: list = []

    def work():
        try:
            run_program(runaway, {"s": s}, Limits(max_iterations=200))
            outcome.append("finished")
        except LimitExceededError:
            outcome.append("limited")

    t = threading.Thread(target=work, daemon=True)
    t.start()
    t.join(timeout=1.0)
    assert outcome == ["limited"], "evaluation did not stop within the watchdog"


def test_deadline_aborts_between_iterations():
    runaway = """database({ s(X: integer) }).
    inf(X) <- s(X).
    inf(Y) <- inf(X), Y = X + 1.
    query inf(X)."""
    s = Relation.from_rows(Schema([("X", INT)]), [(0,)])
    limits = Limits(deadline=time.monotonic() + 0.05)
    with pytest.raises(EvalTimeoutError):
        run_program(runaway, {"s": s}, limits)


def test_comparison_guard_stops_arithmetic_recursion():
    text = """database({ s(X: integer) }).
    upto(X) <- s(X).
    upto(Y) <- upto(X), X < 5, Y = X + 1.
    query upto(X)."""
    r = run_program(text, {"s": Relation.from_rows(Schema([("X", INT)]), [(0,)])})
    assert r.result.rows == {(i,) for i in range(6)}


def test_query_constant_filter_and_wildcard_projection():
    text = """database({ e(A: integer, B: integer) }).
    p(X, Y) <- e(X, Y).
    query p(1, Y)."""
    rel = Relation.from_rows(Schema([("A", INT), ("B", INT)]),
                             [(1, 2), (1, 3), (2, 9)])
    r = run_program(text, {"e": rel})
    assert r.result.schema.names == ("Y",)
    assert r.result.rows == {(2,), (3,)}


def test_query_repeated_variable_filters_equality():
    text = """database({ e(A: integer, B: integer) }).
    p(X, Y) <- e(X, Y).
    query p(X, X)."""
    rel = Relation.from_rows(Schema([("A", INT), ("B", INT)]),
                             [(1, 1), (1, 2), (3, 3)])
    r = run_program(text, {"e": rel})
    assert r.result.rows == {(1,), (3,)}


def test_sigmoid_builtin():
    text = """database({ n(X: double) }).
    s(X, Y) <- n(X), Y = sigmoid(X).
    query s(X, Y)."""
    rel = Relation.from_rows(Schema([("X", DBL)]), [(0.0,), (800.0,), (-800.0,)])
    r = run_program(text, {"n": rel})
    by_x = {row[0]: row[1] for row in r.result.rows}
    assert by_x[0.0] == 0.5
    assert by_x[800.0] == 1.0
    assert by_x[-800.0] == 0.0


def test_running_best_min_equals_posthoc_on_dags():
    """On DAGs the aggregate-free fixpoint is finite: min-in-recursion must
    equal the post-hoc minimum over all derived path lengths."""
    rng = random.Random(11)
    with_min = """database({ arc(F: integer, T: integer, W: double) }).
    sp(0, 0.0).
    sp(T, min<D1>) <- sp(F, D), arc(F, T, W), D1 = D + W.
    query sp(N, D)."""
    without = """database({ arc(F: integer, T: integer, W: double) }).
    walk(0, 0.0).
    walk(T, D1) <- walk(F, D), arc(F, T, W), D1 = D + W.
    query walk(N, D)."""
    schema = Schema([("F", INT), ("T", INT), ("W", DBL)])
    for _ in range(15):
        n = rng.randint(2, 10)
        rows = {(a, b, float(rng.randint(0, 9)))
                for a in range(n) for b in range(a + 1, n) if rng.random() < 0.4}
        db = {"arc": Relation.from_rows(schema, rows)}
        best = run_program(with_min, db).result.rows
        all_walks = run_program(without, db).result.rows
        posthoc = {}
        for node, d in all_walks:
            posthoc[node] = min(d, posthoc.get(node, float("inf")))
        assert best == {(node, d) for node, d in posthoc.items()}


def test_min_recursion_settles_quickly_after_last_improvement():
    """Cyclic graphs: the fixpoint ends within |V| rounds of the final
    improvement (here: exactly one empty round after it)."""
    rng = random.Random(13)
    sssp = """database({ arc(F: integer, T: integer, W: double) }).
    sp(0, 0.0).
    sp(T, min<D1>) <- sp(F, D), arc(F, T, W), D1 = D + W.
    query sp(N, D)."""
    schema = Schema([("F", INT), ("T", INT), ("W", DBL)])
    for _ in range(10):
        n = rng.randint(2, 12)
        rows = {(a, b, float(rng.randint(0, 5)))
                for a in range(n) for b in range(n)
                if a != b and rng.random() < 0.3}
        db = {"arc": Relation.from_rows(schema, rows)}
        r = run_program(sssp, db)
        oracle = dijkstra(rows, 0)
        assert r.result.rows == {(node, d) for node, d in oracle.items()}
        assert r.stats.strata[-1].iterations <= n + 2


def _random_rule_set(rng: random.Random) -> tuple[str, dict]:
    """Aggregate-free programs over small integer EDBs (always terminating)."""
    domain = rng.randint(2, 5)
    e_rows = {(rng.randint(0, domain), rng.randint(0, domain))
              for _ in range(rng.randint(1, 10))}
    f_rows = {(rng.randint(0, domain),) for _ in range(rng.randint(0, 4))}
    lines = ["database({ e(A: integer, B: integer), f(A: integer) })."]
    shapes = [
        "p(X, Y) <- e(X, Y).",
        "p(X, Y) <- p(X, Z), e(Z, Y).",
        "p(X, Y) <- e(X, Z), p(Z, Y).",
        "p(X, X) <- f(X).",
        "q(X) <- p(X, _).",
        "q(X) <- f(X).",
        "r(X, Y) <- p(X, Y), q(Y).",
        "r(X, Y) <- r(Y, X).",
        "r(X, Y) <- p(Y, X).",
        "q(X) <- r(X, X).",
    ]
    picked = [s for s in shapes if rng.random() < 0.7]
    if not any(s.startswith("p(X, Y) <- e") for s in picked):
        picked.insert(0, "p(X, Y) <- e(X, Y).")
    # close over referenced predicates so every body atom is defined
    if any(", q(" in s or "q(Y)." in s or "q(X)." in s for s in picked) and \
            not any(s.startswith("q(") for s in picked):
        picked.append("q(X) <- f(X).")
    if any("r(X, X)" in s and s.startswith("q(") for s in picked) and \
            not any(s.startswith("r(") for s in picked):
        picked.append("r(X, Y) <- p(Y, X).")
    lines.extend(picked)
    lines.append("query p(X, Y).")
    schema_e = Schema([("A", INT), ("B", INT)])
    schema_f = Schema([("A", INT)])
    db = {"e": Relation.from_rows(schema_e, e_rows),
          "f": Relation.from_rows(schema_f, f_rows)}
    return "\n".join(lines), db


def test_seminaive_equals_naive_on_random_rule_sets():
    rng = random.Random(101)
    for _ in range(80):
        text, db = _random_rule_set(rng)
        program = parse_program(text)
        compiled = compile_program(program)
        fast, _ = evaluate(compiled, db)
        slow, _ = evaluate_naive(compiled, db)
        for pred in compiled.schemas:
            assert fast[pred] == slow[pred], text


def test_empty_program_has_no_recursive_iterations():
    r = run_program("p(1). query p(X).", {})
    assert r.stats.total_iterations == 0
    r2 = run_program("p(1). query p(X).", {}, naive=True)
    assert r2.stats.total_iterations == 0
    assert r2.database["p"] == r.database["p"]


def test_seminaive_equals_naive_on_cc_and_sssp_programs():
    rng = random.Random(77)
    cc_text = """database({ edge(A: integer, B: integer) }).
    link(X, Y) <- edge(X, Y).
    link(Y, X) <- edge(X, Y).
    cc(X, min<X>) <- link(X, _).
    cc(Y, min<C>) <- cc(X, C), link(X, Y).
    query cc(N, C)."""
    sssp_text = """database({ edge(A: integer, B: integer) }).
    sp(0, 0.0).
    sp(T, min<D1>) <- sp(F, D), edge(F, T), D1 = D + 1.0.
    query sp(N, D)."""
    schema = Schema([("A", INT), ("B", INT)])
    for text in (cc_text, sssp_text):
        for _ in range(12):
            n = rng.randint(2, 25)
            rows = {(rng.randrange(n), rng.randrange(n))
                    for _ in range(rng.randint(1, 2 * n))}
            db = {"edge": Relation.from_rows(schema, rows)}
            compiled = compile_program(parse_program(text))
            fast, _ = evaluate(compiled, db)
            slow, _ = evaluate_naive(compiled, db)
            for pred in compiled.schemas:
                assert fast[pred] == slow[pred]


def test_mixed_component_min_with_plain_predicate():
    """A running-best predicate mutually recursive with a plain predicate:
    distances still match breadth-first levels."""
    text = """database({ arc(F: integer, T: integer) }).
    sp(0, 0).
    hop(T, D) <- sp(F, D), arc(F, T).
    sp(T, min<D1>) <- hop(T, D), D1 = D + 1.
    query sp(N, D)."""
    rng = random.Random(19)
    schema = Schema([("F", INT), ("T", INT)])
    for _ in range(10):
        n = rng.randint(2, 15)
        edges = {(rng.randrange(n), rng.randrange(n))
                 for _ in range(rng.randint(1, 3 * n))}
        r = run_program(text, {"arc": Relation.from_rows(schema, edges)})
        # breadth-first levels from node 0
        level = {0: 0}
        frontier = [0]
        while frontier:
            nxt = []
            for f in frontier:
                for a, b in edges:
                    if a == f and b not in level:
                        level[b] = level[f] + 1
                        nxt.append(b)
            frontier = nxt
        assert r.result.rows == set(level.items())


def test_aggregate_result_types():
    text = """database({ e(A: integer, B: integer, W: double) }).
    cnt(A, count<B>) <- e(A, B, _).
    mean(A, avg<B>) <- e(A, B, _).
    isum(A, sum<B, B>) <- e(A, B, _).
    dsum(A, sum<B, W>) <- e(A, B, W).
    lo(A, min<W>) <- e(A, _, W).
    query cnt(A, N)."""
    compiled = compile_program(parse_program(text))
    assert compiled.schemas["cnt"].types == (INT, INT)
    assert compiled.schemas["mean"].types == (INT, DBL)
    assert compiled.schemas["isum"].types == (INT, INT)
    assert compiled.schemas["dsum"].types == (INT, DBL)
    assert compiled.schemas["lo"].types == (INT, DBL)
    rel = Relation.from_rows(Schema([("A", INT), ("B", INT), ("W", DBL)]),
                             [(1, 2, 0.5), (1, 3, 1.5), (2, 9, 4.0)])
    r = run_program(text, {"e": rel})
    assert r.database["cnt"].rows == {(1, 2), (2, 1)}
    assert r.database["mean"].rows == {(1, 2.5), (2, 9.0)}
    assert r.database["isum"].rows == {(1, 5), (2, 9)}
    assert r.database["dsum"].rows == {(1, 2.0), (2, 4.0)}
    assert r.database["lo"].rows == {(1, 0.5), (2, 4.0)}


def test_query_wildcard_drops_column():
    text = """database({ e(A: integer, B: integer) }).
    p(X, Y) <- e(X, Y).
    query p(X, _)."""
    rel = Relation.from_rows(Schema([("A", INT), ("B", INT)]),
                             [(1, 2), (1, 3), (2, 9)])
    r = run_program(text, {"e": rel})
    assert r.result.schema.names == ("X",)
    assert r.result.rows == {(1,), (2,)}


def test_keyed_count_in_recursion():
    """A count aggregate feeding back into the loop that produces its input:
    every round counts exactly the rows of its own key."""
    text = """database({ start(X: integer) }).
    run(0, X) <- start(X).
    run(J1, Y) <- run(J, X), tally(J, N), J < 3, Y = X + N, J1 = J + 1.
    tally(J, count<X>) <- run(J, X).
    query tally(J, N)."""
    start = Relation.from_rows(Schema([("X", INT)]), [(10,), (20,)])
    r = run_program(text, {"start": start})
    assert r.database["tally"].rows == {(0, 2), (1, 2), (2, 2), (3, 2)}
    assert r.database["run"].rows == {
        (0, 10), (0, 20), (1, 12), (1, 22), (2, 14), (2, 24), (3, 16), (3, 26)}
    slow = run_program(text, {"start": start}, naive=True)
    assert slow.database["tally"] == r.database["tally"]
    assert slow.database["run"] == r.database["run"]


def test_two_independent_keyed_components():
    text = """database({ a(X: integer), b(X: integer) }).
    pa(0, X) <- a(X).
    pa(J1, Y) <- pa(J, X), sa(J, S), J < 2, Y = X + S, J1 = J + 1.
    sa(J, sum<X, X>) <- pa(J, X).
    pb(0, X) <- b(X).
    pb(J1, Y) <- pb(J, X), sb(J, S), J < 2, Y = X * S, J1 = J + 1.
    sb(J, sum<X, X>) <- pb(J, X).
    query sa(J, S)."""
    db = {"a": Relation.from_rows(Schema([("X", INT)]), [(1,), (2,)]),
          "b": Relation.from_rows(Schema([("X", INT)]), [(3,)])}
    r = run_program(text, db)
    # component a: {1,2} -> sum 3 -> {4,5} -> sum 9 -> {13,14} -> sum 27
    assert r.database["sa"].rows == {(0, 3), (1, 9), (2, 27)}
    # component b: {3} -> sum 3 -> {3*3=9} -> sum 9 -> {9*9=81} -> sum 81
    assert r.database["sb"].rows == {(0, 3), (1, 9), (2, 81)}
    slow = run_program(text, db, naive=True)
    for pred in ("sa", "sb", "pa", "pb"):
        assert slow.database[pred] == r.database[pred]
