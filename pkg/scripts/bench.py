"""Semi-naive vs naive fixpoint cost on closure workloads.

    python3 scripts/bench.py [max-chain-length]

Prints per-round derived-row counts and wall time for both strategies on
chains (worst case for naive re-derivation) and random graphs.
"""
import random
import sys
import time

from llib.engine import compile_program, evaluate, evaluate_naive
from llib.parser import parse_program
from llib.relation import ColumnType, Relation, Schema

TC = """database({ arc(From: integer, To: integer) }).
tc(From,To) <- arc(From,To).
tc(From,To) <- tc(From,Tmp), arc(Tmp,To).
query tc(From, To)."""

SCHEMA = Schema([("From", ColumnType.INTEGER), ("To", ColumnType.INTEGER)])


def run(label: str, edges) -> None:
    db = {"arc": Relation.from_rows(SCHEMA, edges)}
    compiled = compile_program(parse_program(TC))
    t0 = time.perf_counter()
    fast_db, fast_stats = evaluate(compiled, db)
    fast_s = time.perf_counter() - t0
    t0 = time.perf_counter()
    slow_db, slow_stats = evaluate_naive(compiled, db)
    slow_s = time.perf_counter() - t0
    assert fast_db["tc"] == slow_db["tc"]
    fast_rows = sum(fast_stats.strata[-1].evaluated_history)
    slow_rows = sum(slow_stats.strata[-1].evaluated_history)
    print(f"{label:28} |tc|={len(fast_db['tc']):6}  "
          f"semi-naive {fast_rows:8} rows {fast_s * 1000:8.1f}ms  "
          f"naive {slow_rows:8} rows {slow_s * 1000:8.1f}ms  "
          f"({slow_rows / max(fast_rows, 1):.1f}x rows)")


def main() -> None:
    top = int(sys.argv[1]) if len(sys.argv) > 1 else 200
    n = 25
    while n <= top:
        run(f"chain length {n}", [(i, i + 1) for i in range(n)])
        n *= 2
    rng = random.Random(0)
    for nodes, p in ((50, 0.05), (100, 0.02), (150, 0.015)):
        edges = {(a, b) for a in range(nodes) for b in range(nodes)
                 if a != b and rng.random() < p}
        run(f"random n={nodes} p={p}", edges)


if __name__ == "__main__":
    main()
