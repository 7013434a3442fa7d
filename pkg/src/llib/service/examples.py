"""Self-contained programs bundled for the playground's example picker.

Every entry executes as-is through POST /v1/execute; ids are stable across
releases.
"""
from __future__ import annotations

from ..library import BUILTINS, LibraryFunction
from .models import ColumnSpec, ExamplePayload, RelationPayload


def _rel(name: str, cols: list[tuple[str, str]], rows: list[list]) -> RelationPayload:
    return RelationPayload(
        name=name,
        schema=[ColumnSpec(name=c, type=t) for c, t in cols],
        rows=rows)


def _instantiated(fn_name: str, **params) -> str:
    fn = LibraryFunction(BUILTINS[fn_name])
    for k, v in params.items():
        fn.set_param(k, v)
    return fn.program_text()


def bundled_examples() -> list[ExamplePayload]:
    return [
        ExamplePayload(
            id="transitive-closure",
            title="Transitive closure",
            program=BUILTINS["TC"].template,
            relations=[_rel("arc", [("From", "integer"), ("To", "integer")],
                            [[1, 2], [2, 3]])],
        ),
        ExamplePayload(
            id="connected-components",
            title="Connected components",
            program=BUILTINS["ConnectedComponents"].template,
            relations=[_rel("edge", [("Node1", "integer"), ("Node2", "integer")],
                            [[1, 2], [2, 3], [4, 5]])],
        ),
        ExamplePayload(
            id="sssp",
            title="Single-source shortest paths",
            program=_instantiated("SSSP", source=1),
            relations=[_rel("arc", [("From", "integer"), ("To", "integer"),
                                    ("W", "double")],
                            [[1, 2, 1.0], [2, 3, 1.0], [1, 3, 5.0], [3, 4, 2.0],
                             [4, 1, 1.0]])],
        ),
        ExamplePayload(
            id="mlm",
            title="Multi-level-marketing bonus",
            program=_instantiated("MLM", proportion=0.1),
            relations=[
                _rel("sales", [("M", "string"), ("Profit", "double")],
                     [["ann", 100.0], ["bob", 50.0], ["cat", 10.0], ["dan", 20.0]]),
                _rel("sponsor", [("M", "string"), ("M2", "string")],
                     [["ann", "bob"], ["bob", "cat"], ["ann", "dan"]]),
            ],
        ),
        ExamplePayload(
            id="linreg-bgd",
            title="Linear regression by gradient descent",
            program=_instantiated("LinRegBGD", lr=0.05, iterations=25, init=0.01),
            relations=[_rel("vtrain", [("Id", "integer"), ("C", "integer"),
                                       ("V", "double"), ("Y", "double")],
                            [[1, 1, 0.5, 1.0], [2, 1, 1.0, 2.1], [3, 1, 1.5, 2.9],
                             [4, 1, 2.0, 4.0]])],
        ),
    ]
