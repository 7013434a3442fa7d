"""Encapsulated recursive algorithms exposed as configurable executable objects.

Each catalog entry owns a program template, a list of input slots (expected
attribute names and types), and named parameters. Callers build an instance,
map their own column names onto the expected attributes (``set_direction`` /
``set_sec_direction``), set parameters, and execute:

    tc = new_function("TC")
    tc.set_direction(FromCol="Node1", ToCol="Node2")
    closure = tc.materialize([edges], session)
    tc.run([edges], "closure.csv", session)

Parameters are substituted into the template as typed literals before
parsing, so the engine itself never sees an unbound symbol.

Built-ins: TC (transitive closure), ConnectedComponents, SSSP (single-source
shortest paths), MLM (multi-level-marketing bonus), LinRegBGD and LogRegBGD
(batch-gradient-descent regression with iteration-keyed aggregation).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from string import Template
from typing import Callable, Optional, Sequence

from .analysis import analyze
from .engine import Limits, RunResult, run_program
from .errors import (
    CycleError,
    IncompleteMappingError,
    NameCollisionError,
    ParamError,
    SchemaMismatchError,
    UnknownAttributeError,
    UnknownFunctionError,
    UnknownParamError,
)
from .parser import parse_program
from .relation import (
    ColumnType,
    Relation,
    Schema,
    Value,
    coerce_relation,
    rename_columns,
    select_columns,
    write_csv,
)

INT = ColumnType.INTEGER
DBL = ColumnType.DOUBLE
TXT = ColumnType.TEXT


@dataclass(frozen=True)
class ParamSpec:
    name: str
    ctype: ColumnType
    default: Optional[Value] = None  # None means the caller must set it
    sample: Optional[Value] = None  # used only by the load-time self check
    doc: str = ""

    @property
    def required(self) -> bool:
        return self.default is None


@dataclass(frozen=True)
class SlotSpec:
    name: str  # also the relation name inside the template
    attrs: tuple[tuple[str, ColumnType], ...]

    @property
    def attr_names(self) -> tuple[str, ...]:
        return tuple(a for a, _ in self.attrs)

    @property
    def schema(self) -> Schema:
        return Schema(self.attrs)


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    template: str
    slots: tuple[SlotSpec, ...]
    params: tuple[ParamSpec, ...] = ()
    doc: str = ""
    check_inputs: Optional[Callable[[Sequence[Relation], dict[str, Value]], None]] = None

    def param(self, name: str) -> ParamSpec:
        for p in self.params:
            if p.name == name:
                return p
        raise UnknownParamError(f"{self.name} has no parameter {name!r}")


def _render_literal(value: Value) -> str:
    if isinstance(value, bool):
        raise ParamError("boolean parameters are not supported")
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    escaped = value.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


class LibraryFunction:
    """One configurable instance of a catalog function (builder style)."""

    def __init__(self, spec: FunctionSpec):
        self.spec = spec
        self._params: dict[str, Value] = {
            p.name: p.default for p in spec.params if p.default is not None}
        self._mappings: list[Optional[dict[str, str]]] = [None] * len(spec.slots)

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def params(self) -> dict[str, Value]:
        return dict(self._params)

    def _set_slot_mapping(self, slot_index: int, columns: dict[str, str]) -> None:
        if slot_index >= len(self.spec.slots):
            raise UnknownAttributeError(
                f"{self.name} has no input slot {slot_index + 1}")
        slot = self.spec.slots[slot_index]
        mapping: dict[str, str] = {}
        for key, column in columns.items():
            if not key.endswith("Col"):
                raise UnknownAttributeError(
                    f"{self.name}: use <Attr>Col keywords, got {key!r}")
            attr = key[:-3]
            if attr not in slot.attr_names:
                raise UnknownAttributeError(
                    f"{self.name}: slot {slot.name!r} has no attribute {attr!r} "
                    f"(expects {', '.join(slot.attr_names)})")
            mapping[attr] = column
        missing = [a for a in slot.attr_names if a not in mapping]
        if missing:
            raise IncompleteMappingError(
                f"{self.name}: slot {slot.name!r} is missing mappings for "
                f"{', '.join(missing)}")
        self._mappings[slot_index] = mapping

    def set_direction(self, **columns: str) -> "LibraryFunction":
        """Map the first input's column names onto the expected attributes."""
        self._set_slot_mapping(0, columns)
        return self

    def set_sec_direction(self, **columns: str) -> "LibraryFunction":
        """Map the second input's column names (two-relation functions)."""
        self._set_slot_mapping(1, columns)
        return self

    def set_param(self, name: str, value: Value) -> "LibraryFunction":
        spec = self.spec.param(name)
        if spec.ctype is INT:
            if isinstance(value, bool) or not isinstance(value, int):
                raise SchemaMismatchError(
                    f"{self.name}: parameter {name!r} expects an integer")
        elif spec.ctype is DBL:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise SchemaMismatchError(
                    f"{self.name}: parameter {name!r} expects a number")
            value = float(value)
            if math.isnan(value) or math.isinf(value):
                raise SchemaMismatchError(
                    f"{self.name}: parameter {name!r} must be finite")
        elif not isinstance(value, str):
            raise SchemaMismatchError(
                f"{self.name}: parameter {name!r} expects a string")
        self._params[name] = value
        return self

    def program_text(self) -> str:
        """The template with every parameter substituted as a literal."""
        for p in self.spec.params:
            if p.name not in self._params:
                raise ParamError(
                    f"{self.name}: parameter {p.name!r} must be set before "
                    "execution")
        rendered = {k: _render_literal(v) for k, v in self._params.items()}
        return Template(self.spec.template).substitute(rendered)

    def _mapped_inputs(self, inputs: Sequence[Relation]) -> dict[str, Relation]:
        if len(inputs) != len(self.spec.slots):
            raise SchemaMismatchError(
                f"{self.name} expects {len(self.spec.slots)} input relation(s), "
                f"got {len(inputs)}")
        out: dict[str, Relation] = {}
        for i, (slot, rel) in enumerate(zip(self.spec.slots, inputs)):
            mapping = self._mappings[i]
            if mapping is None:
                raise IncompleteMappingError(
                    f"{self.name}: call "
                    f"{'set_direction' if i == 0 else 'set_sec_direction'} for "
                    f"slot {slot.name!r} before execution")
            picked = select_columns(rel, [mapping[a] for a in slot.attr_names])
            renamed = rename_columns(
                picked, list(zip(picked.schema.names, slot.attr_names)))
            out[slot.name] = coerce_relation(renamed, slot.schema)
        return out

    def _execute(self, inputs: Sequence[Relation], session) -> RunResult:
        db = self._mapped_inputs(inputs)
        if self.spec.check_inputs is not None:
            self.spec.check_inputs(list(db.values()), dict(self._params))
        limits = getattr(session, "limits", None) or Limits()
        result = run_program(self.program_text(), db, limits)
        if session is not None:
            session.record_stats(f"function {self.name}", result.stats)
        return result

    def materialize(self, inputs: Sequence[Relation], session=None) -> Relation:
        """Execute and return the query relation."""
        return self._execute(inputs, session).result

    def materialize_rows(self, inputs: Sequence[Relation], session=None) -> list[tuple]:
        """Execute and return bare row tuples in deterministic order."""
        return self.materialize(inputs, session).sorted_rows()

    def run(self, inputs: Sequence[Relation], output: str | Path, session=None) -> None:
        """Execute and persist the result as CSV at ``output``."""
        write_csv(self.materialize(inputs, session), output)


# --- built-in templates ---------------------------------------------------------

TC_TEMPLATE = """database({
arc(From: integer, To: integer)
}).
tc(From,To)<- arc(From,To).
tc(From,To) <- tc(From,Tmp), arc(Tmp,To).
query tc(From, To).
"""

CC_TEMPLATE = """database({ edge(Node1: integer, Node2: integer) }).
link(X, Y) <- edge(X, Y).
link(Y, X) <- edge(X, Y).
cc(X, min<X>) <- link(X, _).
cc(Y, min<C>) <- cc(X, C), link(X, Y).
query cc(Node, Component).
"""

SSSP_TEMPLATE = """database({ arc(From: integer, To: integer, W: double) }).
sp($source, 0.0).
sp(To, min<D1>) <- sp(From, D), arc(From, To, W), D1 = D + W.
query sp(Node, Dist).
"""

MLM_TEMPLATE = """database({
sales(M: string, Profit: double),
sponsor(M: string, M2: string)
}).
down(X, Y) <- sponsor(X, Y).
down(X, Z) <- down(X, Y), sponsor(Y, Z).
part(X, X, C) <- sales(X, _), C = 0.0.
part(X, Y, C) <- down(X, Y), sales(Y, P), C = P * $proportion.
cut(X, sum<Y, C>) <- part(X, Y, C).
bonus(M, B) <- sales(M, P), cut(M, E), B = P + E.
query bonus(Member, Bonus).
"""

LINREG_TEMPLATE = """database({ vtrain(Id: integer, C: integer, V: double, Y: double) }).
size(count<Id>) <- vtrain(Id, _, _, _).
model(0, C, $init) <- vtrain(_, C, _, _).
model(J1, C, NP) <- model(J, C, P), gradient(J, C, G), size(N), J < $iterations, NP = P - $lr * G / N, J1 = J + 1.
gradient(J, C, sum<Id, G0>) <- vtrain(Id, C, V, Y), predict(J, Id, YP), G0 = 2.0 * (YP - Y) * V.
predict(J, Id, sum<C, Y0>) <- vtrain(Id, C, V, _), model(J, C, P), Y0 = V * P.
trained(C, P) <- model($iterations, C, P).
query trained(C, P).
"""

LOGREG_TEMPLATE = """database({ vtrain(Id: integer, C: integer, V: double, Y: double) }).
size(count<Id>) <- vtrain(Id, _, _, _).
model(0, C, $init) <- vtrain(_, C, _, _).
model(J1, C, NP) <- model(J, C, P), gradient(J, C, G), size(N), J < $iterations, NP = P - $lr * G / N, J1 = J + 1.
gradient(J, C, sum<Id, G0>) <- vtrain(Id, C, V, Y), predict(J, Id, YP), G0 = (sigmoid(YP) - Y) * V.
predict(J, Id, sum<C, Y0>) <- vtrain(Id, C, V, _), model(J, C, P), Y0 = V * P.
trained(C, P) <- model($iterations, C, P).
query trained(C, P).
"""

_PREDICT_LINEAR = """database({
model(C: integer, P: double),
vtest(Id: integer, C: integer, V: double)
}).
pred(Id, sum<C, Y0>) <- vtest(Id, C, V), model(C, P), Y0 = V * P.
query pred(Id, Prediction).
"""

_PREDICT_LOGISTIC = """database({
model(C: integer, P: double),
vtest(Id: integer, C: integer, V: double)
}).
pred(Id, sum<C, Y0>) <- vtest(Id, C, V), model(C, P), Y0 = V * P.
label(Id, 1) <- pred(Id, Y), Y >= 0.0.
label(Id, 0) <- pred(Id, Y), Y < 0.0.
query label(Id, Prediction).
"""


def _check_mlm_inputs(inputs: Sequence[Relation], params: dict[str, Value]) -> None:
    """The sponsor graph must be a forest: one sponsor per member, no cycles."""
    sponsor = inputs[1]
    parent: dict[Value, Value] = {}
    for who, recruit in ((r[0], r[1]) for r in sponsor.rows):
        if recruit in parent:
            raise CycleError(
                f"sponsor input is not a forest: member {recruit!r} is "
                "recruited twice")
        parent[recruit] = who
    done: set[Value] = set()
    for member in parent:
        trail: list[Value] = []
        node = member
        while node in parent and node not in done:
            if node in trail:
                raise CycleError(
                    f"sponsor input contains a recruiting cycle through {node!r}")
            trail.append(node)
            node = parent[node]
        done.update(trail)


def _check_sssp_inputs(inputs: Sequence[Relation], params: dict[str, Value]) -> None:
    for row in inputs[0].rows:
        if row[2] < 0:
            raise ParamError(
                f"negative edge weight {row[2]!r} on arc {row[0]!r}->{row[1]!r}")


BUILTINS: dict[str, FunctionSpec] = {
    spec.name: spec for spec in (
        FunctionSpec(
            name="TC",
            template=TC_TEMPLATE,
            slots=(SlotSpec("arc", (("From", INT), ("To", INT))),),
            doc="Transitive closure of a directed edge relation.",
        ),
        FunctionSpec(
            name="ConnectedComponents",
            template=CC_TEMPLATE,
            slots=(SlotSpec("edge", (("Node1", INT), ("Node2", INT))),),
            doc="Connected components of an undirected graph (edges are "
                "symmetrized); each node is labeled with the smallest node id "
                "reachable from it.",
        ),
        FunctionSpec(
            name="SSSP",
            template=SSSP_TEMPLATE,
            slots=(SlotSpec("arc", (("From", INT), ("To", INT), ("W", DBL))),),
            params=(ParamSpec("source", INT, default=None, sample=0,
                              doc="start node id"),),
            doc="Single-source shortest paths over non-negative weights.",
            check_inputs=_check_sssp_inputs,
        ),
        FunctionSpec(
            name="MLM",
            template=MLM_TEMPLATE,
            slots=(
                SlotSpec("sales", (("M", TXT), ("Profit", DBL))),
                SlotSpec("sponsor", (("M", TXT), ("M2", TXT))),
            ),
            params=(ParamSpec("proportion", DBL, default=0.1,
                              doc="share of every direct or indirect "
                                  "recruit's sales added to a member's bonus"),),
            doc="Multi-level-marketing bonus: own sales plus a proportion of "
                "all recruits' sales, recursively.",
            check_inputs=_check_mlm_inputs,
        ),
        FunctionSpec(
            name="LinRegBGD",
            template=LINREG_TEMPLATE,
            slots=(SlotSpec("vtrain", (("Id", INT), ("C", INT), ("V", DBL),
                                       ("Y", DBL))),),
            params=(
                ParamSpec("lr", DBL, default=0.05, doc="learning rate"),
                ParamSpec("iterations", INT, default=100,
                          doc="number of gradient steps"),
                ParamSpec("init", DBL, default=0.01,
                          doc="initial value for every model parameter"),
            ),
            doc="Linear regression trained by batch gradient descent written "
                "as an iteration-keyed recursive program; returns (C, P).",
        ),
        FunctionSpec(
            name="LogRegBGD",
            template=LOGREG_TEMPLATE,
            slots=(SlotSpec("vtrain", (("Id", INT), ("C", INT), ("V", DBL),
                                       ("Y", DBL))),),
            params=(
                ParamSpec("lr", DBL, default=0.05, doc="learning rate"),
                ParamSpec("iterations", INT, default=100,
                          doc="number of gradient steps"),
                ParamSpec("init", DBL, default=0.01,
                          doc="initial value for every model parameter"),
            ),
            doc="Logistic regression trained by batch gradient descent; "
                "returns linear scores as (C, P), threshold with predict().",
        ),
    )
}


class Catalog:
    """The built-in functions plus any functions registered at runtime."""

    def __init__(self) -> None:
        self._specs: dict[str, FunctionSpec] = dict(BUILTINS)

    def names(self) -> list[str]:
        return list(self._specs)

    def get(self, name: str) -> FunctionSpec:
        try:
            return self._specs[name]
        except KeyError:
            raise UnknownFunctionError(
                f"no function named {name!r}; available: "
                f"{', '.join(self._specs)}") from None

    def new(self, name: str) -> LibraryFunction:
        return LibraryFunction(self.get(name))

    def register(self, name: str, template: str,
                 input_slots: Sequence[tuple[str, Sequence[tuple[str, ColumnType]]]],
                 params: Sequence[ParamSpec] = (), doc: str = "") -> FunctionSpec:
        if name in self._specs:
            raise NameCollisionError(f"function {name!r} already exists")
        spec = FunctionSpec(
            name, template,
            tuple(SlotSpec(slot, tuple(attrs)) for slot, attrs in input_slots),
            tuple(params), doc)
        validate_spec(spec)
        self._specs[name] = spec
        return spec


def validate_spec(spec: FunctionSpec) -> None:
    """Parse + analyze the template with defaults (or samples) substituted,
    and check the declared relations match the slots."""
    values: dict[str, str] = {}
    for p in spec.params:
        v = p.default if p.default is not None else p.sample
        if v is None:
            raise ParamError(
                f"{spec.name}: parameter {p.name!r} needs a default or sample")
        values[p.name] = _render_literal(v)
    try:
        text = Template(spec.template).substitute(values)
    except KeyError as exc:
        raise ParamError(
            f"{spec.name}: template references undeclared parameter {exc}") from None
    program = parse_program(text)
    analyze(program)
    declared = program.declared
    for slot in spec.slots:
        if slot.name not in declared:
            raise SchemaMismatchError(
                f"{spec.name}: template does not declare slot {slot.name!r}")
        if declared[slot.name].columns != slot.attrs:
            raise SchemaMismatchError(
                f"{spec.name}: slot {slot.name!r} does not match the "
                "template declaration")
    if program.query is None:
        raise SchemaMismatchError(f"{spec.name}: template has no query")


def _self_check() -> None:
    for spec in BUILTINS.values():
        validate_spec(spec)


def new_function(name: str, session=None) -> LibraryFunction:
    """Instantiate a catalog function (the session's catalog if given)."""
    if session is not None:
        return session.functions.new(name)
    return Catalog().new(name)


def predict(trained: Relation, test: Relation, session=None, *,
            logistic: bool = False) -> Relation:
    """Score test instances with a trained model relation.

    ``trained`` must be (feature index: integer, parameter: double);
    ``test`` must be shaped like the training input minus the label:
    (id: integer, feature index: integer, value: double). Linear models
    return (Id, Prediction: double); logistic models threshold the sigmoid
    at 0.5 (score >= 0 maps to label 1) and return (Id, Prediction: integer).
    """
    model = coerce_relation(trained, Schema((("C", INT), ("P", DBL))))
    vtest = coerce_relation(test, Schema((("Id", INT), ("C", INT), ("V", DBL))))
    text = _PREDICT_LOGISTIC if logistic else _PREDICT_LINEAR
    limits = getattr(session, "limits", None) or Limits()
    result = run_program(text, {"model": model, "vtest": vtest}, limits)
    if session is not None:
        session.record_stats("predict", result.stats)
    return result.result


def catalog_reference(catalog: Optional[Catalog] = None) -> str:
    """Markdown reference page: slots, attributes, params and template text."""
    catalog = catalog or Catalog()
    lines = ["# Function catalog", ""]
    for name in catalog.names():
        spec = catalog.get(name)
        lines.append(f"## {spec.name}")
        lines.append("")
        if spec.doc:
            lines.append(spec.doc)
            lines.append("")
        for i, slot in enumerate(spec.slots):
            attrs = ", ".join(f"{a}: {t.value}" for a, t in slot.attrs)
            lines.append(f"- input {i + 1} (`{slot.name}`): {attrs}")
        for p in spec.params:
            default = "required" if p.required else f"default `{p.default!r}`"
            lines.append(f"- param `{p.name}` ({p.ctype.value}, {default})"
                         + (f": {p.doc}" if p.doc else ""))
        lines.append("")
        lines.append("```\n" + spec.template.rstrip("\n") + "\n```")
        lines.append("")
    return "\n".join(lines)


_self_check()
