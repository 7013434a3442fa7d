"""Operator-tree compiler and bottom-up fixpoint evaluator.

``compile_program`` turns a stratified program into one plan per stratum.
Rule bodies become Scan/Join/Select/Compute pipelines topped by a Project
(plain heads) or an Aggregate (aggregated heads); a recursive stratum is a
Recursion owning its exit rules and recursive rules.

``evaluate`` materializes every derived predicate to fixpoint. Recursive
strata run semi-naive delta iteration: the totals start from the exit rules,
and each round re-derives only from the previous round's new facts (for a
rule with k same-component body atoms, k variants, each reading the delta at
one position and the totals at the others). ``evaluate_naive`` recomputes all
rules from the full totals every round instead and must reach the identical
database; it exists as a differential-testing oracle and benchmark baseline.

Aggregates inside recursion follow two disciplines (validated by analysis):

  * min/max run with running-best semantics: a derived row replaces a worse
    row for the same group and enters the delta only if it improves. This is
    what lets shortest-path programs terminate on cyclic graphs.
  * sum/count are keyed by an iteration argument (argument 0). When a fixpoint
    round derives nothing new, the lowest open key can never change again, so
    its aggregate rows are computed from exactly the facts of that round and
    emitted into the delta.

Evaluation never hangs: iteration and row limits plus an optional deadline
abort between rounds.
"""
from __future__ import annotations

import math
import operator
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

from .analysis import Stratification, analyze
from .errors import (
    EvalError,
    EvalTimeoutError,
    InternalError,
    LimitExceededError,
    MissingRelationError,
    TypeMismatchError,
)
from .parser import (
    AggregateTerm,
    Arith,
    Assignment,
    Atom,
    Call,
    Comparison,
    Constant,
    Program,
    Rule,
    Variable,
    Wildcard,
    parse_program,
)
from .relation import ColumnType, Relation, Schema, coerce_relation

Value = Union[int, float, str]
Database = dict[str, Relation]


# --- limits and statistics ------------------------------------------------------

@dataclass
class Limits:
    max_iterations: int = 10_000
    max_rows: int = 10_000_000
    deadline: Optional[float] = None  # time.monotonic() value

    def check_deadline(self) -> None:
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise EvalTimeoutError("evaluation exceeded its deadline")


@dataclass
class StratumStats:
    predicates: tuple[str, ...]
    recursive: bool
    iterations: int
    delta_history: list[int]
    evaluated_history: list[int]
    elapsed_s: float

    def to_dict(self) -> dict:
        return {
            "predicates": list(self.predicates),
            "recursive": self.recursive,
            "iterations": self.iterations,
            "delta_history": list(self.delta_history),
            "evaluated_history": list(self.evaluated_history),
            "elapsed_s": self.elapsed_s,
        }


@dataclass
class EvalStats:
    strata: list[StratumStats] = field(default_factory=list)
    rows_produced: dict[str, int] = field(default_factory=dict)
    elapsed_s: float = 0.0

    @property
    def total_iterations(self) -> int:
        return sum(s.iterations for s in self.strata if s.recursive)

    def to_dict(self) -> dict:
        return {
            "strata": [s.to_dict() for s in self.strata],
            "rows_produced": dict(self.rows_produced),
            "elapsed_s": self.elapsed_s,
            "total_iterations": self.total_iterations,
        }


# --- plan nodes -----------------------------------------------------------------

@dataclass(eq=False)
class Unit:
    columns: tuple[str, ...] = ()


@dataclass(eq=False)
class Scan:
    relation: str
    occurrence: int
    columns: tuple[str, ...]
    out_idx: tuple[int, ...]
    const_checks: tuple[tuple[int, Value], ...]
    eq_checks: tuple[tuple[int, int], ...]


@dataclass(eq=False)
class Join:
    left: "PlanNode"
    right: "PlanNode"
    columns: tuple[str, ...]
    left_key_idx: tuple[int, ...]
    right_key_idx: tuple[int, ...]
    right_keep_idx: tuple[int, ...]


@dataclass(eq=False)
class Select:
    child: "PlanNode"
    columns: tuple[str, ...]
    test: Callable[[tuple], bool]


@dataclass(eq=False)
class Compute:
    child: "PlanNode"
    columns: tuple[str, ...]
    fn: Callable[[tuple], Value]


@dataclass(eq=False)
class Project:
    child: "PlanNode"
    columns: tuple[str, ...]
    exprs: tuple[Callable[[tuple], Value], ...]
    types: tuple[ColumnType, ...]


@dataclass(eq=False)
class Aggregate:
    child: "PlanNode"  # emits (group..., witnesses..., value)
    columns: tuple[str, ...]
    n_group: int
    fn: str
    agg_pos: int  # where the aggregate lands among the head columns
    types: tuple[ColumnType, ...]


@dataclass(eq=False)
class UnionAll:
    children: tuple["PlanNode", ...]
    columns: tuple[str, ...]


PlanNode = Union[Unit, Scan, Join, Select, Compute, Project, Aggregate, UnionAll]


@dataclass(eq=False)
class CompiledRule:
    pred: str
    root: PlanNode
    scc_scans: tuple[tuple[int, str], ...] = ()  # (occurrence, predicate)
    xy_binding: Optional[str] = None  # predicate whose keys schedule this rule


@dataclass(eq=False)
class Recursion:
    """Fixpoint plan for one recursive component (possibly mutual)."""

    preds: tuple[str, ...]
    exit_rules: list[CompiledRule]
    rec_rules: list[CompiledRule]
    xy_rules: list[CompiledRule]
    minmax: dict[str, tuple[str, int]]  # pred -> (fn, value position)
    xy_order: dict[str, int]


@dataclass(eq=False)
class CompiledStratum:
    preds: tuple[str, ...]
    recursive: bool
    node: Union[Recursion, list[CompiledRule]]


@dataclass(eq=False)
class CompiledProgram:
    program: Program
    stratification: Stratification
    strata: list[CompiledStratum]
    edb_schemas: dict[str, Schema]
    schemas: dict[str, Schema]  # every predicate, declared and inferred


# --- type inference -------------------------------------------------------------

_NUMERIC = (ColumnType.INTEGER, ColumnType.DOUBLE)


def _join_types(a: Optional[ColumnType], b: Optional[ColumnType],
                context: str) -> Optional[ColumnType]:
    if a is None:
        return b
    if b is None or a is b:
        return a
    if a in _NUMERIC and b in _NUMERIC:
        return ColumnType.DOUBLE
    raise TypeMismatchError(f"{context}: {a.value} is incompatible with {b.value}")


def _expr_type(term, env: dict[str, Optional[ColumnType]], context: str) -> Optional[ColumnType]:
    if isinstance(term, Constant):
        return term.ctype
    if isinstance(term, Variable):
        return env.get(term.name)
    if isinstance(term, Call):
        arg = _expr_type(term.arg, env, context)
        if arg is ColumnType.TEXT:
            raise TypeMismatchError(f"{context}: {term.fn} needs a numeric argument")
        return ColumnType.DOUBLE
    if isinstance(term, Arith):
        lt = _expr_type(term.left, env, context)
        rt = _expr_type(term.right, env, context)
        for t in (lt, rt):
            if t is ColumnType.TEXT:
                raise TypeMismatchError(f"{context}: arithmetic on a string value")
        if lt is None or rt is None:
            return None
        if lt is ColumnType.DOUBLE or rt is ColumnType.DOUBLE:
            return ColumnType.DOUBLE
        return ColumnType.INTEGER
    raise TypeMismatchError(f"{context}: wildcard in an expression")


def _rule_env(rule: Rule, types: dict[str, list[Optional[ColumnType]]],
              context: str) -> dict[str, Optional[ColumnType]]:
    env: dict[str, Optional[ColumnType]] = {}
    for lit in rule.body:
        if isinstance(lit, Atom):
            pred_types = types[lit.pred]
            for i, arg in enumerate(lit.args):
                if isinstance(arg, Variable):
                    env[arg.name] = _join_types(
                        env.get(arg.name), pred_types[i],
                        f"{context}: variable {arg.name}")
        elif isinstance(lit, Assignment):
            env[lit.var.name] = _expr_type(lit.expr, env, context)
    return env


def _infer_column_names(program: Program) -> dict[str, tuple[str, ...]]:
    names: dict[str, tuple[str, ...]] = {}
    for name, schema in program.declarations:
        names[name] = schema.names
    for rule in program.rules:
        pred = rule.head.pred
        if pred in names:
            continue
        cols: list[str] = []
        seen: set[str] = set()
        for i, arg in enumerate(rule.head.args):
            if isinstance(arg, Variable) and arg.name not in seen:
                col = arg.name
            elif isinstance(arg, AggregateTerm) and arg.value.name not in seen:
                col = arg.value.name
            else:
                col = f"c{i}"
            seen.add(col)
            cols.append(col)
        names[pred] = tuple(cols)
    return names


def infer_schemas(program: Program) -> dict[str, Schema]:
    """Column names and types for every predicate (declared ones as declared)."""
    types: dict[str, list[Optional[ColumnType]]] = {}
    for name, schema in program.declarations:
        types[name] = list(schema.types)
    for rule in program.rules:
        types.setdefault(rule.head.pred, [None] * len(rule.head.args))

    changed = True
    while changed:
        changed = False
        for rule in program.rules:
            context = f"rule for {rule.head.pred!r}"
            env = _rule_env(rule, types, context)
            head_types = types[rule.head.pred]
            for i, arg in enumerate(rule.head.args):
                if isinstance(arg, AggregateTerm):
                    if arg.fn == "count":
                        t: Optional[ColumnType] = ColumnType.INTEGER
                    elif arg.fn == "avg":
                        t = ColumnType.DOUBLE
                    else:
                        t = env.get(arg.value.name)
                elif isinstance(arg, Constant):
                    t = arg.ctype
                else:  # Variable (wildcards rejected by the parser)
                    t = env.get(arg.name)
                joined = _join_types(head_types[i], t,
                                     f"{context}: argument {i}")
                if joined is not head_types[i]:
                    head_types[i] = joined
                    changed = True

    names = _infer_column_names(program)
    schemas: dict[str, Schema] = {}
    for pred, pred_types in types.items():
        resolved = tuple(t if t is not None else ColumnType.INTEGER
                         for t in pred_types)
        schemas[pred] = Schema(zip(names[pred], resolved))
    return schemas


# --- expression compilation -------------------------------------------------------

def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


_CALLS = {"sigmoid": _sigmoid}

_CMP = {"<": operator.lt, "<=": operator.le, ">": operator.gt,
        ">=": operator.ge, "==": operator.eq, "!=": operator.ne}


def _int_div(a: int, b: int) -> int:
    if b == 0:
        raise EvalError("division by zero")
    q = a // b
    if q < 0 and q * b != a:
        q += 1  # truncate toward zero
    return q


def _float_div(a: float, b: float) -> float:
    if b == 0:
        raise EvalError("division by zero")
    return a / b


def compile_expr(term, col_index: dict[str, int],
                 env: dict[str, Optional[ColumnType]],
                 context: str) -> tuple[Callable[[tuple], Value], Optional[ColumnType]]:
    """Compile an assignment expression into a row function + its type."""
    ctype = _expr_type(term, env, context)
    if isinstance(term, Constant):
        v = term.value
        return (lambda row: v), ctype
    if isinstance(term, Variable):
        if term.name not in col_index:
            raise InternalError(f"{context}: unbound variable {term.name}")
        i = col_index[term.name]
        return (lambda row: row[i]), ctype
    if isinstance(term, Call):
        arg_fn, _ = compile_expr(term.arg, col_index, env, context)
        call = _CALLS[term.fn]
        return (lambda row: call(arg_fn(row))), ctype
    # Arith
    left_fn, lt = compile_expr(term.left, col_index, env, context)
    right_fn, rt = compile_expr(term.right, col_index, env, context)
    op = term.op
    if op == "/":
        div = _int_div if ctype is ColumnType.INTEGER else _float_div
        return (lambda row: div(left_fn(row), right_fn(row))), ctype
    fn = {"+": operator.add, "-": operator.sub, "*": operator.mul}[op]
    return (lambda row: fn(left_fn(row), right_fn(row))), ctype


# --- rule compilation --------------------------------------------------------------

class _RuleCompiler:
    def __init__(self, schemas: dict[str, Schema], occurrence_counter: list[int],
                 scc: frozenset[str]):
        self.schemas = schemas
        self.counter = occurrence_counter
        self.scc = scc

    def _operand(self, term, col_index, env, context):
        if isinstance(term, Constant):
            v = term.value
            return (lambda row: v), term.ctype
        if isinstance(term, Variable):
            if term.name not in col_index:
                raise InternalError(f"{context}: unbound variable {term.name}")
            i = col_index[term.name]
            return (lambda row: row[i]), env.get(term.name)
        raise InternalError(f"{context}: unexpected operand {term!r}")

    def compile_rule(self, rule: Rule, recursive_stratum: bool,
                     minmax: dict[str, tuple[str, int]]) -> CompiledRule:
        context = f"rule for {rule.head.pred!r}"
        node: PlanNode = Unit()
        columns: list[str] = []
        env: dict[str, Optional[ColumnType]] = {}
        scc_scans: list[tuple[int, str]] = []
        xy_binding: Optional[str] = None

        for lit in rule.body:
            if isinstance(lit, Atom):
                scan, scan_env = self._compile_atom(lit, context)
                if lit.pred in self.scc:
                    scc_scans.append((scan.occurrence, lit.pred))
                    first = lit.args[0]
                    head_first = rule.head.args[0]
                    if (xy_binding is None and isinstance(first, Variable)
                            and isinstance(head_first, Variable)
                            and first.name == head_first.name):
                        xy_binding = lit.pred
                for var, t in scan_env.items():
                    env[var] = _join_types(env.get(var), t,
                                           f"{context}: variable {var}")
                if not columns:
                    node, columns = scan, list(scan.columns)
                else:
                    node, columns = self._join(node, columns, scan)
            elif isinstance(lit, Comparison):
                col_index = {c: i for i, c in enumerate(columns)}
                lf, ltype = self._operand(lit.left, col_index, env, context)
                rf, rtype = self._operand(lit.right, col_index, env, context)
                if (ltype is ColumnType.TEXT) != (rtype is ColumnType.TEXT):
                    raise TypeMismatchError(
                        f"{context}: cannot compare {ltype.value if ltype else '?'} "
                        f"with {rtype.value if rtype else '?'}")
                cmp = _CMP[lit.op]
                node = Select(node, tuple(columns),
                              (lambda row, cmp=cmp, lf=lf, rf=rf: cmp(lf(row), rf(row))))
            else:  # Assignment
                col_index = {c: i for i, c in enumerate(columns)}
                fn, ctype = compile_expr(lit.expr, col_index, env, context)
                env[lit.var.name] = ctype
                node = Compute(node, tuple(columns + [lit.var.name]), fn)
                columns.append(lit.var.name)

        head_schema = self.schemas[rule.head.pred]
        agg = rule.head.aggregate
        col_index = {c: i for i, c in enumerate(columns)}

        if agg is None:
            exprs, types = [], []
            for i, arg in enumerate(rule.head.args):
                fn, _ = self._operand(arg, col_index, env, context)
                exprs.append(fn)
                types.append(head_schema.types[i])
            root: PlanNode = Project(node, head_schema.names,
                                     tuple(exprs), tuple(types))
            return CompiledRule(rule.head.pred, root, tuple(scc_scans), xy_binding)

        agg_pos = rule.head.aggregate_index
        if agg.fn in ("sum", "min", "max", "avg"):
            if env.get(agg.value.name) is ColumnType.TEXT:
                raise TypeMismatchError(
                    f"{context}: {agg.fn} needs a numeric value column")

        if recursive_stratum and agg.fn in ("min", "max"):
            # running-best candidates: project the head layout directly
            exprs, types = [], []
            for i, arg in enumerate(rule.head.args):
                term = agg.value if isinstance(arg, AggregateTerm) else arg
                fn, _ = self._operand(term, col_index, env, context)
                exprs.append(fn)
                types.append(head_schema.types[i])
            root = Project(node, head_schema.names, tuple(exprs), tuple(types))
            return CompiledRule(rule.head.pred, root, tuple(scc_scans), xy_binding)

        # grouped aggregate: project (group..., witnesses..., value), then fold
        group_terms = [a for a in rule.head.args if not isinstance(a, AggregateTerm)]
        contrib_terms = group_terms + list(agg.witnesses) + [agg.value]
        exprs = []
        for term in contrib_terms:
            fn, _ = self._operand(term, col_index, env, context)
            exprs.append(fn)
        contrib = Project(node, tuple(f"x{i}" for i in range(len(exprs))),
                          tuple(exprs), None)  # type: ignore[arg-type]
        root = Aggregate(contrib, head_schema.names, len(group_terms),
                         agg.fn, agg_pos, head_schema.types)
        return CompiledRule(rule.head.pred, root, tuple(scc_scans), xy_binding)

    def _compile_atom(self, atom: Atom, context: str) -> tuple[Scan, dict[str, Optional[ColumnType]]]:
        schema = self.schemas[atom.pred]
        out_cols: list[str] = []
        out_idx: list[int] = []
        const_checks: list[tuple[int, Value]] = []
        eq_checks: list[tuple[int, int]] = []
        first_seen: dict[str, int] = {}
        env: dict[str, Optional[ColumnType]] = {}
        for i, arg in enumerate(atom.args):
            if isinstance(arg, Wildcard):
                continue
            if isinstance(arg, Constant):
                if (arg.ctype is ColumnType.TEXT) != (schema.types[i] is ColumnType.TEXT):
                    raise TypeMismatchError(
                        f"{context}: constant {arg.value!r} does not match "
                        f"{atom.pred!r} column {i} ({schema.types[i].value})")
                const_checks.append((i, arg.value))
                continue
            name = arg.name
            if name in first_seen:
                eq_checks.append((first_seen[name], i))
            else:
                first_seen[name] = i
                out_cols.append(name)
                out_idx.append(i)
                env[name] = schema.types[i]
        self.counter[0] += 1
        scan = Scan(atom.pred, self.counter[0], tuple(out_cols), tuple(out_idx),
                    tuple(const_checks), tuple(eq_checks))
        return scan, env

    @staticmethod
    def _join(left: PlanNode, left_cols: list[str], right: Scan) -> tuple[PlanNode, list[str]]:
        shared = [c for c in right.columns if c in left_cols]
        left_key_idx = tuple(left_cols.index(c) for c in shared)
        right_key_idx = tuple(right.columns.index(c) for c in shared)
        right_keep = [i for i, c in enumerate(right.columns) if c not in shared]
        out_cols = left_cols + [right.columns[i] for i in right_keep]
        node = Join(left, right, tuple(out_cols), left_key_idx, right_key_idx,
                    tuple(right_keep))
        return node, out_cols


def compile_program(program: Program,
                    stratification: Optional[Stratification] = None) -> CompiledProgram:
    """Compile every stratum, in evaluation order. Declared strata are implicit."""
    strat = stratification or analyze(program)
    schemas = infer_schemas(program)
    declared = program.declared
    counter = [0]
    strata: list[CompiledStratum] = []
    for comp in strat.strata:
        preds = tuple(sorted(comp))
        if all(p in declared for p in preds):
            continue
        recursive = strat.is_recursive(preds[0])
        rules = [r for r in program.rules if r.head.pred in comp]
        # running-best bookkeeping for min/max inside recursion
        minmax: dict[str, tuple[str, int]] = {}
        if recursive:
            for rule in rules:
                agg = rule.head.aggregate
                if agg is not None and agg.fn in ("min", "max"):
                    minmax[rule.head.pred] = (agg.fn, rule.head.aggregate_index)
        rc = _RuleCompiler(schemas, counter, comp if recursive else frozenset())
        compiled = [rc.compile_rule(r, recursive, minmax) for r in rules]
        if not recursive:
            strata.append(CompiledStratum(preds, False, compiled))
            continue
        exit_rules, rec_rules, xy_rules = [], [], []
        for rule, crule in zip(rules, compiled):
            agg = rule.head.aggregate
            if agg is not None and agg.fn in ("sum", "count") and crule.scc_scans:
                xy_rules.append(crule)
            elif crule.scc_scans:
                rec_rules.append(crule)
            else:
                exit_rules.append(crule)
        node = Recursion(preds, exit_rules, rec_rules, xy_rules, minmax,
                         dict(strat.xy_order))
        strata.append(CompiledStratum(preds, True, node))
    edb_schemas = {name: schema for name, schema in program.declarations}
    return CompiledProgram(program, strat, strata, edb_schemas, schemas)


# --- aggregation -----------------------------------------------------------------

def fold_aggregate(rows: Iterable[tuple], n_group: int, fn: str) -> dict[tuple, Value]:
    """Fold deduplicated contribution rows (group..., witness..., value).

    Rows are processed in sorted order so float accumulation is deterministic.
    """
    groups: dict[tuple, list] = {}
    for row in sorted(rows, key=lambda r: r[:n_group]) if fn == "count" \
            else sorted(rows):
        key = row[:n_group]
        value = row[-1]
        acc = groups.get(key)
        if acc is None:
            groups[key] = [value, 1]
        elif fn == "count":
            acc[1] += 1
        else:
            acc[0] = (acc[0] + value if fn in ("sum", "avg")
                      else (min(acc[0], value) if fn == "min" else max(acc[0], value)))
            acc[1] += 1
    out: dict[tuple, Value] = {}
    for key, (folded, count) in groups.items():
        if fn == "count":
            out[key] = count
        elif fn == "avg":
            out[key] = folded / count
        else:
            out[key] = folded
    return out


def eval_aggregate(columns: Sequence[str], rows: Iterable[tuple],
                   group_by: Sequence[str], fn: str,
                   witnesses: Sequence[str], value: str) -> set[tuple]:
    """Group ``rows`` and fold; returns (group values..., aggregate) tuples.

    The contribution set is deduplicated on group ∪ witnesses ∪ value first,
    so equal values from distinct witnesses count separately.
    """
    if fn not in ("sum", "count", "min", "max", "avg"):
        raise EvalError(f"unknown aggregate function {fn!r}")
    idx = {c: i for i, c in enumerate(columns)}
    take = [idx[c] for c in (*group_by, *witnesses, value)]
    contrib = {tuple(row[i] for i in take) for row in rows}
    if fn in ("sum", "min", "max", "avg"):
        for row in contrib:
            if isinstance(row[-1], str):
                raise TypeMismatchError(f"{fn} needs a numeric value column")
    folded = fold_aggregate(contrib, len(group_by), fn)
    return {key + (v,) for key, v in folded.items()}


# --- plan evaluation ----------------------------------------------------------------

class _Ctx:
    __slots__ = ("rels", "overrides")

    def __init__(self, rels: dict[str, frozenset], overrides: dict[int, Iterable[tuple]]):
        self.rels = rels
        self.overrides = overrides


def _coerce_out(value: Value, ctype: ColumnType) -> Value:
    if ctype is ColumnType.DOUBLE:
        if isinstance(value, int):
            value = float(value)
        if math.isnan(value):
            raise EvalError("NaN produced by arithmetic")
        return 0.0 if value == 0.0 else value
    return value


def eval_node(node: PlanNode, ctx: _Ctx) -> set[tuple]:
    if isinstance(node, Unit):
        return {()}
    if isinstance(node, Scan):
        rows = ctx.overrides.get(node.occurrence)
        if rows is None:
            try:
                rows = ctx.rels[node.relation]
            except KeyError:
                raise MissingRelationError(
                    f"relation {node.relation!r} is not available") from None
        out = set()
        const_checks, eq_checks, out_idx = node.const_checks, node.eq_checks, node.out_idx
        for row in rows:
            if any(row[i] != v for i, v in const_checks):
                continue
            if any(row[i] != row[j] for i, j in eq_checks):
                continue
            out.add(tuple(row[i] for i in out_idx))
        return out
    if isinstance(node, Join):
        left = eval_node(node.left, ctx)
        right = eval_node(node.right, ctx)
        lk, rk, keep = node.left_key_idx, node.right_key_idx, node.right_keep_idx
        table: dict[tuple, list] = {}
        for row in left:
            table.setdefault(tuple(row[i] for i in lk), []).append(row)
        out = set()
        for rrow in right:
            bucket = table.get(tuple(rrow[i] for i in rk))
            if bucket:
                tail = tuple(rrow[i] for i in keep)
                for lrow in bucket:
                    out.add(lrow + tail)
        return out
    if isinstance(node, Select):
        return {row for row in eval_node(node.child, ctx) if node.test(row)}
    if isinstance(node, Compute):
        return {row + (node.fn(row),) for row in eval_node(node.child, ctx)}
    if isinstance(node, Project):
        exprs, types = node.exprs, node.types
        if types is None:
            return {tuple(f(row) for f in exprs)
                    for row in eval_node(node.child, ctx)}
        return {tuple(_coerce_out(f(row), t) for f, t in zip(exprs, types))
                for row in eval_node(node.child, ctx)}
    if isinstance(node, Aggregate):
        contrib = eval_node(node.child, ctx)
        folded = fold_aggregate(contrib, node.n_group, node.fn)
        out = set()
        for key, v in folded.items():
            head = key[:node.agg_pos] + (v,) + key[node.agg_pos:]
            out.add(tuple(_coerce_out(x, t) for x, t in zip(head, node.types)))
        return out
    if isinstance(node, UnionAll):
        out: set[tuple] = set()
        for child in node.children:
            out |= eval_node(child, ctx)
        return out
    raise InternalError(f"unknown plan node {node!r}")


# --- fixpoint evaluation -------------------------------------------------------------

class _RunningBest:
    """Keeps the best row per group for a min/max predicate."""

    def __init__(self, fn: str, value_pos: int):
        self.better = operator.lt if fn == "min" else operator.gt
        self.value_pos = value_pos
        self.by_group: dict[tuple, tuple] = {}

    def offer(self, row: tuple) -> Optional[tuple]:
        """Returns the replaced row (or None) if ``row`` improves; ``row``
        itself if it does not win."""
        vp = self.value_pos
        key = row[:vp] + row[vp + 1:]
        cur = self.by_group.get(key)
        if cur is None:
            self.by_group[key] = row
            return None
        if self.better(row[vp], cur[vp]):
            self.by_group[key] = row
            return cur
        return row


class _FixpointState:
    def __init__(self, rec: Recursion):
        self.rec = rec
        self.total: dict[str, set[tuple]] = {p: set() for p in rec.preds}
        self.best = {p: _RunningBest(fn, pos)
                     for p, (fn, pos) in rec.minmax.items()}
        self.emitted: dict[str, set] = {r.pred: set() for r in rec.xy_rules}

    def integrate(self, derived: list[tuple[str, set[tuple]]]) -> dict[str, set[tuple]]:
        """Fold derived rows into the totals; returns the per-predicate delta."""
        new: dict[str, set[tuple]] = {p: set() for p in self.rec.preds}
        for pred, rows in derived:
            best = self.best.get(pred)
            if best is None:
                fresh = rows - self.total[pred]
                self.total[pred] |= fresh
                new[pred] |= fresh
            else:
                for row in sorted(rows):
                    loser = best.offer(row)
                    if loser is row:
                        continue
                    if loser is not None:
                        self.total[pred].discard(loser)
                        new[pred].discard(loser)
                    self.total[pred].add(row)
                    new[pred].add(row)
        return new

    def size(self) -> int:
        return sum(len(rows) for rows in self.total.values())


def _eval_recursion(rec: Recursion, rels: dict[str, frozenset], limits: Limits,
                    naive: bool) -> tuple[dict[str, set[tuple]], StratumStats]:
    state = _FixpointState(rec)
    base_rows = sum(len(r) for r in rels.values())

    def derive_exit() -> list[tuple[str, set[tuple]]]:
        ctx = _Ctx(rels, {})
        return [(r.pred, eval_node(r.root, ctx)) for r in rec.exit_rules]

    def derive_seminaive(delta: dict[str, set[tuple]]) -> list[tuple[str, set[tuple]]]:
        out = []
        for rule in rec.rec_rules:
            for occ, pred in rule.scc_scans:
                if not delta[pred]:
                    continue
                overrides = {o: state.total[p] for o, p in rule.scc_scans}
                overrides[occ] = delta[pred]
                out.append((rule.pred, eval_node(rule.root, _Ctx(rels, overrides))))
        return out

    def derive_naive() -> list[tuple[str, set[tuple]]]:
        out = [(r.pred, eval_node(r.root, _Ctx(rels, {}))) for r in rec.exit_rules]
        for rule in rec.rec_rules:
            overrides = {o: state.total[p] for o, p in rule.scc_scans}
            out.append((rule.pred, eval_node(rule.root, _Ctx(rels, overrides))))
        return out

    def pending_xy() -> Optional[tuple[str, Value]]:
        candidates = []
        for rule in rec.xy_rules:
            keys = {row[0] for row in state.total[rule.xy_binding]}
            keys -= state.emitted[rule.pred]
            if keys:
                candidates.append((min(keys), rec.xy_order.get(rule.pred, 0),
                                   rule.pred))
        if not candidates:
            return None
        key, _, pred = min(candidates)
        return pred, key

    def fire_xy(pred: str, key: Value) -> set[tuple]:
        rows: set[tuple] = set()
        for rule in rec.xy_rules:
            if rule.pred != pred:
                continue
            overrides = {
                o: {row for row in state.total[p] if row[0] == key
                    or _is_prev_key(row[0], key)}
                for o, p in rule.scc_scans}
            rows |= {row for row in eval_node(rule.root, _Ctx(rels, overrides))
                     if row[0] == key}
        state.emitted[pred].add(key)
        return rows

    started = time.perf_counter()
    derived = derive_exit()
    evaluated = sum(len(rows) for _, rows in derived)
    delta = state.integrate(derived)
    iterations = 1
    delta_history = [sum(len(d) for d in delta.values())]
    evaluated_history = [evaluated]

    def bump_iterations():
        nonlocal iterations
        iterations += 1
        if iterations > limits.max_iterations:
            raise LimitExceededError(
                f"fixpoint did not settle within max_iterations="
                f"{limits.max_iterations}", limit="max_iterations")

    while True:
        limits.check_deadline()
        if base_rows + state.size() > limits.max_rows:
            raise LimitExceededError(
                f"database exceeded max_rows={limits.max_rows}", limit="max_rows")
        derived = derive_naive() if naive else derive_seminaive(delta)
        evaluated = sum(len(rows) for _, rows in derived)
        new = state.integrate(derived)
        if any(new.values()):
            bump_iterations()
            delta = new
            delta_history.append(sum(len(d) for d in new.values()))
            evaluated_history.append(evaluated)
            continue
        evaluated_history.append(evaluated)
        target = pending_xy()
        if target is None:
            break
        pred, key = target
        rows = fire_xy(pred, key)
        fresh = rows - state.total[pred]
        delta = {p: set() for p in rec.preds}
        if fresh:
            state.total[pred] |= fresh
            delta[pred] = fresh
            bump_iterations()
            delta_history.append(len(fresh))
            evaluated_history.append(len(rows))

    stats = StratumStats(rec.preds, True, iterations, delta_history,
                         evaluated_history, time.perf_counter() - started)
    return state.total, stats


def _is_prev_key(candidate: Value, key: Value) -> bool:
    try:
        return candidate == key - 1  # type: ignore[operator]
    except TypeError:
        return False


# --- whole-program evaluation ---------------------------------------------------------

def _materialize(pred: str, rows: set[tuple], schema: Schema) -> Relation:
    return Relation(schema, frozenset(rows))


def evaluate(plans: CompiledProgram, db: Database,
             limits: Optional[Limits] = None, *,
             naive: bool = False) -> tuple[Database, EvalStats]:
    """Extend ``db`` with every derived relation materialized to fixpoint."""
    limits = limits or Limits()
    started = time.perf_counter()
    out: Database = dict(db)
    for name, schema in plans.edb_schemas.items():
        if name not in out:
            raise MissingRelationError(
                f"declared relation {name!r} is missing from the database")
        out[name] = coerce_relation(out[name], schema)

    rels: dict[str, frozenset] = {name: rel.rows for name, rel in out.items()}
    stats = EvalStats()
    for stratum in plans.strata:
        limits.check_deadline()
        t0 = time.perf_counter()
        if stratum.recursive:
            totals, st_stats = _eval_recursion(stratum.node, rels, limits, naive)
            for pred, rows in totals.items():
                rel = _materialize(pred, rows, plans.schemas[pred])
                out[pred] = rel
                rels[pred] = rel.rows
            stats.strata.append(st_stats)
        else:
            ctx = _Ctx(rels, {})
            rows: set[tuple] = set()
            evaluated = 0
            for crule in stratum.node:
                derived = eval_node(crule.root, ctx)
                evaluated += len(derived)
                rows |= derived
            pred = stratum.preds[0]
            rel = _materialize(pred, rows, plans.schemas[pred])
            out[pred] = rel
            rels[pred] = rel.rows
            stats.strata.append(StratumStats(
                stratum.preds, False, 0, [len(rows)], [evaluated],
                time.perf_counter() - t0))
        if sum(len(r) for r in rels.values()) > limits.max_rows:
            raise LimitExceededError(
                f"database exceeded max_rows={limits.max_rows}", limit="max_rows")
    for pred in plans.schemas:
        if pred in out and pred not in plans.edb_schemas:
            stats.rows_produced[pred] = len(out[pred])
    stats.elapsed_s = time.perf_counter() - started
    return out, stats


def evaluate_naive(plans: CompiledProgram, db: Database,
                   limits: Optional[Limits] = None) -> tuple[Database, EvalStats]:
    """Baseline fixpoint: every round recomputes all rules from the totals.

    Produces a database identical to ``evaluate``'s.
    """
    return evaluate(plans, db, limits, naive=True)


def query_relation(program: Program, schemas: dict[str, Schema],
                   db: Database) -> Optional[Relation]:
    """Apply the query directive (filter constants / repeated variables,
    project variable positions, name columns after the query variables)."""
    atom = program.query
    if atom is None:
        return None
    rel = db[atom.pred]
    out_cols: list[tuple[str, ColumnType]] = []
    out_idx: list[int] = []
    const_checks: list[tuple[int, Value]] = []
    eq_checks: list[tuple[int, int]] = []
    seen: dict[str, int] = {}
    for i, arg in enumerate(atom.args):
        if isinstance(arg, Wildcard):
            continue
        if isinstance(arg, Constant):
            const_checks.append((i, arg.value))
            continue
        if arg.name in seen:
            eq_checks.append((seen[arg.name], i))
            continue
        seen[arg.name] = i
        out_idx.append(i)
        out_cols.append((arg.name, rel.schema.types[i]))
    rows = set()
    for row in rel.rows:
        if any(row[i] != v for i, v in const_checks):
            continue
        if any(row[i] != row[j] for i, j in eq_checks):
            continue
        rows.add(tuple(row[i] for i in out_idx))
    return Relation(Schema(out_cols), frozenset(rows))


@dataclass
class RunResult:
    program: Program
    compiled: CompiledProgram
    database: Database
    stats: EvalStats
    result: Optional[Relation]


def run_program(text: str, db: Database, limits: Optional[Limits] = None, *,
                naive: bool = False) -> RunResult:
    """Parse, analyze, compile, evaluate and extract the query relation."""
    program = parse_program(text)
    compiled = compile_program(program)
    out, stats = evaluate(compiled, db, limits, naive=naive)
    result = query_relation(program, compiled.schemas, out)
    return RunResult(program, compiled, out, stats, result)
