"""Dependency analysis: recursion detection, stratification, aggregate placement.

Predicates are stratified by condensing the dependency graph into strongly
connected components and ordering those topologically. A stratum is recursive
iff its SCC has a cycle (a self-loop counts).

Aggregates inside a recursive SCC are restricted:

  * ``min``/``max`` heads are always allowed; they are evaluated with
    running-best semantics by the engine.
  * ``sum``/``count`` heads need an iteration key: argument 0 of every
    predicate in the SCC must act as a monotonically increasing round counter.
    Concretely, for every rule of the SCC, the head's first argument must be a
    variable J that each same-SCC body atom either passes through unchanged
    (its own argument 0 is the same J) or advances by exactly one through an
    assignment ``J1 = J + 1``. Additionally the "unchanged" edges alone must
    be acyclic, so every loop advances the key. The engine then evaluates a
    keyed aggregate for round j once nothing at round j can change anymore.
  * ``avg`` is never allowed in a recursive SCC.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import (
    UndefinedPredicateError,
    UnknownPredicateError,
    UnstratifiableAggregateError,
)
from .parser import Arith, Assignment, Atom, Constant, Program, Rule, Variable


@dataclass(frozen=True)
class DependencyGraph:
    """Edges head -> body predicate; kind is "aggregate" when the rule's head
    carries an aggregate term, "plain" otherwise."""

    nodes: frozenset[str]
    edges: frozenset[tuple[str, str, str]]

    def successors(self, pred: str) -> set[str]:
        return {b for a, b, _ in self.edges if a == pred}


@dataclass
class Stratification:
    strata: tuple[frozenset[str], ...]
    recursive: dict[str, bool]
    xy_key: dict[str, int]  # aggregated predicate -> key argument index
    xy_order: dict[str, int] = field(default_factory=dict)  # firing order within SCC
    graph: Optional[DependencyGraph] = None

    def stratum_of(self, pred: str) -> int:
        for i, s in enumerate(self.strata):
            if pred in s:
                return i
        raise UnknownPredicateError(f"predicate {pred!r} was not analyzed")

    def is_recursive(self, pred: str) -> bool:
        if pred not in self.recursive:
            raise UnknownPredicateError(f"predicate {pred!r} was not analyzed")
        return self.recursive[pred]


def is_recursive(strat: Stratification, pred: str) -> bool:
    return strat.is_recursive(pred)


def build_dependency_graph(program: Program) -> DependencyGraph:
    nodes = set(program.declared)
    nodes.update(r.head.pred for r in program.rules)
    edges = set()
    for rule in program.rules:
        kind = "aggregate" if rule.head.aggregate is not None else "plain"
        for lit in rule.body:
            if isinstance(lit, Atom):
                if lit.pred not in nodes:
                    line, col = lit.pos or (None, None)
                    raise UndefinedPredicateError(
                        f"predicate {lit.pred!r} is neither declared nor "
                        "defined by a rule", line=line, column=col)
                edges.add((rule.head.pred, lit.pred, kind))
    return DependencyGraph(frozenset(nodes), frozenset(edges))


def strongly_connected_components(nodes, successors) -> list[list]:
    """Tarjan's algorithm, iterative; emits SCCs in reverse topological order."""
    index: dict = {}
    lowlink: dict = {}
    on_stack: set = set()
    stack: list = []
    result: list[list] = []
    counter = [0]

    for root in sorted(nodes):
        if root in index:
            continue
        work = [(root, iter(sorted(successors(root))))]
        index[root] = lowlink[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for succ in it:
                if succ not in index:
                    index[succ] = lowlink[succ] = counter[0]
                    counter[0] += 1
                    stack.append(succ)
                    on_stack.add(succ)
                    work.append((succ, iter(sorted(successors(succ)))))
                    advanced = True
                    break
                if succ in on_stack:
                    lowlink[node] = min(lowlink[node], index[succ])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[node])
            if lowlink[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == node:
                        break
                result.append(comp)
    return result


def _head_key_var(rule: Rule) -> Optional[str]:
    """Variable name at the head's key position (argument 0), or None."""
    first = rule.head.args[0]
    return first.name if isinstance(first, Variable) else None


def _increments(rule: Rule, head_var: str) -> Optional[str]:
    """If the body assigns ``head_var = X + 1``, return X's name."""
    for lit in rule.body:
        if isinstance(lit, Assignment) and lit.var.name == head_var:
            e = lit.expr
            if (isinstance(e, Arith) and e.op == "+"):
                pairs = ((e.left, e.right), (e.right, e.left))
                for var_side, const_side in pairs:
                    if (isinstance(var_side, Variable)
                            and isinstance(const_side, Constant)
                            and const_side.value == 1):
                        return var_side.name
    return None


def _check_xy_scc(scc: set[str], rules: list[Rule]) -> tuple[dict[str, int], dict[str, int]]:
    """Validate the iteration-key discipline for an SCC containing sum/count.

    Returns (xy_key for aggregated predicates, firing order for all SCC preds).
    """
    preserving_edges: set[tuple[str, str]] = set()
    xy_key: dict[str, int] = {}
    for rule in rules:
        scc_atoms = [l for l in rule.body if isinstance(l, Atom) and l.pred in scc]
        agg = rule.head.aggregate
        is_keyed_agg = agg is not None and agg.fn in ("sum", "count")
        if is_keyed_agg:
            if rule.head.aggregate_index == 0:
                raise UnstratifiableAggregateError(
                    f"recursive {agg.fn} on {rule.head.pred!r}: the first head "
                    "argument must be a plain iteration-key variable")
            if not scc_atoms:
                raise UnstratifiableAggregateError(
                    f"recursive {agg.fn} on {rule.head.pred!r}: every rule of an "
                    "iteration-keyed predicate must reference its own component")
            xy_key[rule.head.pred] = 0
        if not scc_atoms:
            continue  # exit rule: no key constraints
        head_var = _head_key_var(rule)
        if head_var is None:
            raise UnstratifiableAggregateError(
                f"rule for {rule.head.pred!r}: recursive components with "
                "sum/count need a key variable as the first head argument")
        inc_source = _increments(rule, head_var)
        preserving_binding = False
        for atom in scc_atoms:
            first = atom.args[0]
            body_var = first.name if isinstance(first, Variable) else None
            if body_var == head_var:
                preserving_binding = True
                preserving_edges.add((rule.head.pred, atom.pred))
            elif body_var is not None and body_var == inc_source:
                pass  # reads the already-completed previous round
            else:
                raise UnstratifiableAggregateError(
                    f"rule for {rule.head.pred!r}: argument 0 of "
                    f"{atom.pred!r} neither preserves nor increments the "
                    "iteration key")
        if is_keyed_agg and not preserving_binding:
            raise UnstratifiableAggregateError(
                f"recursive {agg.fn} on {rule.head.pred!r}: the key must be "
                "bound unchanged by a same-component body atom")
    # within one key value, dependencies must be acyclic so each round closes
    order: dict[str, int] = {}
    remaining = set(scc)
    while remaining:
        ready = sorted(p for p in remaining
                       if not any(a == p and b in remaining and a != b
                                  for a, b in preserving_edges))
        if not ready:
            raise UnstratifiableAggregateError(
                "recursive sum/count: key-preserving dependencies form a cycle, "
                "so no iteration ever completes")
        for p in ready:
            order[p] = len(order)
            remaining.discard(p)
    # self-loops on preserving edges also keep a round open forever
    for a, b in preserving_edges:
        if a == b:
            raise UnstratifiableAggregateError(
                f"recursive sum/count: {a!r} feeds itself without advancing "
                "the iteration key")
    return xy_key, order


def analyze(program: Program) -> Stratification:
    """Stratify ``program`` and validate aggregate placement."""
    graph = build_dependency_graph(program)
    comps = strongly_connected_components(graph.nodes, graph.successors)
    strata = tuple(frozenset(c) for c in comps)  # reverse topo = evaluation order

    self_loops = {a for a, b, _ in graph.edges if a == b}
    recursive = {}
    for comp in strata:
        is_rec = len(comp) > 1 or (next(iter(comp)) in self_loops)
        for pred in comp:
            recursive[pred] = is_rec

    xy_key: dict[str, int] = {}
    xy_order: dict[str, int] = {}
    for comp in strata:
        comp_rules = [r for r in program.rules if r.head.pred in comp]
        if not recursive[next(iter(comp))]:
            continue
        fns_by_pred: dict[str, set[str]] = {}
        for rule in comp_rules:
            agg = rule.head.aggregate
            if agg is None:
                continue
            if agg.fn == "avg":
                raise UnstratifiableAggregateError(
                    f"avg on {rule.head.pred!r} is not allowed inside a "
                    "recursive component")
            fns_by_pred.setdefault(rule.head.pred, set()).add(agg.fn)
        for pred, fns in fns_by_pred.items():
            if len(fns) > 1:
                raise UnstratifiableAggregateError(
                    f"{pred!r} mixes aggregate functions {sorted(fns)} inside "
                    "one recursive component")
        all_fns = set().union(*fns_by_pred.values()) if fns_by_pred else set()
        if all_fns & {"sum", "count"}:
            if all_fns & {"min", "max"}:
                raise UnstratifiableAggregateError(
                    "a recursive component cannot mix min/max with sum/count")
            keys, order = _check_xy_scc(set(comp), comp_rules)
            xy_key.update(keys)
            xy_order.update(order)
        if all_fns & {"min", "max"}:
            for rule in comp_rules:
                agg = rule.head.aggregate
                if (rule.head.pred in fns_by_pred and agg is None
                        and any(isinstance(l, Atom) and l.pred in comp
                                for l in rule.body)):
                    raise UnstratifiableAggregateError(
                        f"{rule.head.pred!r} mixes aggregated and plain "
                        "recursive rules")

    return Stratification(strata, recursive, xy_key, xy_order, graph)
