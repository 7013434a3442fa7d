"""Datalog dialect: AST, tokenizer, recursive-descent parser and formatter.

The dialect:

    database({ arc(From: integer, To: integer) }).
    tc(From,To) <- arc(From,To).
    tc(From,To) <- tc(From,Tmp), arc(Tmp,To).
    query tc(From, To).

Variables start uppercase, predicates lowercase, ``_`` is a wildcard.
Rule heads may carry one aggregate term ``sum<W1, .., V>`` (sum, count, min,
max, avg) whose last element is the aggregated value and the rest witness
variables. Bodies may contain comparisons (``< <= > >= == !=``) and
assignments (``X1 = X + 1``); assignment expressions use + - * / with the
usual precedence, plus a small set of built-in unary functions (``sigmoid``).
``%`` starts a line comment. Both ``<-`` and ``:-`` are accepted as the rule
arrow.

``parse_program`` performs all program-level validation: consistent arities,
declared (input) relations never being rule heads, aggregate placement, and
rule safety. ``format_program`` renders a Program back to text such that
parsing the output yields a structurally equal AST.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .errors import (
    ArityError,
    DatalogSyntaxError,
    DeclConflictError,
    SafetyError,
    UndefinedPredicateError,
)
from .relation import ColumnType, Schema

AGGREGATE_FNS = ("sum", "count", "min", "max", "avg")
BUILTIN_FNS = ("sigmoid",)
COMPARE_OPS = ("<", "<=", ">", ">=", "==", "!=")


# --- AST ----------------------------------------------------------------------
# ``pos`` fields are (line, column) and excluded from equality so that
# parse(format(p)) == p can hold structurally.

def _pos_field():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Variable:
    name: str
    pos: Optional[tuple[int, int]] = _pos_field()


@dataclass(frozen=True)
class Constant:
    value: Union[int, float, str]
    pos: Optional[tuple[int, int]] = _pos_field()

    @property
    def ctype(self) -> ColumnType:
        if isinstance(self.value, int):
            return ColumnType.INTEGER
        if isinstance(self.value, float):
            return ColumnType.DOUBLE
        return ColumnType.TEXT


@dataclass(frozen=True)
class Wildcard:
    pos: Optional[tuple[int, int]] = _pos_field()


@dataclass(frozen=True)
class Arith:
    op: str  # + - * /
    left: "Term"
    right: "Term"
    pos: Optional[tuple[int, int]] = _pos_field()


@dataclass(frozen=True)
class Call:
    fn: str  # one of BUILTIN_FNS
    arg: "Term"
    pos: Optional[tuple[int, int]] = _pos_field()


Term = Union[Variable, Constant, Wildcard, Arith, Call]


@dataclass(frozen=True)
class AggregateTerm:
    fn: str  # one of AGGREGATE_FNS
    witnesses: tuple[Variable, ...]
    value: Variable
    pos: Optional[tuple[int, int]] = _pos_field()


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple[Union[Term, AggregateTerm], ...]
    pos: Optional[tuple[int, int]] = _pos_field()

    @property
    def aggregate(self) -> Optional[AggregateTerm]:
        for a in self.args:
            if isinstance(a, AggregateTerm):
                return a
        return None

    @property
    def aggregate_index(self) -> Optional[int]:
        for i, a in enumerate(self.args):
            if isinstance(a, AggregateTerm):
                return i
        return None


@dataclass(frozen=True)
class Comparison:
    op: str  # one of COMPARE_OPS
    left: Term
    right: Term
    pos: Optional[tuple[int, int]] = _pos_field()


@dataclass(frozen=True)
class Assignment:
    var: Variable
    expr: Term
    pos: Optional[tuple[int, int]] = _pos_field()


Literal = Union[Atom, Comparison, Assignment]


@dataclass(frozen=True)
class Rule:
    head: Atom
    body: tuple[Literal, ...] = ()
    pos: Optional[tuple[int, int]] = _pos_field()

    @property
    def is_fact(self) -> bool:
        return not self.body


@dataclass(frozen=True)
class Program:
    declarations: tuple[tuple[str, Schema], ...] = ()
    rules: tuple[Rule, ...] = ()
    query: Optional[Atom] = None

    @property
    def declared(self) -> dict[str, Schema]:
        return dict(self.declarations)

    def rules_for(self, pred: str) -> list[Rule]:
        return [r for r in self.rules if r.head.pred == pred]


# --- tokenizer ------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>%[^\n]*)
  | (?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<lident>[a-z][A-Za-z0-9_]*)
  | (?P<uident>[A-Z][A-Za-z0-9_]*)
  | (?P<string>"(?:\\.|[^"\\\n])*")
  | (?P<op><-|:-|<=|>=|==|!=|[(){},.<>=+\-*/_:])
""", re.VERBOSE)

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\"}
_UNESCAPES = {v: "\\" + k for k, v in _ESCAPES.items() if v not in ('"',)}


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise DatalogSyntaxError(
                f"unexpected character {text[i]!r}", line=line, column=col)
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(_Token(kind, chunk, line, col))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        i = m.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens


def _unquote(text: str, line: int, col: int) -> str:
    out = []
    i = 1
    while i < len(text) - 1:
        ch = text[i]
        if ch == "\\":
            esc = text[i + 1]
            if esc not in _ESCAPES:
                raise DatalogSyntaxError(
                    f"unknown escape \\{esc}", line=line, column=col)
            out.append(_ESCAPES[esc])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


# --- parser ---------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        t = self.tok
        self.i += 1
        return t

    def error(self, expected: Iterable[str]) -> DatalogSyntaxError:
        t = self.tok
        got = t.text or "end of input"
        exp = tuple(expected)
        return DatalogSyntaxError(
            f"unexpected {got!r}, expected one of: {', '.join(exp)}",
            line=t.line, column=t.col, expected=exp)

    def expect(self, text: str) -> _Token:
        if self.tok.text != text or self.tok.kind == "eof":
            raise self.error((text,))
        return self.advance()

    def at(self, text: str) -> bool:
        return self.tok.kind != "eof" and self.tok.text == text

    # program := {decl | rule | query} ;
    def parse_program(self) -> Program:
        declarations: list[tuple[str, Schema]] = []
        rules: list[Rule] = []
        query: Optional[Atom] = None
        while self.tok.kind != "eof":
            if (self.tok.kind == "lident" and self.tok.text == "database"
                    and self.i + 2 < len(self.tokens)
                    and self.tokens[self.i + 1].text == "("
                    and self.tokens[self.i + 2].text == "{"):
                declarations.extend(self.parse_decl())
            elif self.tok.kind == "lident" and self.tok.text == "query":
                nxt = self.tokens[self.i + 1]
                if nxt.kind == "lident":  # "query" is also a legal predicate name
                    if query is not None:
                        raise DatalogSyntaxError(
                            "duplicate query directive",
                            line=self.tok.line, column=self.tok.col)
                    self.advance()
                    query = self.parse_atom(allow_aggregates=False)
                    self.expect(".")
                else:
                    rules.append(self.parse_rule())
            elif self.tok.kind == "lident":
                rules.append(self.parse_rule())
            else:
                raise self.error(("database", "query", "a rule"))
        return Program(tuple(declarations), tuple(rules), query)

    def parse_decl(self) -> list[tuple[str, Schema]]:
        self.expect("database")
        self.expect("(")
        self.expect("{")
        decls = [self.parse_reldecl()]
        while self.at(","):
            self.advance()
            decls.append(self.parse_reldecl())
        self.expect("}")
        self.expect(")")
        self.expect(".")
        return decls

    def parse_reldecl(self) -> tuple[str, Schema]:
        if self.tok.kind != "lident":
            raise self.error(("relation name",))
        name = self.advance().text
        self.expect("(")
        cols = [self.parse_coldecl()]
        while self.at(","):
            self.advance()
            cols.append(self.parse_coldecl())
        self.expect(")")
        return name, Schema(cols)

    def parse_coldecl(self) -> tuple[str, ColumnType]:
        if self.tok.kind != "uident":
            raise self.error(("column name",))
        col = self.advance().text
        self.expect(":")
        for type_name, ctype in (("integer", ColumnType.INTEGER),
                                 ("double", ColumnType.DOUBLE),
                                 ("string", ColumnType.TEXT)):
            if self.tok.kind == "lident" and self.tok.text == type_name:
                self.advance()
                return col, ctype
        raise self.error(("integer", "double", "string"))

    def parse_rule(self) -> Rule:
        start = self.tok
        head = self.parse_atom(allow_aggregates=True)
        body: list[Literal] = []
        if self.at("<-") or self.at(":-"):
            self.advance()
            body.append(self.parse_literal())
            while self.at(","):
                self.advance()
                body.append(self.parse_literal())
        self.expect(".")
        return Rule(head, tuple(body), pos=(start.line, start.col))

    def parse_atom(self, allow_aggregates: bool) -> Atom:
        if self.tok.kind != "lident":
            raise self.error(("predicate name",))
        t = self.advance()
        self.expect("(")
        args: list[Union[Term, AggregateTerm]] = [self.parse_hterm(allow_aggregates)]
        while self.at(","):
            self.advance()
            args.append(self.parse_hterm(allow_aggregates))
        self.expect(")")
        atom = Atom(t.text, tuple(args), pos=(t.line, t.col))
        aggs = [a for a in atom.args if isinstance(a, AggregateTerm)]
        if len(aggs) > 1:
            raise DatalogSyntaxError(
                f"at most one aggregate term per head, {atom.pred!r} has {len(aggs)}",
                line=aggs[1].pos[0], column=aggs[1].pos[1])
        return atom

    def parse_hterm(self, allow_aggregates: bool) -> Union[Term, AggregateTerm]:
        t = self.tok
        if t.kind == "lident":
            if t.text in AGGREGATE_FNS:
                if not allow_aggregates:
                    raise DatalogSyntaxError(
                        "aggregate terms are only allowed in rule heads",
                        line=t.line, column=t.col)
                return self.parse_aggregate()
            raise self.error(("a term", "an aggregate"))
        return self.parse_term()

    def parse_aggregate(self) -> AggregateTerm:
        t = self.advance()  # the aggregate function name
        self.expect("<")
        vars_: list[Variable] = []
        while True:
            if self.tok.kind != "uident":
                raise self.error(("variable",))
            v = self.advance()
            vars_.append(Variable(v.text, pos=(v.line, v.col)))
            if self.at(","):
                self.advance()
                continue
            break
        self.expect(">")
        return AggregateTerm(t.text, tuple(vars_[:-1]), vars_[-1],
                             pos=(t.line, t.col))

    def parse_term(self) -> Term:
        t = self.tok
        if t.kind == "uident":
            self.advance()
            return Variable(t.text, pos=(t.line, t.col))
        if t.text == "_":
            self.advance()
            return Wildcard(pos=(t.line, t.col))
        if t.kind == "number":
            self.advance()
            return Constant(self._number(t), pos=(t.line, t.col))
        if t.text == "-" and self.tokens[self.i + 1].kind == "number":
            self.advance()
            n = self.advance()
            return Constant(-self._number(n), pos=(t.line, t.col))
        if t.kind == "string":
            self.advance()
            return Constant(_unquote(t.text, t.line, t.col), pos=(t.line, t.col))
        raise self.error(("variable", "constant", "_"))

    @staticmethod
    def _number(t: _Token) -> Union[int, float]:
        if "." in t.text or "e" in t.text or "E" in t.text:
            return float(t.text)
        return int(t.text)

    def parse_literal(self) -> Literal:
        t = self.tok
        if t.kind == "lident":
            return self.parse_atom(allow_aggregates=False)
        left = self.parse_term()
        if self.at("="):
            if not isinstance(left, Variable):
                raise DatalogSyntaxError(
                    "assignment target must be a variable",
                    line=t.line, column=t.col)
            eq = self.advance()
            expr = self.parse_expr()
            return Assignment(left, expr, pos=(eq.line, eq.col))
        for op in COMPARE_OPS:
            if self.at(op):
                o = self.advance()
                right = self.parse_term()
                return Comparison(op, left, right, pos=(o.line, o.col))
        raise self.error(("comparison operator", "="))

    # expr := mul {("+"|"-") mul} ; mul := unary {("*"|"/") unary}
    def parse_expr(self) -> Term:
        left = self.parse_mul()
        while self.at("+") or self.at("-"):
            op = self.advance()
            right = self.parse_mul()
            left = Arith(op.text, left, right, pos=(op.line, op.col))
        return left

    def parse_mul(self) -> Term:
        left = self.parse_unary()
        while self.at("*") or self.at("/"):
            op = self.advance()
            right = self.parse_unary()
            left = Arith(op.text, left, right, pos=(op.line, op.col))
        return left

    def parse_unary(self) -> Term:
        t = self.tok
        if t.text == "(":
            self.advance()
            inner = self.parse_expr()
            self.expect(")")
            return inner
        if t.kind == "lident":
            if t.text in BUILTIN_FNS:
                self.advance()
                self.expect("(")
                arg = self.parse_expr()
                self.expect(")")
                return Call(t.text, arg, pos=(t.line, t.col))
            raise self.error(BUILTIN_FNS)
        if t.text == "-":
            # unary minus: constant fold for literals, 0 - x otherwise
            if self.tokens[self.i + 1].kind == "number":
                return self.parse_term()
            op = self.advance()
            operand = self.parse_unary()
            return Arith("-", Constant(0, pos=(op.line, op.col)), operand,
                         pos=(op.line, op.col))
        return self.parse_term()


# --- validation -----------------------------------------------------------------

def _term_vars(term: Union[Term, AggregateTerm]) -> list[Variable]:
    if isinstance(term, Variable):
        return [term]
    if isinstance(term, Arith):
        return _term_vars(term.left) + _term_vars(term.right)
    if isinstance(term, Call):
        return _term_vars(term.arg)
    if isinstance(term, AggregateTerm):
        return list(term.witnesses) + [term.value]
    return []


def _check_arities(program: Program) -> None:
    arity: dict[str, int] = {}
    origin: dict[str, str] = {}

    def check(pred: str, n: int, where: str, pos) -> None:
        if pred not in arity:
            arity[pred] = n
            origin[pred] = where
            return
        if arity[pred] != n:
            line, col = pos or (None, None)
            raise ArityError(
                f"{pred}/{n} conflicts with {pred}/{arity[pred]} ({origin[pred]})",
                line=line, column=col)

    for name, schema in program.declarations:
        check(name, len(schema), "declaration", None)
    for rule in program.rules:
        check(rule.head.pred, len(rule.head.args), "rule head", rule.head.pos)
        for lit in rule.body:
            if isinstance(lit, Atom):
                check(lit.pred, len(lit.args), "body atom", lit.pos)
    if program.query is not None:
        check(program.query.pred, len(program.query.args), "query", program.query.pos)


def _check_rule_safety(rule: Rule) -> None:
    bound: set[str] = set()
    assigned: set[str] = set()
    for lit in rule.body:
        if isinstance(lit, Atom):
            if lit.aggregate is not None:
                agg = lit.aggregate
                raise DatalogSyntaxError(
                    "aggregate terms are only allowed in rule heads",
                    line=agg.pos[0] if agg.pos else None,
                    column=agg.pos[1] if agg.pos else None)
            for arg in lit.args:
                if isinstance(arg, (Arith, Call)):
                    raise DatalogSyntaxError(
                        "arithmetic is only allowed in assignments",
                        line=lit.pos[0] if lit.pos else None,
                        column=lit.pos[1] if lit.pos else None)
                bound.update(v.name for v in _term_vars(arg))
        elif isinstance(lit, Comparison):
            for side in (lit.left, lit.right):
                if isinstance(side, Wildcard):
                    raise SafetyError(
                        "wildcard is not allowed in a comparison",
                        line=lit.pos[0] if lit.pos else None,
                        column=lit.pos[1] if lit.pos else None)
                for v in _term_vars(side):
                    if v.name not in bound:
                        raise SafetyError(
                            f"variable {v.name} in comparison is not bound "
                            "by a positive atom or assignment",
                            variable=v.name,
                            line=v.pos[0] if v.pos else None,
                            column=v.pos[1] if v.pos else None)
        else:  # Assignment
            if lit.var.name in assigned or lit.var.name in bound:
                raise SafetyError(
                    f"assignment target {lit.var.name} is already bound",
                    variable=lit.var.name,
                    line=lit.pos[0] if lit.pos else None,
                    column=lit.pos[1] if lit.pos else None)
            for v in _term_vars(lit.expr):
                if v.name not in bound:
                    raise SafetyError(
                        f"variable {v.name} in assignment is not bound "
                        "by a positive atom or assignment",
                        variable=v.name,
                        line=v.pos[0] if v.pos else None,
                        column=v.pos[1] if v.pos else None)
            if any(isinstance(w, Wildcard) for w in _walk_terms(lit.expr)):
                raise SafetyError(
                    "wildcard is not allowed in an assignment expression",
                    line=lit.pos[0] if lit.pos else None,
                    column=lit.pos[1] if lit.pos else None)
            assigned.add(lit.var.name)
            bound.add(lit.var.name)
    for arg in rule.head.args:
        if isinstance(arg, Wildcard):
            raise SafetyError(
                "wildcard is not allowed in a rule head",
                line=arg.pos[0] if arg.pos else None,
                column=arg.pos[1] if arg.pos else None)
        if isinstance(arg, (Arith, Call)):
            raise DatalogSyntaxError(
                "arithmetic is only allowed in assignments",
                line=rule.head.pos[0] if rule.head.pos else None,
                column=rule.head.pos[1] if rule.head.pos else None)
        for v in _term_vars(arg):
            if v.name not in bound:
                raise SafetyError(
                    f"head variable {v.name} is not bound by a positive atom "
                    "or assignment",
                    variable=v.name,
                    line=v.pos[0] if v.pos else None,
                    column=v.pos[1] if v.pos else None)


def _walk_terms(term: Term):
    yield term
    if isinstance(term, Arith):
        yield from _walk_terms(term.left)
        yield from _walk_terms(term.right)
    elif isinstance(term, Call):
        yield from _walk_terms(term.arg)


def _validate(program: Program) -> Program:
    seen_decls: set[str] = set()
    for name, _ in program.declarations:
        if name in seen_decls:
            raise DeclConflictError(f"relation {name!r} declared twice")
        seen_decls.add(name)
    _check_arities(program)
    defined = set(seen_decls)
    for rule in program.rules:
        if rule.head.pred in seen_decls:
            line, col = rule.head.pos or (None, None)
            raise DeclConflictError(
                f"declared relation {rule.head.pred!r} cannot be a rule head",
                line=line, column=col)
        defined.add(rule.head.pred)
        _check_rule_safety(rule)
    if program.query is not None:
        for arg in program.query.args:
            if isinstance(arg, (Arith, Call)):
                raise DatalogSyntaxError("arithmetic is not allowed in a query")
        if not any(isinstance(arg, Variable) for arg in program.query.args):
            line, col = program.query.pos or (None, None)
            raise DatalogSyntaxError(
                "a query needs at least one variable", line=line, column=col)
        if program.query.pred not in defined:
            line, col = program.query.pos or (None, None)
            raise UndefinedPredicateError(
                f"query predicate {program.query.pred!r} is neither declared "
                "nor defined by a rule", line=line, column=col)
    return program


def parse_program(text: str) -> Program:
    """Parse and validate a program; raises on the first error found."""
    return _validate(_Parser(text).parse_program())


# --- formatter ------------------------------------------------------------------

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}


def _quote(text: str) -> str:
    out = ['"']
    for ch in text:
        if ch == '"':
            out.append('\\"')
        elif ch in _UNESCAPES:
            out.append(_UNESCAPES[ch])
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def format_term(term: Union[Term, AggregateTerm], parent_prec: int = 0,
                right_side: bool = False) -> str:
    if isinstance(term, Variable):
        return term.name
    if isinstance(term, Wildcard):
        return "_"
    if isinstance(term, Constant):
        if isinstance(term.value, str):
            return _quote(term.value)
        if isinstance(term.value, float):
            return repr(term.value)
        return str(term.value)
    if isinstance(term, Call):
        return f"{term.fn}({format_term(term.arg)})"
    if isinstance(term, AggregateTerm):
        names = [v.name for v in term.witnesses] + [term.value.name]
        return f"{term.fn}<{', '.join(names)}>"
    prec = _PRECEDENCE[term.op]
    text = (f"{format_term(term.left, prec, False)} {term.op} "
            f"{format_term(term.right, prec, True)}")
    if prec < parent_prec or (prec == parent_prec and right_side):
        return f"({text})"
    return text


def _format_atom(atom: Atom) -> str:
    return f"{atom.pred}({', '.join(format_term(a) for a in atom.args)})"


def _format_literal(lit: Literal) -> str:
    if isinstance(lit, Atom):
        return _format_atom(lit)
    if isinstance(lit, Comparison):
        return f"{format_term(lit.left)} {lit.op} {format_term(lit.right)}"
    return f"{lit.var.name} = {format_term(lit.expr)}"


def format_program(program: Program) -> str:
    """Render a Program to canonical text; re-parsing yields an equal AST."""
    lines = []
    if program.declarations:
        decls = ",\n".join(
            f"  {name}({', '.join(f'{c}: {t.value}' for c, t in schema.columns)})"
            for name, schema in program.declarations)
        lines.append(f"database({{\n{decls}\n}}).")
    for rule in program.rules:
        head = _format_atom(rule.head)
        if rule.body:
            body = ", ".join(_format_literal(l) for l in rule.body)
            lines.append(f"{head} <- {body}.")
        else:
            lines.append(f"{head}.")
    if program.query is not None:
        lines.append(f"query {_format_atom(program.query)}.")
    return "\n".join(lines) + ("\n" if lines else "")
