"""Text syntax for ``.sid`` problem files.

Grammar::

    problem   := sid_block ['theory' IDENT ';'] entail_block*
    sid_block := 'sid' '{' item* '}'
    item      := 'kappa' '=' INT ';' | 'pred' IDENT '/' INT ';' | rule ';'
    rule      := IDENT '(' [IDENT (',' IDENT)*] ')' '<=' formula
    entail    := 'entail' '{' [sequent (';' sequent)* [';']] '}'
    sequent   := formula '|-' [formula (',' formula)*]
    formula   := starf (('\\/' | '|') starf)*
    starf     := unary ('*' unary)*
    unary     := 'EX' IDENT '.' formula | '(' formula ')' | atom
    atom      := 'emp' | 'false' | IDENT '->' '(' vars ')' | IDENT '=' IDENT
               | IDENT '!=' IDENT | IDENT '(' vars ')'

``//`` starts a comment.  Calls to ``S``, ``Sbar``, ``leq``, ``geq`` and
``succ`` are theory atoms; every other call is a predicate atom.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .syntax import (
    EQ,
    FALSE,
    NEQ,
    SID,
    THEORIES,
    THEORY_ARITY,
    Emp,
    Exists,
    Formula,
    Or,
    PointsTo,
    PredAtom,
    Rule,
    Sequent,
    Star,
    TheoryAtom,
    atoms,
)

NAMED_THEORY_ATOMS = {"S", "Sbar", "leq", "geq", "succ"}
KEYWORDS = {"sid", "kappa", "pred", "theory", "entail", "EX", "emp", "false"}
MAX_DEPTH = 200


class ParseError(Exception):
    """Base class for problem-file diagnostics; carries a source position."""

    def __init__(self, message: str, line: int = 0, column: int = 0, expected=()):
        self.message = message
        self.line = line
        self.column = column
        self.expected = tuple(expected)
        where = f"{line}:{column}: " if line else ""
        super().__init__(where + message)


class SLSyntaxError(ParseError):
    pass


class ArityMismatch(ParseError):
    pass


class UnknownTheory(ParseError):
    pass


TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|//[^\n]*)
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*(?:%[0-9]+|%[A-Za-z0-9_]*)*)
  | (?P<int>[0-9]+)
  | (?P<op>\|-|<=|->|!=|\\/|[|(){};,.*=/])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = TOKEN_RE.match(text, pos)
        if not m:
            raise SLSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        value = m.group()
        if kind != "ws":
            if kind == "ident" and value in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, value, line, pos - line_start + 1))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            line_start = pos + value.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


@dataclass
class ProblemFile:
    sid: SID
    entailments: list[tuple[Formula, tuple[Formula, ...]]] = field(default_factory=list)
    theory: str = "equality"

    @property
    def kappa(self) -> int:
        return self.sid.kappa

    def sequents(self) -> list[Sequent]:
        return [Sequent(lhs, rhs, self.sid, self.theory) for lhs, rhs in self.entailments]

    @classmethod
    def from_sequent(cls, sq: Sequent) -> ProblemFile:
        return cls(sq.sid, [(sq.lhs, sq.rhs)], sq.theory)


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0
        self.depth = 0
        self.arities: dict[str, tuple[int, Token]] = {}
        self.kappa: int | None = None
        self.kappa_token: Token | None = None

    # -- token helpers

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def fail(self, expected, tok: Token | None = None):
        tok = tok or self.tok
        shown = tok.text or "end of input"
        raise SLSyntaxError(
            f"expected {' or '.join(expected)}, found {shown!r}", tok.line, tok.column, expected
        )

    def accept(self, text: str) -> Token | None:
        if self.tok.text == text and self.tok.kind != "eof":
            tok = self.tok
            self.i += 1
            return tok
        return None

    def expect(self, text: str) -> Token:
        tok = self.accept(text)
        if tok is None:
            self.fail([repr(text)])
        return tok

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            self.fail(["identifier"])
        tok = self.tok
        self.i += 1
        return tok

    def integer(self) -> int:
        if self.tok.kind != "int":
            self.fail(["integer"])
        tok = self.tok
        self.i += 1
        return int(tok.text)

    # -- bookkeeping

    def note_arity(self, name: str, arity: int, tok: Token):
        known = self.arities.get(name)
        if known is None:
            self.arities[name] = (arity, tok)
        elif known[0] != arity:
            raise ArityMismatch(
                f"{name} used with {arity} arguments, previously {known[0]}", tok.line, tok.column
            )

    def note_points_to(self, n: int, tok: Token):
        if self.kappa is None:
            self.kappa, self.kappa_token = n, tok
        elif self.kappa != n:
            raise ArityMismatch(
                f"points-to with {n} targets, kappa is {self.kappa}", tok.line, tok.column
            )

    # -- grammar

    def problem(self) -> ProblemFile:
        self.expect("sid")
        self.expect("{")
        rules = []
        declared: list[str] = []
        while not self.accept("}"):
            if self.tok.text == "kappa" and self.tok.kind == "kw":
                tok = self.expect("kappa")
                self.expect("=")
                value = self.integer()
                if value < 1:
                    raise ArityMismatch("kappa must be positive", tok.line, tok.column)
                if self.kappa_token is not None and self.kappa != value:
                    raise ArityMismatch("kappa declared inconsistently", tok.line, tok.column)
                self.kappa, self.kappa_token = value, tok
                self.expect(";")
            elif self.tok.text == "pred" and self.tok.kind == "kw":
                self.expect("pred")
                name = self.ident()
                self.expect("/")
                self.note_arity(name.text, self.integer(), name)
                declared.append(name.text)
                self.expect(";")
            elif self.tok.kind == "ident":
                rules.append(self.rule())
                self.expect(";")
            else:
                self.fail(["'kappa'", "'pred'", "rule", "'}'"])
        theory = "equality"
        if self.accept("theory"):
            tok = self.ident()
            if tok.text not in THEORIES:
                raise UnknownTheory(f"unknown theory {tok.text!r}", tok.line, tok.column)
            theory = tok.text
            self.expect(";")
        entailments = []
        while self.accept("entail"):
            self.expect("{")
            while not self.accept("}"):
                entailments.append(self.sequent())
                if not self.accept(";"):
                    self.expect("}")
                    break
        if self.tok.kind != "eof":
            self.fail(["'entail'", "end of input"])
        kappa = self.kappa if self.kappa is not None else 1
        arities = {name: n for name, (n, _) in self.arities.items()}
        try:
            sid = SID(kappa, tuple(rules), arities)
        except ValueError as exc:
            raise ArityMismatch(str(exc)) from exc
        return ProblemFile(sid, entailments, theory)

    def rule(self) -> Rule:
        name = self.ident()
        self.expect("(")
        params = self.var_list(")")
        self.note_arity(name.text, len(params), name)
        self.expect("<=")
        body = self.formula()
        try:
            return Rule(name.text, tuple(params), body)
        except ValueError as exc:
            raise SLSyntaxError(str(exc), name.line, name.column) from exc

    def sequent(self):
        lhs = self.formula()
        self.expect("|-")
        rhs = []
        if self.tok.text not in (";", "}"):
            rhs.append(self.formula())
            while self.accept(","):
                rhs.append(self.formula())
        return lhs, tuple(rhs)

    def var_list(self, close: str) -> list[str]:
        names = []
        if self.accept(close):
            return names
        names.append(self.ident().text)
        while self.accept(","):
            names.append(self.ident().text)
        self.expect(close)
        return names

    def formula(self) -> Formula:
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise SLSyntaxError("formula nested too deeply", self.tok.line, self.tok.column)
        left = self.star_formula()
        while self.tok.text in ("\\/", "|"):
            self.i += 1
            left = Or(left, self.star_formula())
        self.depth -= 1
        return left

    def star_formula(self) -> Formula:
        left = self.unary()
        while self.accept("*"):
            left = Star(left, self.unary())
        return left

    def unary(self) -> Formula:
        tok = self.tok
        if self.accept("EX"):
            var = self.ident().text
            self.expect(".")
            return Exists(var, self.formula())
        if self.accept("("):
            inner = self.formula()
            self.expect(")")
            return inner
        if self.accept("emp"):
            return Emp()
        if self.accept("false"):
            return TheoryAtom(FALSE, ())
        if tok.kind != "ident":
            self.fail(["atom", "'EX'", "'('"])
        name = self.ident().text
        if self.accept("->"):
            self.expect("(")
            targets = self.var_list(")")
            self.note_points_to(len(targets), tok)
            return PointsTo(name, tuple(targets))
        if self.accept("="):
            return TheoryAtom(EQ, (name, self.ident().text))
        if self.accept("!="):
            return TheoryAtom(NEQ, (name, self.ident().text))
        if self.accept("("):
            args = self.var_list(")")
            if name in NAMED_THEORY_ATOMS:
                if len(args) != THEORY_ARITY[name]:
                    raise ArityMismatch(
                        f"{name} takes {THEORY_ARITY[name]} arguments", tok.line, tok.column
                    )
                return TheoryAtom(name, tuple(args))
            self.note_arity(name, len(args), tok)
            return PredAtom(name, tuple(args))
        self.fail(["'->'", "'='", "'!='", "'('"])


def parse_problem(text: str) -> ProblemFile:
    """Parse a problem file; raises :class:`ParseError` subclasses only."""
    try:
        return _Parser(text).problem()
    except ParseError:
        raise
    except RecursionError as exc:
        raise SLSyntaxError("input nested too deeply") from exc


def parse_formula(text: str, kappa: int | None = None) -> Formula:
    parser = _Parser(text)
    if kappa is not None:
        parser.kappa = kappa
    f = parser.formula()
    if parser.tok.kind != "eof":
        parser.fail(["end of formula"])
    return f


def parse_sid(text: str) -> SID:
    return parse_problem(text).sid


# ---------------------------------------------------------------------------
# printing

_PREC = {Or: 1, Star: 2}


def format_formula(f: Formula, prec: int = 0) -> str:
    if isinstance(f, Exists):
        text = f"EX {f.var} . {format_formula(f.body, 0)}"
        return f"({text})" if prec > 0 else text
    if isinstance(f, (Or, Star)):
        own = _PREC[type(f)]
        op = " \\/ " if isinstance(f, Or) else " * "
        text = format_formula(f.left, own) + op + format_formula(f.right, own + 1)
        return f"({text})" if prec > own else text
    return str(f)


def format_rule(rule: Rule) -> str:
    return f"{rule.pred}({', '.join(rule.params)}) <= {format_formula(rule.body)}"


def format_entailment(lhs: Formula, rhs) -> str:
    rendered = ", ".join(format_formula(g) for g in rhs)
    return f"{format_formula(lhs)} |- {rendered}".rstrip()


def format_sequent(sq: Sequent) -> str:
    return format_entailment(sq.lhs, sq.rhs)


def print_problem(problem: ProblemFile) -> str:
    """Canonical text; ``parse_problem`` inverts it up to whitespace."""
    sid = problem.sid
    lines = ["sid {", f"  kappa={sid.kappa};"]
    defined = {r.pred for r in sid.rules}
    for name in sorted(p for p in sid.arities if p not in defined):
        lines.append(f"  pred {name}/{sid.arities[name]};")
    for rule in sid.rules:
        lines.append(f"  {format_rule(rule)};")
    lines.append("}")
    lines.append(f"theory {problem.theory};")
    lines.append("entail {")
    for lhs, rhs in problem.entailments:
        lines.append(f"  {format_entailment(lhs, rhs)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def print_sequent(sq: Sequent) -> str:
    return print_problem(ProblemFile.from_sequent(sq))


def problem_atoms(problem: ProblemFile):
    for rule in problem.sid.rules:
        yield from atoms(rule.body)
    for lhs, rhs in problem.entailments:
        for f in (lhs,) + tuple(rhs):
            yield from atoms(f)
