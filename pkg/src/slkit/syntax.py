"""Abstract syntax for separation-logic formulas, inductive rules and sequents.

Variables are plain strings.  Formulas are immutable trees built from
:class:`Emp`, :class:`PointsTo`, :class:`PredAtom`, :class:`TheoryAtom`,
:class:`Star`, :class:`Or` and :class:`Exists`.  Generated variable and
predicate names contain a ``%`` character, which user input never does, so
they cannot collide with names written by hand.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence, Union

# theory predicate ids and their arities
THEORY_ARITY = {
    "eq": 2,
    "neq": 2,
    "false": 0,
    "S": 2,
    "Sbar": 2,
    "leq": 2,
    "geq": 2,
    "succ": 2,
}
EQ, NEQ, FALSE = "eq", "neq", "false"
THEORIES = ("equality", "nat_succ", "nat_leq")


class CaptureError(ValueError):
    """Substitution would capture a variable and renaming was disabled."""


class UnknownPredicate(KeyError):
    pass


# ---------------------------------------------------------------------------
# formulas


@dataclass(frozen=True)
class Emp:
    def __str__(self) -> str:
        return "emp"


@dataclass(frozen=True)
class PointsTo:
    src: str
    targets: tuple[str, ...]

    def __str__(self) -> str:
        return f"{self.src} -> ({', '.join(self.targets)})"


@dataclass(frozen=True)
class PredAtom:
    pred: str
    args: tuple[str, ...]

    def __str__(self) -> str:
        return f"{self.pred}({', '.join(self.args)})"


@dataclass(frozen=True)
class TheoryAtom:
    pred: str
    args: tuple[str, ...] = ()

    def __str__(self) -> str:
        if self.pred == EQ:
            return f"{self.args[0]} = {self.args[1]}"
        if self.pred == NEQ:
            return f"{self.args[0]} != {self.args[1]}"
        if self.pred == FALSE:
            return "false"
        return f"{self.pred}({', '.join(self.args)})"


@dataclass(frozen=True)
class Star:
    left: Formula
    right: Formula

    def __str__(self) -> str:
        from .parser import format_formula

        return format_formula(self)


@dataclass(frozen=True)
class Or:
    left: Formula
    right: Formula

    def __str__(self) -> str:
        from .parser import format_formula

        return format_formula(self)


@dataclass(frozen=True)
class Exists:
    var: str
    body: Formula

    def __str__(self) -> str:
        from .parser import format_formula

        return format_formula(self)


Atom = Union[PointsTo, PredAtom, TheoryAtom]
Formula = Union[Emp, PointsTo, PredAtom, TheoryAtom, Star, Or, Exists]
ATOM_TYPES = (PointsTo, PredAtom, TheoryAtom)


def eq(x: str, y: str) -> TheoryAtom:
    return TheoryAtom(EQ, (x, y))


def neq(x: str, y: str) -> TheoryAtom:
    return TheoryAtom(NEQ, (x, y))


def star(*parts: Formula) -> Formula:
    """Left-nested separating conjunction; ``star()`` is ``emp``."""
    parts = tuple(parts)
    if not parts:
        return Emp()
    result = parts[0]
    for part in parts[1:]:
        result = Star(result, part)
    return result


def disj(*parts: Formula) -> Formula:
    if not parts:
        raise ValueError("empty disjunction")
    result = parts[0]
    for part in parts[1:]:
        result = Or(result, part)
    return result


def exists(variables: Iterable[str], body: Formula) -> Formula:
    for var in reversed(tuple(variables)):
        body = Exists(var, body)
    return body


def conjuncts(f: Formula) -> list[Formula]:
    """Flatten nested stars, dropping ``emp``."""
    if isinstance(f, Star):
        return conjuncts(f.left) + conjuncts(f.right)
    if isinstance(f, Emp):
        return []
    return [f]


def disjuncts(f: Formula) -> list[Formula]:
    if isinstance(f, Or):
        return disjuncts(f.left) + disjuncts(f.right)
    return [f]


def strip_exists(f: Formula) -> tuple[list[str], Formula]:
    prefix = []
    while isinstance(f, Exists):
        prefix.append(f.var)
        f = f.body
    return prefix, f


def atom_vars(a: Atom) -> tuple[str, ...]:
    if isinstance(a, PointsTo):
        return (a.src,) + a.targets
    return a.args


def subformulas(f: Formula) -> Iterator[Formula]:
    yield f
    if isinstance(f, (Star, Or)):
        yield from subformulas(f.left)
        yield from subformulas(f.right)
    elif isinstance(f, Exists):
        yield from subformulas(f.body)


def atoms(f: Formula) -> Iterator[Atom]:
    for sub in subformulas(f):
        if isinstance(sub, ATOM_TYPES):
            yield sub


def predicates(f: Formula) -> set[str]:
    return {a.pred for a in atoms(f) if isinstance(a, PredAtom)}


def theory_symbols(f: Formula) -> set[str]:
    return {a.pred for a in atoms(f) if isinstance(a, TheoryAtom)}


def fv(f: Formula) -> set[str]:
    if isinstance(f, Emp):
        return set()
    if isinstance(f, ATOM_TYPES):
        return set(atom_vars(f))
    if isinstance(f, (Star, Or)):
        return fv(f.left) | fv(f.right)
    if isinstance(f, Exists):
        return fv(f.body) - {f.var}
    raise TypeError(f"not a formula: {f!r}")


def bound_vars(f: Formula) -> list[str]:
    return [sub.var for sub in subformulas(f) if isinstance(sub, Exists)]


def all_vars(f: Formula) -> set[str]:
    return fv(f) | set(bound_vars(f))


def is_disjunction_free(f: Formula) -> bool:
    return not any(isinstance(sub, Or) for sub in subformulas(f))


def is_quantifier_free(f: Formula) -> bool:
    return not any(isinstance(sub, Exists) for sub in subformulas(f))


def is_symbolic_heap(f: Formula) -> bool:
    _, body = strip_exists(f)
    return is_quantifier_free(body) and is_disjunction_free(body)


# ---------------------------------------------------------------------------
# rules, SIDs, sequents


@dataclass(frozen=True)
class Rule:
    pred: str
    params: tuple[str, ...]
    body: Formula

    def __post_init__(self):
        if len(set(self.params)) != len(self.params):
            raise ValueError(f"rule head {self.pred}{self.params} repeats a parameter")
        stray = fv(self.body) - set(self.params)
        if stray:
            raise ValueError(f"rule for {self.pred} has unbound variables {sorted(stray)}")

    @property
    def head(self) -> PredAtom:
        return PredAtom(self.pred, self.params)

    def __str__(self) -> str:
        from .parser import format_rule

        return format_rule(self)


@dataclass(frozen=True)
class SID:
    """A set of inductive rules, kept in insertion order.

    ``arities`` must cover every predicate that is defined or mentioned.
    """

    kappa: int
    rules: tuple[Rule, ...] = ()
    arities: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.kappa < 1:
            raise ValueError("kappa must be positive")
        # deduplicate while keeping first occurrences
        object.__setattr__(self, "rules", tuple(dict.fromkeys(self.rules)))
        object.__setattr__(self, "arities", dict(self.arities))
        for rule in self.rules:
            declared = self.arities.get(rule.pred)
            if declared is None:
                raise UnknownPredicate(rule.pred)
            if declared != len(rule.params):
                raise ValueError(
                    f"rule for {rule.pred} has {len(rule.params)} parameters, arity is {declared}"
                )
            for a in atoms(rule.body):
                check_atom(a, self.kappa, self.arities)

    def __hash__(self):
        return hash((self.kappa, self.rules, tuple(sorted(self.arities.items()))))

    @classmethod
    def build(cls, kappa: int, rules: Iterable[Rule], arities: Mapping[str, int] | None = None) -> SID:
        """Construct an SID, inferring arities from heads and body atoms."""
        rules = tuple(rules)
        found = dict(arities or {})
        for rule in rules:
            found.setdefault(rule.pred, len(rule.params))
            for a in atoms(rule.body):
                if isinstance(a, PredAtom):
                    found.setdefault(a.pred, len(a.args))
        return cls(kappa, rules, found)

    def rules_for(self, pred: str) -> tuple[Rule, ...]:
        if pred not in self.arities:
            raise UnknownPredicate(pred)
        return tuple(r for r in self.rules if r.pred == pred)

    def with_rules(self, rules: Iterable[Rule], kappa: int | None = None, arities=None) -> SID:
        return SID.build(self.kappa if kappa is None else kappa, rules, arities)

    @property
    def predicate_names(self) -> list[str]:
        return list(self.arities)


def check_atom(a: Atom, kappa: int, arities: Mapping[str, int]) -> None:
    if isinstance(a, PointsTo):
        if len(a.targets) != kappa:
            raise ValueError(f"points-to {a} has {len(a.targets)} targets, kappa is {kappa}")
    elif isinstance(a, PredAtom):
        if a.pred not in arities:
            raise UnknownPredicate(a.pred)
        if arities[a.pred] != len(a.args):
            raise ValueError(f"{a} does not match arity {arities[a.pred]}")
    elif isinstance(a, TheoryAtom):
        if a.pred not in THEORY_ARITY:
            raise ValueError(f"unknown theory predicate {a.pred}")
        if THEORY_ARITY[a.pred] != len(a.args):
            raise ValueError(f"{a} does not match arity {THEORY_ARITY[a.pred]}")


@dataclass(frozen=True)
class Sequent:
    lhs: Formula
    rhs: tuple[Formula, ...]
    sid: SID
    theory: str = "equality"

    def __post_init__(self):
        object.__setattr__(self, "rhs", tuple(self.rhs))
        if self.theory not in THEORIES:
            raise ValueError(f"unknown theory {self.theory}")
        for f in self.formulas:
            for a in atoms(f):
                check_atom(a, self.sid.kappa, self.sid.arities)

    @property
    def formulas(self) -> tuple[Formula, ...]:
        return (self.lhs,) + self.rhs

    def free_vars(self) -> set[str]:
        result: set[str] = set()
        for f in self.formulas:
            result |= fv(f)
        return result

    def replace(self, **changes) -> Sequent:
        values = dict(lhs=self.lhs, rhs=self.rhs, sid=self.sid, theory=self.theory)
        values.update(changes)
        return Sequent(**values)

    def __str__(self) -> str:
        from .parser import format_sequent

        return format_sequent(self)


# ---------------------------------------------------------------------------
# fresh names and substitutions


def base_name(name: str) -> str:
    return name.split("%", 1)[0]


class FreshNames:
    """Deterministic generator of names ``base%N``.

    Each transformation session should own one instance so that output is
    reproducible; ``next`` is guarded by a lock so a shared instance is safe
    across threads.
    """

    def __init__(self, avoid: Iterable[str] = ()):
        self._counter = itertools.count(1)
        self._avoid = set(avoid)
        self._lock = threading.Lock()

    def avoid(self, names: Iterable[str]) -> None:
        with self._lock:
            self._avoid.update(names)

    def __call__(self, base: str) -> str:
        root = base_name(base)
        with self._lock:
            while True:
                name = f"{root}%{next(self._counter)}"
                if name not in self._avoid:
                    self._avoid.add(name)
                    return name


DEFAULT_FRESH = FreshNames()


@dataclass(frozen=True)
class Substitution:
    """Finite variable renaming; identity outside ``mapping``."""

    mapping: Mapping[str, str]

    def __post_init__(self):
        object.__setattr__(
            self, "mapping", {k: v for k, v in dict(self.mapping).items() if k != v}
        )

    def __call__(self, x: str) -> str:
        return self.mapping.get(x, x)

    @property
    def dom(self) -> set[str]:
        return set(self.mapping)

    @property
    def img(self) -> set[str]:
        return set(self.mapping.values())

    @classmethod
    def of(cls, sources: Sequence[str], targets: Sequence[str]) -> Substitution:
        if len(sources) != len(targets):
            raise ValueError("length mismatch")
        if len(set(sources)) != len(sources):
            raise ValueError("substitution sources must be distinct")
        return cls(dict(zip(sources, targets)))

    def __hash__(self):
        return hash(tuple(sorted(self.mapping.items())))


def rename_atom(a: Atom, sub) -> Atom:
    if isinstance(a, PointsTo):
        return PointsTo(sub(a.src), tuple(sub(t) for t in a.targets))
    if isinstance(a, PredAtom):
        return PredAtom(a.pred, tuple(sub(t) for t in a.args))
    return TheoryAtom(a.pred, tuple(sub(t) for t in a.args))


def apply_subst(
    f: Formula,
    sigma: Substitution | Mapping[str, str],
    rename: bool = True,
    fresh: FreshNames | None = None,
) -> Formula:
    """Replace free occurrences according to ``sigma``.

    A binder that would capture an image variable is renamed to a fresh name,
    or :class:`CaptureError` is raised when ``rename`` is false.
    """
    if not isinstance(sigma, Substitution):
        sigma = Substitution(sigma)
    fresh = fresh or DEFAULT_FRESH
    return _subst(f, dict(sigma.mapping), rename, fresh)


def _subst(f: Formula, mapping: dict[str, str], rename: bool, fresh: FreshNames) -> Formula:
    if not mapping:
        return f
    if isinstance(f, Emp):
        return f
    if isinstance(f, ATOM_TYPES):
        return rename_atom(f, lambda x: mapping.get(x, x))
    if isinstance(f, Star):
        return Star(_subst(f.left, mapping, rename, fresh), _subst(f.right, mapping, rename, fresh))
    if isinstance(f, Or):
        return Or(_subst(f.left, mapping, rename, fresh), _subst(f.right, mapping, rename, fresh))
    if isinstance(f, Exists):
        inner = {k: v for k, v in mapping.items() if k != f.var}
        free = fv(f.body)
        inner = {k: v for k, v in inner.items() if k in free}
        if f.var in inner.values():
            if not rename:
                raise CaptureError(f"substitution would capture {f.var}")
            new = fresh(f.var)
            inner[f.var] = new
            return Exists(new, _subst(f.body, inner, rename, fresh))
        return Exists(f.var, _subst(f.body, inner, rename, fresh))
    raise TypeError(f"not a formula: {f!r}")


def alpha_normalize(f: Formula, avoid: Iterable[str] = (), fresh: FreshNames | None = None) -> Formula:
    """Rename binders so that they are pairwise distinct and distinct from
    the free variables of ``f`` and from ``avoid``."""
    fresh = fresh or DEFAULT_FRESH
    used = set(avoid) | fv(f)

    def walk(g: Formula) -> Formula:
        if isinstance(g, (Star, Or)):
            return type(g)(walk(g.left), walk(g.right))
        if isinstance(g, Exists):
            var = g.var
            body = g.body
            if var in used:
                new = fresh(var)
                body = _subst(body, {var: new}, True, fresh)
                var = new
            used.add(var)
            return Exists(var, walk(body))
        return g

    return walk(f)


# ---------------------------------------------------------------------------
# size and width

LOGICAL_THEORY_SYMBOLS = {EQ, NEQ, FALSE}


def _atom_size(a: Atom) -> int:
    args = sum(len(x) for x in atom_vars(a))
    if isinstance(a, PointsTo):
        return args + 1
    if isinstance(a, PredAtom):
        return len(a.pred) + args
    weight = 1 if a.pred in LOGICAL_THEORY_SYMBOLS else len(a.pred)
    return weight + args


def size(e) -> int:
    """Number of symbol occurrences, identifiers weighted by their length.

    Parentheses and commas are free; ``emp``, ``->``, ``*``, ``\\/`` and the
    quantifier symbol weigh 1.
    """
    if isinstance(e, Emp):
        return 1
    if isinstance(e, ATOM_TYPES):
        return _atom_size(e)
    if isinstance(e, (Star, Or)):
        return size(e.left) + size(e.right) + 1
    if isinstance(e, Exists):
        return 1 + len(e.var) + size(e.body)
    if isinstance(e, Rule):
        return size(e.head) + size(e.body)
    if isinstance(e, SID):
        return sum(size(r) for r in e.rules)
    if isinstance(e, Sequent):
        return sum(size(f) for f in e.formulas) + size(e.sid)
    raise TypeError(f"cannot measure {e!r}")


def width(e) -> int:
    if isinstance(e, Or):
        return max(width(e.left), width(e.right))
    if isinstance(e, Star):
        return width(e.left) + width(e.right) + 1
    if isinstance(e, Exists):
        return width(e.body) + 1 + len(e.var)
    if isinstance(e, (Emp,) + ATOM_TYPES):
        return size(e)
    if isinstance(e, SID):
        return max((size(r) for r in e.rules), default=0)
    if isinstance(e, Sequent):
        return max([width(f) for f in e.formulas] + [width(e.sid), len(e.free_vars())])
    raise TypeError(f"cannot measure {e!r}")
