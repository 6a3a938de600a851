"""Syntactic side conditions on rule systems and sequents.

All checkers return a :class:`ConditionReport` rather than raising, so the
command line can print every violation at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .normalform import reachable_predicates, symbolic_heap_parts
from .syntax import (
    EQ,
    SID,
    Formula,
    PointsTo,
    PredAtom,
    Rule,
    Sequent,
    TheoryAtom,
    is_symbolic_heap,
    theory_symbols,
)


@dataclass(frozen=True)
class Violation:
    rule: int | None
    reason: str
    fragment: str

    def to_json(self) -> dict:
        return {"rule": self.rule, "reason": self.reason, "fragment": self.fragment}


@dataclass(frozen=True)
class ConditionReport:
    name: str
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def to_json(self) -> dict:
        return {
            "condition": self.name,
            "ok": self.ok,
            "violations": [v.to_json() for v in self.violations],
        }


class UnionFind:
    def __init__(self, items: Iterable[str] = ()):
        self.parent: dict[str, str] = {}
        for x in items:
            self.add(x)

    def add(self, x: str) -> None:
        self.parent.setdefault(x, x)

    def find(self, x: str) -> str:
        self.add(x)
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: str, y: str) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            # keep the lexicographically smaller root, so classes print stably
            if ry < rx:
                rx, ry = ry, rx
            self.parent[ry] = rx

    def same(self, x: str, y: str) -> bool:
        return self.find(x) == self.find(y)


def equation_closure(body) -> UnionFind:
    uf = UnionFind()
    for a in body:
        if isinstance(a, TheoryAtom) and a.pred == EQ:
            uf.union(*a.args)
    return uf


def _root_cell(body) -> PointsTo | None:
    cells = [a for a in body if isinstance(a, PointsTo)]
    return cells[0] if len(cells) == 1 else None


# ---------------------------------------------------------------------------
# progress and connectivity


def rule_progress_issue(rule: Rule) -> str | None:
    if not is_symbolic_heap(rule.body):
        return "body is not a symbolic heap"
    if not rule.params:
        return "predicate has no root parameter"
    _, body = symbolic_heap_parts(rule.body)
    cells = [a for a in body if isinstance(a, PointsTo)]
    if len(cells) != 1:
        return f"body has {len(cells)} points-to atoms, expected exactly one"
    if cells[0].src != rule.params[0]:
        return f"points-to source {cells[0].src} is not the first parameter {rule.params[0]}"
    return None


def check_progress(sid: SID) -> ConditionReport:
    found = []
    for i, rule in enumerate(sid.rules):
        issue = rule_progress_issue(rule)
        if issue:
            found.append(Violation(i, issue, str(rule)))
    return ConditionReport("progress", tuple(found))


def check_connectivity(sid: SID) -> ConditionReport:
    found = []
    for i, rule in enumerate(sid.rules):
        if rule_progress_issue(rule):
            continue
        _, body = symbolic_heap_parts(rule.body)
        cell = _root_cell(body)
        for a in body:
            if isinstance(a, PredAtom):
                if not a.args or a.args[0] not in cell.targets:
                    found.append(Violation(i, f"root of {a} is not a target of {cell}", str(a)))
    return ConditionReport("connectivity", tuple(found))


def is_pc(sid: SID) -> bool:
    return check_progress(sid).ok and check_connectivity(sid).ok


# ---------------------------------------------------------------------------
# establishment


def _allocated_classes(rule: Rule, est: Mapping[str, frozenset[int]]):
    """Equation closure of a rule body and the classes it surely allocates."""
    prefix, body = symbolic_heap_parts(rule.body)
    uf = equation_closure(body)
    allocated = set()
    for a in body:
        if isinstance(a, PointsTo):
            allocated.add(uf.find(a.src))
        elif isinstance(a, PredAtom):
            for j in est.get(a.pred, ()):
                allocated.add(uf.find(a.args[j - 1]))
    return prefix, uf, allocated


def established_positions(sid: SID) -> dict[str, frozenset[int]]:
    """Positions allocated (up to body equations) in every complete unfolding.

    Computed from the top element downwards, so predicates without finite
    unfoldings keep every position.
    """
    est = {p: frozenset(range(1, n + 1)) for p, n in sid.arities.items()}
    changed = True
    while changed:
        changed = False
        for p in est:
            rules = sid.rules_for(p)
            if not rules:
                continue
            positions = set(est[p])
            for rule in rules:
                _, uf, allocated = _allocated_classes(rule, est)
                positions &= {i + 1 for i, x in enumerate(rule.params) if uf.find(x) in allocated}
            if positions != est[p]:
                est[p] = frozenset(positions)
                changed = True
    return est


def check_establishment(sid: SID) -> ConditionReport:
    found = []
    progress = check_progress(sid)
    bad = {v.rule for v in progress.violations}
    # rules failing progress are left out of the fixpoint and reported as such
    good = sid.with_rules([r for i, r in enumerate(sid.rules) if i not in bad], arities=sid.arities)
    est = established_positions(good)
    for i, rule in enumerate(sid.rules):
        if i in bad:
            found.append(Violation(i, "progress fails, establishment undefined", str(rule)))
            continue
        prefix, uf, allocated = _allocated_classes(rule, est)
        for y in prefix:
            if uf.find(y) not in allocated:
                found.append(Violation(i, f"existential {y} is never allocated", str(rule)))
    return ConditionReport("establishment", tuple(found))


# ---------------------------------------------------------------------------
# alloc maps


@dataclass(frozen=True)
class AllocMap:
    mapping: Mapping[str, frozenset[int]] = field(default_factory=dict)

    def __getitem__(self, pred: str) -> frozenset[int]:
        return self.mapping[pred]

    def get(self, pred: str, default=frozenset()):
        return self.mapping.get(pred, default)

    def to_json(self) -> dict:
        return {p: sorted(self.mapping[p]) for p in sorted(self.mapping)}


@dataclass(frozen=True)
class Incompatible:
    pred: str
    allocations: tuple[frozenset[int], ...]

    def __bool__(self) -> bool:
        return False


def alloc_vars(body, alloc) -> set[str]:
    """Variables allocated by the atoms of a disjunction-free body."""
    found = set()
    for a in body:
        if isinstance(a, PointsTo):
            found.add(a.src)
        elif isinstance(a, PredAtom):
            for j in alloc.get(a.pred, ()):
                found.add(a.args[j - 1])
    return found


def rule_alloc(rule: Rule, alloc) -> frozenset[int]:
    prefix, body = symbolic_heap_parts(rule.body)
    allocated = alloc_vars(body, alloc) - set(prefix)
    return frozenset(i + 1 for i, x in enumerate(rule.params) if x in allocated)


def formula_alloc(f: Formula, alloc) -> set[str]:
    prefix, body = symbolic_heap_parts(f)
    return alloc_vars(body, alloc) - set(prefix)


def compute_alloc_map(sid: SID) -> AllocMap | Incompatible:
    """Least solution of alloc(p) = alloc(body) over all rules, then verified."""
    alloc: dict[str, frozenset[int]] = {p: frozenset() for p in sid.arities}
    changed = True
    while changed:
        changed = False
        for rule in sid.rules:
            new = alloc[rule.pred] | rule_alloc(rule, alloc)
            if new != alloc[rule.pred]:
                alloc[rule.pred] = new
                changed = True
    for p in sid.arities:
        seen = tuple(dict.fromkeys(rule_alloc(r, alloc) for r in sid.rules_for(p)))
        if len(seen) > 1:
            return Incompatible(p, seen)
    return AllocMap(alloc)


def is_alloc_compatible(sid: SID, alloc: AllocMap | None = None) -> bool:
    """One-pass check that every rule allocates exactly its head's positions."""
    if alloc is None:
        alloc = compute_alloc_map(sid)
        if isinstance(alloc, Incompatible):
            return False
    return all(rule_alloc(r, alloc) == alloc.get(r.pred) for r in sid.rules)


def check_alloc_compatibility(sid: SID) -> ConditionReport:
    result = compute_alloc_map(sid)
    if isinstance(result, Incompatible):
        sets = ", ".join("{" + ",".join(map(str, sorted(s))) + "}" for s in result.allocations)
        return ConditionReport(
            "alloc-compatibility",
            (Violation(None, f"rules for {result.pred} allocate different positions: {sets}", result.pred),),
        )
    return ConditionReport("alloc-compatibility")


# ---------------------------------------------------------------------------
# P-constrainedness


def reachable_theory_symbols(formulas: Iterable[Formula], sid: SID) -> set[str]:
    formulas = list(formulas)
    symbols: set[str] = set()
    for f in formulas:
        symbols |= theory_symbols(f)
    for p in reachable_predicates(formulas, sid):
        for rule in sid.rules_for(p) if p in sid.arities else ():
            symbols |= theory_symbols(rule.body)
    return symbols


def check_constrained(sq: Sequent, allowed: Iterable[str]) -> ConditionReport:
    allowed = set(allowed)
    found = []
    for f in sq.formulas:
        extra = reachable_theory_symbols([f], sq.sid) - allowed
        for sym in sorted(extra):
            found.append(Violation(None, f"theory symbol {sym} is reachable", str(f)))
    return ConditionReport("constrained", tuple(found))


def check_sid(sid: SID) -> list[ConditionReport]:
    return [check_progress(sid), check_connectivity(sid), check_establishment(sid)]
