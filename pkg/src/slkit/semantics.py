"""Structures, theories and the satisfaction relation.

Locations are natural numbers.  Existential witnesses range over the
*candidate domain* of a structure: every location occurring in the heap,
every location in the store image, and the naturals below
``extra_locations``.  Established SIDs only ever need the first two sets;
the extra range serves pure theory existentials.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Mapping

from .normalform import dnf_parts, reachable_predicates
from .syntax import (
    EQ,
    FALSE,
    NEQ,
    SID,
    Formula,
    PointsTo,
    PredAtom,
    Sequent,
    TheoryAtom,
    fv,
)

DEFAULT_BUDGET = 2_000_000


class NonPcSID(ValueError):
    """A rule violates the progress condition, so checking may not terminate."""


class BudgetExceeded(RuntimeError):
    pass


class TheoryError(ValueError):
    pass


def budget_from_env(default: int = DEFAULT_BUDGET) -> int:
    value = os.environ.get("SLKIT_BUDGET")
    return int(value) if value else default


# ---------------------------------------------------------------------------
# theories


@dataclass(frozen=True)
class Theory:
    """Interpretation of theory atoms over naturals.

    ``nat_succ`` reads ``S(x,y)`` as y = x+1 and ``Sbar`` as its negation;
    ``nat_leq`` reads ``S`` as <= and ``Sbar`` as >=.  On equal locations
    ``Sbar`` is the negation of ``S`` in both numeric theories.
    """

    id: str = "equality"

    def holds(self, pred: str, values: tuple[int, ...]) -> bool:
        if pred == EQ:
            return values[0] == values[1]
        if pred == NEQ:
            return values[0] != values[1]
        if pred == FALSE:
            return False
        if self.id == "equality":
            raise TheoryError(f"theory atom {pred} is not available in the equality theory")
        a, b = values
        if pred == "leq":
            return a <= b
        if pred == "geq":
            return a >= b
        if pred == "succ":
            return b == a + 1
        if self.id == "nat_succ":
            if pred == "S":
                return b == a + 1
            if pred == "Sbar":
                return b != a + 1
        elif self.id == "nat_leq":
            if pred == "S":
                return a <= b
            if pred == "Sbar":
                # only constrained on distinct locations; completed as not-S
                return a >= b and a != b
        raise TheoryError(f"unknown theory atom {pred} for theory {self.id}")

    def __call__(self, store: Mapping[str, int], atom: TheoryAtom) -> bool:
        return self.holds(atom.pred, tuple(store[x] for x in atom.args))


def theory(id_or_theory) -> Theory:
    if isinstance(id_or_theory, Theory):
        return id_or_theory
    if id_or_theory not in ("equality", "nat_succ", "nat_leq"):
        raise TheoryError(f"unknown theory {id_or_theory}")
    return Theory(id_or_theory)


# ---------------------------------------------------------------------------
# structures


@dataclass(frozen=True)
class Structure:
    store: Mapping[str, int]
    heap: Mapping[int, tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "store", dict(self.store))
        object.__setattr__(self, "heap", {k: tuple(v) for k, v in dict(self.heap).items()})

    def __hash__(self):
        return hash((tuple(sorted(self.store.items())), tuple(sorted(self.heap.items()))))

    @property
    def size(self) -> int:
        return len(self.heap)

    def locs(self) -> set[int]:
        found = set(self.heap)
        for cell in self.heap.values():
            found.update(cell)
        return found

    def is_injective(self) -> bool:
        return len(set(self.store.values())) == len(self.store)

    def candidate_domain(self, extra_locations: int = 1) -> tuple[int, ...]:
        domain = self.locs() | set(self.store.values()) | set(range(extra_locations))
        return tuple(sorted(domain)) or (0,)

    def sort_key(self):
        return (
            len(self.heap),
            tuple(sorted(self.store.items())),
            tuple(sorted(self.heap.items())),
        )

    def to_json(self) -> dict:
        return {
            "store": {k: self.store[k] for k in sorted(self.store)},
            "heap": {str(k): list(self.heap[k]) for k in sorted(self.heap)},
        }

    @classmethod
    def from_json(cls, data) -> Structure:
        if isinstance(data, str):
            data = json.loads(data)
        return cls(
            {k: int(v) for k, v in data["store"].items()},
            {int(k): tuple(int(x) for x in v) for k, v in data["heap"].items()},
        )


# ---------------------------------------------------------------------------
# model checking


class _CompiledSID:
    """Rule bodies in disjunctive normal form, checked for progress once."""

    def __init__(self, sid: SID, predicates):
        self.sid = sid
        self.bodies: dict[str, list[tuple[tuple[str, ...], list[str], list]]] = {}
        for pred in predicates:
            compiled = []
            for rule in sid.rules_for(pred):
                for prefix, body in dnf_parts(rule.body):
                    pts = [a for a in body if isinstance(a, PointsTo)]
                    if len(pts) != 1 or pts[0].src != rule.params[0]:
                        raise NonPcSID(f"rule {rule} does not allocate exactly its root")
                    compiled.append((rule.params, prefix, body))
            self.bodies[pred] = compiled


_compiled_cache: dict[tuple[int, frozenset], _CompiledSID] = {}


def _compile(sid: SID, formulas) -> _CompiledSID:
    preds = frozenset(reachable_predicates(formulas, sid))
    key = (id(sid), preds)
    hit = _compiled_cache.get(key)
    if hit is None or hit.sid is not sid:
        hit = _CompiledSID(sid, preds)
        if len(_compiled_cache) > 256:
            _compiled_cache.clear()
        _compiled_cache[key] = hit
    else:
        missing = preds - set(hit.bodies)
        if missing:
            hit = _CompiledSID(sid, preds)
            _compiled_cache[key] = hit
    return hit


class _Search:
    """Depth-first search for a consumption of the heap by pending atoms."""

    def __init__(self, compiled: _CompiledSID, th: Theory, heap, domain, budget: int):
        self.compiled = compiled
        self.theory = th
        self.heap = heap
        self.domain = domain
        self.budget = budget
        self.nodes = 0
        self.counter = 0

    def fresh(self) -> str:
        self.counter += 1
        return f"#{self.counter}"

    def tick(self):
        self.nodes += 1
        if self.nodes > self.budget:
            raise BudgetExceeded(f"model checking exceeded {self.budget} search nodes")

    def unfold(self, atom: PredAtom):
        for params, prefix, body in self.compiled.bodies[atom.pred]:
            mapping = dict(zip(params, atom.args))
            for var in prefix:
                mapping[var] = self.fresh()
            yield [_rename(a, mapping) for a in body]

    def solve(self, pending: list, env: dict, remaining: frozenset) -> bool:
        self.tick()
        spatial = 0
        rest = []
        for a in pending:
            if isinstance(a, TheoryAtom):
                if all(x in env for x in a.args):
                    if not self.theory.holds(a.pred, tuple(env[x] for x in a.args)):
                        return False
                    continue
            else:
                spatial += 1
            rest.append(a)
        if spatial > len(remaining):
            return False
        if not rest:
            return not remaining
        pending = rest

        # deterministic step: points-to with a known source
        for i, a in enumerate(pending):
            if isinstance(a, PointsTo) and a.src in env:
                loc = env[a.src]
                if loc not in remaining:
                    return False
                cell = self.heap[loc]
                new_env = env
                for var, value in zip(a.targets, cell):
                    bound = new_env.get(var)
                    if bound is None:
                        if new_env is env:
                            new_env = dict(env)
                        new_env[var] = value
                    elif bound != value:
                        return False
                return self.solve(pending[:i] + pending[i + 1:], new_env, remaining - {loc})

        # predicate atom with a known root: branch over rules
        for i, a in enumerate(pending):
            if isinstance(a, PredAtom) and a.args[0] in env:
                if env[a.args[0]] not in remaining:
                    return False
                others = pending[:i] + pending[i + 1:]
                return any(self.solve(body + others, env, remaining) for body in self.unfold(a))

        # unknown root: it must be one of the remaining cells
        for i, a in enumerate(pending):
            if isinstance(a, (PointsTo, PredAtom)):
                root = a.src if isinstance(a, PointsTo) else a.args[0]
                for loc in sorted(remaining):
                    if self.solve(pending, {**env, root: loc}, remaining):
                        return True
                return False

        # only theory atoms with unbound arguments remain
        a = pending[0]
        var = next(x for x in a.args if x not in env)
        return any(self.solve(pending, {**env, var: loc}, remaining) for loc in self.domain)


def _rename(a, mapping):
    get = mapping.get
    if isinstance(a, PointsTo):
        return PointsTo(get(a.src, a.src), tuple(get(t, t) for t in a.targets))
    return type(a)(a.pred, tuple(get(t, t) for t in a.args))


def model_check(
    structure: Structure,
    formula: Formula,
    sid: SID,
    th="equality",
    extra_locations: int = 1,
    budget: int | None = None,
) -> bool:
    """Decide ``structure |= formula`` under the rules of ``sid``."""
    th = theory(th)
    missing = fv(formula) - set(structure.store)
    if missing:
        raise ValueError(f"store is undefined on {sorted(missing)}")
    compiled = _compile(sid, [formula])
    search = _Search(
        compiled,
        th,
        structure.heap,
        structure.candidate_domain(extra_locations),
        budget_from_env() if budget is None else budget,
    )
    heap = frozenset(structure.heap)
    for prefix, body in dnf_parts(formula):
        mapping = {var: search.fresh() for var in prefix}
        pending = [_rename(a, mapping) for a in body]
        if search.solve(pending, dict(structure.store), heap):
            return True
    return False


def satisfies_any(structure, formulas, sid, th="equality", extra_locations=1, budget=None) -> bool:
    return any(model_check(structure, f, sid, th, extra_locations, budget) for f in formulas)


def check_countermodel(
    structure: Structure, sq: Sequent, extra_locations: int = 1, budget: int | None = None
) -> bool:
    """Injective store, model of the left side, model of no right formula."""
    missing = sq.free_vars() - set(structure.store)
    if missing:
        raise ValueError(f"store is undefined on {sorted(missing)}")
    if not structure.is_injective():
        return False
    if not model_check(structure, sq.lhs, sq.sid, sq.theory, extra_locations, budget):
        return False
    return not satisfies_any(structure, sq.rhs, sq.sid, sq.theory, extra_locations, budget)
