"""Bounded model enumeration and countermodel search.

Models of a formula are generated from its predicate-free unfoldings: each
unfolding with at most ``max_heap`` points-to atoms is instantiated by every
assignment of its variables to locations below ``max_location`` that keeps
the points-to sources distinct and the theory atoms true.

Under the equality theory satisfaction is invariant under location
bijections, so candidate countermodels are generated only in canonical form
(each new location is the least one not used so far).  This is the
symmetry reduction; it never hides a countermodel that fits the bounds.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator

from .normalform import dnf_parts
from .semantics import (
    BudgetExceeded,
    Structure,
    _compile,
    _rename,
    budget_from_env,
    satisfies_any,
    theory,
)
from .syntax import PointsTo, PredAtom, Sequent, TheoryAtom, atom_vars, fv


@dataclass(frozen=True)
class SearchBounds:
    max_heap: int = 4
    max_location: int = 8
    extra_existential_budget: int = 1
    budget: int | None = None

    def __post_init__(self):
        if self.max_heap < 0 or self.max_location < 1 or self.extra_existential_budget < 0:
            raise ValueError("search bounds must be non-negative, with at least one location")

    def node_limit(self) -> int:
        return budget_from_env() if self.budget is None else self.budget


class _Counter:
    def __init__(self, limit: int):
        self.limit = limit
        self.nodes = 0

    def tick(self):
        self.nodes += 1
        if self.nodes > self.limit:
            raise BudgetExceeded(f"search exceeded {self.limit} nodes")


def predicate_free_unfoldings(formula, sid, max_cells: int, counter: _Counter | None = None):
    """Predicate-free symbolic heaps reachable from ``formula``.

    Yields (existential names, atom list).  Requires a progressing SID so
    that every unfolding step adds a points-to atom.
    """
    counter = counter or _Counter(budget_from_env())
    compiled = _compile(sid, [formula])
    names = itertools.count(1)

    def fresh():
        return f"#{next(names)}"

    stack = []
    for prefix, body in reversed(dnf_parts(formula)):
        mapping = {v: fresh() for v in prefix}
        stack.append(([mapping[v] for v in prefix], [_rename(a, mapping) for a in body]))
    while stack:
        counter.tick()
        prefix, body = stack.pop()
        spatial = sum(1 for a in body if not isinstance(a, TheoryAtom))
        if spatial > max_cells:
            continue
        index = next((i for i, a in enumerate(body) if isinstance(a, PredAtom)), None)
        if index is None:
            yield prefix, body
            continue
        atom = body[index]
        rest = body[:index] + body[index + 1:]
        expansions = []
        for params, rule_prefix, rule_body in compiled.bodies[atom.pred]:
            mapping = dict(zip(params, atom.args))
            new_vars = []
            for v in rule_prefix:
                mapping[v] = fresh()
                new_vars.append(mapping[v])
            expansions.append((prefix + new_vars, rest[:index] + [_rename(a, mapping) for a in rule_body] + rest[index:]))
        stack.extend(reversed(expansions))


class _Assigner:
    """Backtracking assignment of the variables of one symbolic heap."""

    def __init__(self, free, prefix, body, th, bounds: SearchBounds, injective: bool, canonical: bool, counter):
        self.theory = th
        self.max_location = bounds.max_location
        self.pure_limit = bounds.max_location + bounds.extra_existential_budget
        self.injective = injective
        self.canonical = canonical
        self.counter = counter
        self.free = list(free)
        self.cells = [a for a in body if isinstance(a, PointsTo)]
        self.pure = [a for a in body if isinstance(a, TheoryAtom)]
        spatial_vars: list[str] = []
        for a in self.cells:
            for x in atom_vars(a):
                if x not in spatial_vars:
                    spatial_vars.append(x)
        order = list(self.free)
        order += [x for x in spatial_vars if x not in order]
        pure_vars = []
        for a in self.pure:
            for x in a.args:
                if x not in order and x not in pure_vars:
                    pure_vars.append(x)
        self.visible = len(order)
        self.order = order + pure_vars
        position = {x: i for i, x in enumerate(self.order)}
        # constraints become checkable at the largest index among their variables
        self.checks: list[list] = [[] for _ in self.order]
        for a in self.pure:
            idx = max((position[x] for x in a.args), default=-1)
            if idx < 0:
                if not th.holds(a.pred, ()):
                    self.order = None
                    return
            else:
                self.checks[idx].append(("theory", a))
        for c1, c2 in itertools.combinations(self.cells, 2):
            idx = max(position[c1.src], position[c2.src])
            self.checks[idx].append(("distinct", c1.src, c2.src))
        if injective:
            for x, y in itertools.combinations(self.free, 2):
                self.checks[max(position[x], position[y])].append(("distinct", x, y))

    def assignments(self) -> Iterator[dict[str, int]]:
        if self.order is None:
            return
        env: dict[str, int] = {}
        yield from self._walk(0, env, 0)

    def _ok(self, idx, env) -> bool:
        for check in self.checks[idx]:
            if check[0] == "theory":
                a = check[1]
                if not self.theory.holds(a.pred, tuple(env[x] for x in a.args)):
                    return False
            elif env[check[1]] == env[check[2]]:
                return False
        return True

    def _walk(self, idx, env, next_label):
        self.counter.tick()
        if idx == len(self.order):
            yield dict(env)
            return
        var = self.order[idx]
        visible = idx < self.visible
        if self.canonical:
            limit = next_label + 1
            if visible:
                limit = min(limit, self.max_location)
            candidates = range(limit)
        else:
            candidates = range(self.max_location if visible else self.pure_limit)
        for value in candidates:
            env[var] = value
            if self._ok(idx, env):
                yield from self._walk(idx + 1, env, max(next_label, value + 1))
            del env[var]


def _structure(free, env, cells) -> Structure:
    return Structure(
        {x: env[x] for x in free},
        {env[c.src]: tuple(env[t] for t in c.targets) for c in cells},
    )


def _generate(formula, sid, th, free, bounds: SearchBounds, injective: bool, canonical: bool) -> set[Structure]:
    counter = _Counter(bounds.node_limit())
    found: set[Structure] = set()
    for prefix, body in predicate_free_unfoldings(formula, sid, bounds.max_heap, counter):
        assigner = _Assigner(free, prefix, body, th, bounds, injective, canonical, counter)
        for env in assigner.assignments():
            found.add(_structure(free, env, assigner.cells))
    return found


def _relabelings(s: Structure, max_location: int) -> Iterator[Structure]:
    labels = sorted(s.locs() | set(s.store.values()))
    for image in itertools.permutations(range(max_location), len(labels)):
        f = dict(zip(labels, image))
        yield Structure(
            {x: f[v] for x, v in s.store.items()},
            {f[k]: tuple(f[t] for t in cell) for k, cell in s.heap.items()},
        )


def enumerate_models(formula, sid, th="equality", bounds: SearchBounds | None = None, free=None) -> Iterator[Structure]:
    """Every structure within bounds satisfying ``formula``.

    The store is defined exactly on ``free`` (default: the free variables of
    the formula).  Output is sorted, hence deterministic.
    """
    bounds = bounds or SearchBounds()
    th = theory(th)
    free = sorted(fv(formula) if free is None else free)
    if th.id == "equality":
        found = set()
        for s in _generate(formula, sid, th, free, bounds, injective=False, canonical=True):
            found.update(_relabelings(s, bounds.max_location))
    else:
        found = _generate(formula, sid, th, free, bounds, injective=False, canonical=False)
    return iter(sorted(found, key=Structure.sort_key))


def candidate_countermodels(sq: Sequent, bounds: SearchBounds) -> list[Structure]:
    """Models of the left side with injective stores, in search order."""
    th = theory(sq.theory)
    free = sorted(sq.free_vars())
    canonical = th.id == "equality"
    found = _generate(sq.lhs, sq.sid, th, free, bounds, injective=True, canonical=canonical)
    return sorted(found, key=Structure.sort_key)


def _refutes(args) -> bool:
    structure, sq, extra, budget = args
    return not satisfies_any(structure, sq.rhs, sq.sid, sq.theory, extra, budget)


def countermodel_search(sq: Sequent, bounds: SearchBounds | None = None, jobs: int = 1) -> Structure | None:
    """First countermodel in search order, or None if there is none within bounds.

    ``None`` is not a validity verdict: larger bounds may still reveal one.
    """
    bounds = bounds or SearchBounds()
    candidates = candidate_countermodels(sq, bounds)
    extra = bounds.max_location
    budget = bounds.node_limit()
    if jobs > 1 and len(candidates) > 1:
        jobs = min(jobs, os.cpu_count() or 1)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunk = max(1, len(candidates) // (jobs * 8))
            results = pool.map(_refutes, ((s, sq, extra, budget) for s in candidates), chunksize=chunk)
            for s, refuted in zip(candidates, results):
                if refuted:
                    return s
        return None
    for s in candidates:
        if _refutes((s, sq, extra, budget)):
            return s
    return None


def all_structures(free: Iterable[str], kappa: int, max_heap: int, max_location: int) -> Iterator[Structure]:
    """Every structure with the given store domain within bounds (test helper)."""
    free = sorted(free)
    locations = range(max_location)
    cells = list(itertools.product(locations, repeat=kappa))
    for values in itertools.product(locations, repeat=len(free)):
        store = dict(zip(free, values))
        for n in range(max_heap + 1):
            for dom in itertools.combinations(locations, n):
                for image in itertools.product(cells, repeat=n):
                    yield Structure(store, dict(zip(dom, image)))
