"""Alloc-compatibility by predicate splitting, and elimination of
equations and disequations from established sequents.

The pipeline is::

    step1 -> step2 -> step3 -> make_alloc_compatible -> step4

Every stage takes and returns a :class:`~slkit.syntax.Sequent`.  Formulas
leave each stage as disjunctions of symbolic heaps and rule bodies as
symbolic heaps.  Generated predicate names are deterministic:

* ``p%m1_2_1`` is ``p`` with its first and third arguments merged;
* ``p%a1_3`` is the copy of ``p`` that allocates exactly positions 1 and 3
  (``p%a`` allocates none of them).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

from .conditions import (
    AllocMap,
    UnionFind,
    alloc_vars,
    check_connectivity,
    check_establishment,
    check_progress,
    established_positions,
    is_alloc_compatible,
)
from .normalform import dnf_parts, reachable_predicates, symbolic_heap_parts
from .syntax import (
    EQ,
    NEQ,
    SID,
    Exists,
    Formula,
    FreshNames,
    PointsTo,
    PredAtom,
    Rule,
    Sequent,
    Star,
    TheoryAtom,
    all_vars,
    apply_subst,
    atoms,
    disj,
    exists,
    fv,
    neq,
    rename_atom,
    size,
    star,
    width,
)


class TransformError(ValueError):
    pass


class NotPcSID(TransformError):
    pass


class NotEstablished(TransformError):
    pass


class MissingAllocMap(TransformError):
    pass


Part = tuple[list[str], list]


def session_fresh(sq: Sequent) -> FreshNames:
    """A fresh-name supply owned by one transformation run."""
    names = set()
    for f in sq.formulas:
        names |= all_vars(f)
    for rule in sq.sid.rules:
        names |= set(rule.params) | all_vars(rule.body)
    return FreshNames(names)


def contradiction(kappa: int) -> Formula:
    """An unsatisfiable spatial formula: one location allocated twice."""
    cell = PointsTo("c", ("c",) * kappa)
    return Exists("c", Star(cell, cell))


def is_contradiction(f: Formula, kappa: int) -> bool:
    return f == contradiction(kappa)


def _join(parts: list[Part], kappa: int) -> Formula:
    if not parts:
        return contradiction(kappa)
    return disj(*(exists(prefix, star(*body)) for prefix, body in parts))


def _parts(f: Formula, fresh: FreshNames) -> list[Part]:
    return [(list(p), list(b)) for p, b in dnf_parts(f, fresh)]


def _rename(a, mapping):
    return rename_atom(a, lambda v: mapping.get(v, v))


def _extend(a, extra):
    if isinstance(a, PredAtom):
        return PredAtom(a.pred, a.args + tuple(extra))
    return a


def _map_formulas(sq: Sequent, fn, kappa: int):
    """Apply ``fn`` to the parts of every formula; drop emptied right sides."""
    lhs = _join(fn(sq.lhs), kappa)
    rhs = []
    for f in sq.rhs:
        parts = fn(f)
        if parts:
            rhs.append(_join(parts, kappa))
    return lhs, tuple(rhs)


# ---------------------------------------------------------------------------
# Step 1: symbolic heaps and uniform extra parameters


def step1(sq: Sequent, fresh: FreshNames | None = None) -> Sequent:
    """Normalise to symbolic heaps and thread the free variables through
    every predicate as extra trailing parameters."""
    fresh = fresh or session_fresh(sq)
    kappa = sq.sid.kappa
    extra = sorted(sq.free_vars())

    def formula_parts(f):
        if is_contradiction(f, kappa):
            return []
        return [(p, [_extend(a, extra) for a in b]) for p, b in _parts(f, fresh)]

    lhs, rhs = _map_formulas(sq, formula_parts, kappa)
    rules = []
    for rule in sq.sid.rules:
        used = set(rule.params) | all_vars(rule.body)
        params = [v if v not in used else fresh(v) for v in extra]
        for prefix, body in _parts(rule.body, fresh):
            rules.append(
                Rule(rule.pred, rule.params + tuple(params), exists(prefix, star(*[_extend(a, params) for a in body])))
            )
    arities = {p: n + len(extra) for p, n in sq.sid.arities.items()}
    return Sequent(lhs, rhs, SID(kappa, tuple(rules), arities), sq.theory)


# ---------------------------------------------------------------------------
# Step 2: existential equations and instantiation of existentials


def eliminate_existential_equations(prefix, body) -> Part:
    """Rewrite ``EX x . (x = y * phi)`` into ``phi[y/x]`` until none is left."""
    prefix, body = list(prefix), list(body)
    progress = True
    while progress:
        progress = False
        for i, a in enumerate(body):
            if not (isinstance(a, TheoryAtom) and a.pred == EQ):
                continue
            left, right = a.args
            if left == right and left in prefix:
                del body[i]
                progress = True
                break
            if left != right and (left in prefix or right in prefix):
                x, y = (left, right) if left in prefix else (right, left)
                del body[i]
                body = [_rename(b, {x: y}) for b in body]
                prefix.remove(x)
                progress = True
                break
    return prefix, body


def instantiate_existentials(prefix, body, free) -> list[Part]:
    """Disjuncts over idempotent merges of existentials, each closed by
    disequations among the survivors and against ``free``.

    Each existential is kept, mapped to a free variable, or mapped to an
    earlier kept existential; the choices are tried in that order.
    """
    results: list[Part] = []

    def walk(i, sigma, kept):
        if i == len(prefix):
            new_body = [_rename(a, sigma) for a in body]
            for j, z in enumerate(kept):
                new_body += [neq(z, z2) for z2 in kept[j + 1:]]
                new_body += [neq(z, x) for x in free]
            results.append((list(kept), new_body))
            return
        y = prefix[i]
        walk(i + 1, sigma, kept + [y])
        for target in list(free) + kept:
            walk(i + 1, {**sigma, y: target}, kept)

    walk(0, {}, [])
    return results


def _step2_part(prefix, body, free_of) -> list[Part]:
    prefix, body = eliminate_existential_equations(prefix, body)
    return instantiate_existentials(prefix, body, free_of(prefix, body))


def _sorted_free(prefix, body):
    names = set()
    for a in body:
        names |= fv(a)
    return sorted(names - set(prefix))


def step2(sq: Sequent, fresh: FreshNames | None = None) -> Sequent:
    fresh = fresh or session_fresh(sq)
    kappa = sq.sid.kappa

    def formula_parts(f):
        if is_contradiction(f, kappa):
            return []
        out = []
        for prefix, body in _parts(f, fresh):
            out += _step2_part(prefix, body, _sorted_free)
        return out

    lhs, rhs = _map_formulas(sq, formula_parts, kappa)
    rules = []
    for rule in sq.sid.rules:
        for prefix, body in _parts(rule.body, fresh):
            for p2, b2 in _step2_part(prefix, body, lambda _p, _b: list(rule.params)):
                rules.append(Rule(rule.pred, rule.params, exists(p2, star(*b2))))
    return Sequent(lhs, rhs, SID(kappa, tuple(rules), sq.sid.arities), sq.theory)


# ---------------------------------------------------------------------------
# Step 3: collapse repeated arguments, drop equations


def merge_pattern(args) -> tuple[tuple[int, ...], list[str]]:
    """Class index of every position (by first occurrence) and the distinct args."""
    distinct: list[str] = []
    pattern = []
    for x in args:
        if x not in distinct:
            distinct.append(x)
        pattern.append(distinct.index(x))
    return tuple(pattern), distinct


def merged_name(base: str, pattern) -> str:
    return f"{base}%m" + "_".join(str(k + 1) for k in pattern)


class _Collapser:
    def __init__(self, sid: SID, fresh: FreshNames):
        self.sid = sid
        self.fresh = fresh
        self.origin: dict[str, tuple[str, tuple[int, ...]]] = {}
        self.queue: list[str] = []

    def atom(self, a):
        if not isinstance(a, PredAtom) or len(set(a.args)) == len(a.args):
            return a
        base, outer = self.origin.get(a.pred, (a.pred, None))
        base_args = [a.args[k] for k in outer] if outer else list(a.args)
        pattern, distinct = merge_pattern(base_args)
        name = merged_name(base, pattern)
        if name not in self.origin:
            self.origin[name] = (base, pattern)
            self.queue.append(name)
        return PredAtom(name, tuple(distinct))

    def merged_rules(self, name: str) -> list[Rule]:
        base, pattern = self.origin[name]
        out = []
        for rule in self.sid.rules_for(base):
            firsts = {}
            for i, k in enumerate(pattern):
                firsts.setdefault(k, i)
            theta = {y: rule.params[firsts[pattern[i]]] for i, y in enumerate(rule.params)}
            params = tuple(rule.params[firsts[k]] for k in sorted(firsts))
            out.append(Rule(name, params, apply_subst(rule.body, theta, fresh=self.fresh)))
        return out


def _clean_rule_body(body) -> list | None:
    """Drop trivial equations; None when the rule must be deleted."""
    out = []
    for a in body:
        if isinstance(a, TheoryAtom) and a.pred in (EQ, NEQ):
            same = a.args[0] == a.args[1]
            if a.pred == EQ and same:
                continue
            if a.pred == EQ or same:
                return None
        if isinstance(a, TheoryAtom) and a in out:
            continue
        out.append(a)
    return out


def step3(sq: Sequent, fresh: FreshNames | None = None) -> Sequent:
    fresh = fresh or session_fresh(sq)
    kappa = sq.sid.kappa
    collapse = _Collapser(sq.sid, fresh)

    def formula_parts(f):
        if is_contradiction(f, kappa):
            return []
        out = []
        for prefix, body in _parts(f, fresh):
            cleaned = _clean_rule_body([collapse.atom(a) for a in body])
            if cleaned is not None:
                out.append((prefix, cleaned))
        return out

    lhs, rhs = _map_formulas(sq, formula_parts, kappa)

    def finish(rule: Rule):
        prefix, body = symbolic_heap_parts(rule.body)
        cleaned = _clean_rule_body([collapse.atom(a) for a in body])
        if cleaned is not None:
            rules.append(Rule(rule.pred, rule.params, exists(prefix, star(*cleaned))))

    rules: list[Rule] = []
    for rule in sq.sid.rules:
        finish(rule)
    done = 0
    while done < len(collapse.queue):
        name = collapse.queue[done]
        done += 1
        for rule in collapse.merged_rules(name):
            finish(rule)
    arities = dict(sq.sid.arities)
    for name, (_, pattern) in collapse.origin.items():
        arities[name] = len(set(pattern))
    return Sequent(lhs, rhs, SID(kappa, tuple(rules), arities), sq.theory)


# ---------------------------------------------------------------------------
# alloc-compatibility


def alloc_name(pred: str, allocated) -> str:
    return f"{pred}%a" + "_".join(str(i) for i in sorted(allocated))


def _set_key(s):
    return (len(s), sorted(s))


def require_pc_established(sid: SID) -> None:
    for report in (check_progress(sid), check_connectivity(sid)):
        if not report.ok:
            raise NotPcSID(f"{report.name} fails: {report.violations[0].reason}")
    report = check_establishment(sid)
    if not report.ok:
        raise NotEstablished(report.violations[0].reason)


def realizable_allocations(sid: SID) -> dict[str, set[frozenset[int]]]:
    """Least fixpoint of the parameter sets allocated by some unfolding."""
    shapes = []
    for rule in sid.rules:
        prefix, body = symbolic_heap_parts(rule.body)
        shapes.append((rule, body))
    options: dict[str, set[frozenset[int]]] = {p: set() for p in sid.arities}
    changed = True
    while changed:
        changed = False
        for rule, body in shapes:
            preds = [a for a in body if isinstance(a, PredAtom)]
            for combo in itertools.product(*[sorted(options[a.pred], key=_set_key) for a in preds]):
                got = _positions(rule, body, dict(zip(range(len(preds)), combo)), preds)
                if got not in options[rule.pred]:
                    options[rule.pred].add(got)
                    changed = True
    return options


def _positions(rule, body, choice, preds) -> frozenset[int]:
    allocated = {a.src for a in body if isinstance(a, PointsTo)}
    for k, a in enumerate(preds):
        for j in choice[k]:
            allocated.add(a.args[j - 1])
    return frozenset(i + 1 for i, x in enumerate(rule.params) if x in allocated)


def make_alloc_compatible(
    sq: Sequent, fresh: FreshNames | None = None, prune: bool = False
) -> tuple[Sequent, AllocMap]:
    """Split every predicate ``p`` into copies ``p_A`` that allocate exactly
    the positions in ``A``; formulas take the disjunction over the copies."""
    fresh = fresh or session_fresh(sq)
    sid = sq.sid
    kappa = sid.kappa
    require_pc_established(sid)
    options = realizable_allocations(sid)
    ordered = {p: sorted(options[p], key=_set_key) for p in options}

    rules = []
    for rule in sid.rules:
        prefix, body = symbolic_heap_parts(rule.body)
        preds = [a for a in body if isinstance(a, PredAtom)]
        for combo in itertools.product(*[ordered[a.pred] for a in preds]):
            allocated = _positions(rule, body, dict(enumerate(combo)), preds)
            names = iter(alloc_name(a.pred, s) for a, s in zip(preds, combo))
            new_body = [PredAtom(next(names), a.args) if isinstance(a, PredAtom) else a for a in body]
            rules.append(Rule(alloc_name(rule.pred, allocated), rule.params, exists(prefix, star(*new_body))))

    def formula_parts(f):
        if is_contradiction(f, kappa):
            return []
        out = []
        for prefix, body in _parts(f, fresh):
            choices = [ordered[a.pred] if isinstance(a, PredAtom) else [None] for a in body]
            for combo in itertools.product(*choices):
                out.append(
                    (prefix, [PredAtom(alloc_name(a.pred, s), a.args) if s is not None else a for a, s in zip(body, combo)])
                )
        return out

    lhs, rhs = _map_formulas(sq, formula_parts, kappa)
    arities = {alloc_name(p, s): sid.arities[p] for p in ordered for s in ordered[p]}
    alloc = AllocMap({alloc_name(p, s): s for p in ordered for s in ordered[p]})
    new_sid = SID(kappa, tuple(rules), arities)
    if prune:
        keep = reachable_predicates([lhs, *rhs], new_sid)
        new_sid = SID(kappa, tuple(r for r in rules if r.pred in keep), {p: arities[p] for p in keep})
        alloc = AllocMap({p: alloc.mapping[p] for p in keep})
    return Sequent(lhs, rhs, new_sid, sq.theory), alloc


# ---------------------------------------------------------------------------
# Step 4: allocate every free variable, drop disequations


def _double_allocation(body, alloc) -> bool:
    seen = set()
    for a in body:
        if isinstance(a, PointsTo):
            names = [a.src]
        elif isinstance(a, PredAtom):
            names = [a.args[j - 1] for j in alloc.get(a.pred, ())]
        else:
            continue
        for x in names:
            if x in seen:
                return True
            seen.add(x)
    return False


def step4(sq: Sequent, alloc: AllocMap | None, fresh: FreshNames | None = None) -> Sequent:
    if alloc is None or not is_alloc_compatible(sq.sid, alloc):
        raise MissingAllocMap("step 4 needs an alloc-compatible rule set and its alloc map")
    fresh = fresh or session_fresh(sq)
    kappa = sq.sid.kappa + 1
    names = set()
    for f in sq.formulas:
        names |= all_vars(f)
    u = "u" if "u" not in names else fresh("u")
    free = sorted(sq.free_vars() - {u})
    if free:
        u1 = free[0]
    else:
        u1 = "v" if "v" not in names else fresh("v")
        free = [u1]
    order = [u] + free
    filler = (u1,) * kappa

    def extend(a, extra):
        if isinstance(a, PointsTo):
            return PointsTo(a.src, a.targets + (extra,))
        return _extend(a, (extra,))

    def formula_parts(f):
        if is_contradiction(f, kappa - 1):
            return []
        out = []
        for prefix, body in _parts(f, fresh):
            new = [extend(a, u) for a in body if not (isinstance(a, TheoryAtom) and a.pred == NEQ)]
            allocated = alloc_vars(new, alloc) - set(prefix)
            new += [PointsTo(x, filler) for x in order if x not in allocated]
            if not _double_allocation(new, alloc):
                out.append((prefix, new))
        return out

    lhs, rhs = _map_formulas(sq, formula_parts, kappa)
    rules = []
    for rule in sq.sid.rules:
        used = set(rule.params) | all_vars(rule.body)
        ru = "u" if "u" not in used else fresh("u")
        prefix, body = symbolic_heap_parts(rule.body)
        new = [extend(a, ru) for a in body if not (isinstance(a, TheoryAtom) and a.pred == NEQ)]
        rules.append(Rule(rule.pred, rule.params + (ru,), exists(prefix, star(*new))))
    arities = {p: n + 1 for p, n in sq.sid.arities.items()}
    return Sequent(lhs, rhs, SID(kappa, tuple(rules), arities), sq.theory)


# ---------------------------------------------------------------------------
# the whole pipeline


def unallocated_formula_existentials(sq: Sequent) -> list[tuple[str, str]]:
    """Existentials of the sequent's own formulas that no atom allocates."""
    est = established_positions(sq.sid)
    missing = []
    for f in sq.formulas:
        for prefix, body in dnf_parts(f):
            uf = UnionFind()
            for a in body:
                if isinstance(a, TheoryAtom) and a.pred == EQ:
                    uf.union(*a.args)
            allocated = {uf.find(x) for x in alloc_vars(body, est)}
            for y in prefix:
                if uf.find(y) not in allocated:
                    missing.append((y, str(f)))
    return missing


@dataclass(frozen=True)
class PipelineTrace:
    snapshots: tuple[tuple[str, Sequent], ...]
    alloc: AllocMap

    def metrics(self) -> list[dict]:
        return [
            {"step": name, "width": width(sq), "size": size(sq), "rules": len(sq.sid.rules)}
            for name, sq in self.snapshots
        ]

    def write(self, directory) -> None:
        from .parser import ProblemFile, print_problem

        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for i, (name, sq) in enumerate(self.snapshots):
            (directory / f"{i}-{name}.sid").write_text(print_problem(ProblemFile.from_sequent(sq)))
        (directory / "metrics.json").write_text(json.dumps({"schema": 1, "steps": self.metrics()}, indent=2) + "\n")


def eliminate_equalities(sq: Sequent) -> tuple[Sequent, PipelineTrace]:
    """Equivalent sequent without equations or disequations.

    Needs a progressing, connected, established rule set whose formulas
    allocate their own existentials.  Runs in exponential time.
    """
    require_pc_established(sq.sid)
    loose = unallocated_formula_existentials(sq)
    if loose:
        var, f = loose[0]
        raise NotEstablished(f"existential {var} of {f} is never allocated")
    fresh = session_fresh(sq)
    s1 = step1(sq, fresh)
    s2 = step2(s1, fresh)
    s3 = step3(s2, fresh)
    s4, alloc = make_alloc_compatible(s3, fresh)
    s5 = step4(s4, alloc, fresh)
    snapshots = (("input", sq), ("step1", s1), ("step2", s2), ("step3", s3), ("alloc", s4), ("step4", s5))
    return s5, PipelineTrace(snapshots, alloc)


def equality_atoms(sq: Sequent) -> list:
    """Every equation or disequation left in formulas or rules."""
    found = []
    for f in sq.formulas:
        found += [a for a in atoms(f) if isinstance(a, TheoryAtom) and a.pred in (EQ, NEQ)]
    for rule in sq.sid.rules:
        found += [a for a in atoms(rule.body) if isinstance(a, TheoryAtom) and a.pred in (EQ, NEQ)]
    return found
