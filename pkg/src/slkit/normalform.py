"""Prenex form, symbolic-heap DNF, one-step unfolding and predicate dependencies."""

from __future__ import annotations

from typing import Iterable

from .syntax import (
    ATOM_TYPES,
    DEFAULT_FRESH,
    SID,
    Emp,
    Exists,
    FreshNames,
    Formula,
    Or,
    PredAtom,
    Rule,
    Star,
    UnknownPredicate,
    all_vars,
    apply_subst,
    atoms,
    conjuncts,
    exists,
    fv,
    star,
    strip_exists,
)


def prenex(f: Formula, fresh: FreshNames | None = None) -> Formula:
    """Pull every quantifier to the front.

    Left operands contribute their quantifiers first; a binder is renamed
    when it occurs free in the sibling operand or clashes with an earlier
    binder.
    """
    fresh = fresh or DEFAULT_FRESH
    prefix, matrix = _prenex(f, fresh)
    return exists(prefix, matrix)


def _prenex(f: Formula, fresh: FreshNames) -> tuple[list[str], Formula]:
    if isinstance(f, Exists):
        prefix, matrix = _prenex(f.body, fresh)
        if f.var in prefix:
            # shadowed by an inner binder, so it binds nothing in the matrix
            return [fresh(f.var)] + prefix, matrix
        return [f.var] + prefix, matrix
    if isinstance(f, (Star, Or)):
        lp, lm = _prenex(f.left, fresh)
        rp, rm = _prenex(f.right, fresh)
        lp, lm = _separate(lp, lm, fv(rm) - set(rp) | set(rp), fresh)
        rp, rm = _separate(rp, rm, fv(lm) - set(lp) | set(lp), fresh)
        return lp + rp, type(f)(lm, rm)
    return [], f


def _separate(prefix, matrix, taken, fresh):
    """Rename binders of ``prefix`` that appear in ``taken``."""
    renaming = {}
    new_prefix = []
    for var in prefix:
        if var in taken:
            renaming[var] = fresh(var)
            new_prefix.append(renaming[var])
        else:
            new_prefix.append(var)
    if renaming:
        matrix = apply_subst(matrix, renaming, fresh=fresh)
    return new_prefix, matrix


def dnf_parts(f: Formula, fresh: FreshNames | None = None) -> list[tuple[list[str], list]]:
    """Disjuncts of ``f`` as (existential prefix, atom list) pairs."""
    fresh = fresh or DEFAULT_FRESH
    return _dnf(f, fresh)


def _dnf(f: Formula, fresh: FreshNames) -> list[tuple[list[str], list]]:
    if isinstance(f, Emp):
        return [([], [])]
    if isinstance(f, ATOM_TYPES):
        return [([], [f])]
    if isinstance(f, Or):
        return _dnf(f.left, fresh) + _dnf(f.right, fresh)
    if isinstance(f, Exists):
        result = []
        for prefix, body in _dnf(f.body, fresh):
            var = f.var
            if var in prefix:
                # shadowed by an inner binder, so it binds nothing here
                var = fresh(var)
            result.append(([var] + prefix, body))
        return result
    if isinstance(f, Star):
        result = []
        for lp, la in _dnf(f.left, fresh):
            for rp, ra in _dnf(f.right, fresh):
                left_free = _free_of(lp, la)
                right_free = _free_of(rp, ra)
                lp2, la2 = _separate_atoms(lp, la, right_free | set(rp), fresh)
                rp2, ra2 = _separate_atoms(rp, ra, left_free | set(lp2), fresh)
                result.append((lp2 + rp2, la2 + ra2))
        return result
    raise TypeError(f"not a formula: {f!r}")


def _free_of(prefix, body) -> set[str]:
    names = set()
    for a in body:
        names |= fv(a)
    return names - set(prefix)


def _rename_atoms(body, renaming):
    return [apply_subst(a, renaming) for a in body]


def _separate_atoms(prefix, body, taken, fresh):
    renaming = {}
    new_prefix = []
    for var in prefix:
        if var in taken:
            renaming[var] = fresh(var)
            new_prefix.append(renaming[var])
        else:
            new_prefix.append(var)
    if renaming:
        body = _rename_atoms(body, renaming)
    return new_prefix, body


def dnf_symbolic_heaps(f: Formula, fresh: FreshNames | None = None) -> list[Formula]:
    """Symbolic heaps whose disjunction is equivalent to ``f``."""
    return [exists(prefix, star(*body)) for prefix, body in dnf_parts(f, fresh)]


def symbolic_heap_parts(f: Formula) -> tuple[list[str], list]:
    """Split a symbolic heap into its prefix and atom list."""
    prefix, matrix = strip_exists(f)
    return prefix, conjuncts(matrix)


def instantiate_rule(rule: Rule, args, avoid: Iterable[str] = (), fresh: FreshNames | None = None) -> Formula:
    """Body of ``rule`` with parameters replaced by ``args``.

    Bound variables of the body that clash with ``args`` or ``avoid`` are
    renamed first.
    """
    fresh = fresh or DEFAULT_FRESH
    body = rule.body
    taken = set(args) | set(avoid)
    clash = {}
    for sub_var in _binders(body):
        if sub_var in taken or sub_var in clash:
            clash[sub_var] = fresh(sub_var)
    if clash:
        body = _rename_binders(body, clash)
    return apply_subst(body, dict(zip(rule.params, args)), fresh=fresh)


def _binders(f: Formula) -> list[str]:
    out = []
    if isinstance(f, Exists):
        out.append(f.var)
        out += _binders(f.body)
    elif isinstance(f, (Star, Or)):
        out += _binders(f.left) + _binders(f.right)
    return out


def _rename_binders(f: Formula, clash: dict[str, str]) -> Formula:
    if isinstance(f, Exists):
        if f.var in clash:
            new = clash[f.var]
            return Exists(new, _rename_binders(apply_subst(f.body, {f.var: new}), clash))
        return Exists(f.var, _rename_binders(f.body, clash))
    if isinstance(f, (Star, Or)):
        return type(f)(_rename_binders(f.left, clash), _rename_binders(f.right, clash))
    return f


def unfold_once(f: Formula, sid: SID, fresh: FreshNames | None = None) -> list[Formula]:
    """All formulas obtained by replacing one predicate atom by a rule body.

    Atoms are visited left to right and, for each atom, rules in SID order.
    """
    fresh = fresh or DEFAULT_FRESH
    context_vars = all_vars(f)
    results: list[Formula] = []

    def walk(g: Formula):
        """Yield (rebuild function, atom) for each predicate atom."""
        if isinstance(g, PredAtom):
            yield (lambda new: new), g
        elif isinstance(g, (Star, Or)):
            for rebuild, atom in walk(g.left):
                yield (lambda new, rb=rebuild, g=g: type(g)(rb(new), g.right)), atom
            for rebuild, atom in walk(g.right):
                yield (lambda new, rb=rebuild, g=g: type(g)(g.left, rb(new))), atom
        elif isinstance(g, Exists):
            for rebuild, atom in walk(g.body):
                yield (lambda new, rb=rebuild, g=g: Exists(g.var, rb(new))), atom

    for rebuild, atom in walk(f):
        if atom.pred not in sid.arities:
            raise UnknownPredicate(atom.pred)
        for rule in sid.rules_for(atom.pred):
            results.append(rebuild(instantiate_rule(rule, atom.args, context_vars, fresh)))
    return results


def depends_on(sid: SID) -> dict[str, frozenset[str]]:
    """Reflexive-transitive closure of "q occurs in a rule for p"."""
    direct: dict[str, set[str]] = {p: set() for p in sid.arities}
    for rule in sid.rules:
        for a in atoms(rule.body):
            if isinstance(a, PredAtom):
                direct.setdefault(rule.pred, set()).add(a.pred)
                direct.setdefault(a.pred, set())
    closure = {}
    for p in direct:
        seen = {p}
        stack = [p]
        while stack:
            for q in direct[stack.pop()]:
                if q not in seen:
                    seen.add(q)
                    stack.append(q)
        closure[p] = frozenset(seen)
    return closure


def reachable_predicates(formulas: Iterable[Formula], sid: SID) -> set[str]:
    deps = depends_on(sid)
    found: set[str] = set()
    for f in formulas:
        for a in atoms(f):
            if isinstance(a, PredAtom):
                found |= deps.get(a.pred, {a.pred})
    return found
