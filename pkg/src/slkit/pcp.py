"""Entailment instances from Post Correspondence Problem instances.

A PCP instance ``(u_1..u_n), (v_1..v_n)`` becomes a sequent over a record
width of 6 whose left side ``W(x, V)`` describes candidate witnesses as
linked lists of position pairs, and whose right side collects the ways a
candidate can fail to be a real solution (predicates ``A``, ``B`` and
``C``).  The sequent has a countermodel exactly when the instance is
solvable.

Naming: the position ``(i, j)`` is the variable ``p_i_j``; the special
variable ``nil`` ends lists.  ``W_i_j_k_l`` stands for W indexed by the
positions (i,j) and (k,l); ``A1`` is A'; ``B_a_b`` and ``C_i_j_k_l_a_b``
carry their counters in the name.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator

from .semantics import Structure, theory
from .syntax import SID, PointsTo, PredAtom, Rule, Sequent, TheoryAtom, exists, star

KAPPA = 6
NIL = "nil"
ROOT = "x"
Position = tuple[int, int]


class InstanceInvariantViolation(ValueError):
    pass


class OffsetOutOfRange(ValueError):
    pass


class NotASolution(ValueError):
    pass


@dataclass(frozen=True)
class PcpInstance:
    u: tuple[str, ...]
    v: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "u", tuple(self.u))
        object.__setattr__(self, "v", tuple(self.v))
        if not self.u or len(self.u) != len(self.v):
            raise InstanceInvariantViolation("need the same positive number of u and v words")
        for word in self.u + self.v:
            if len(word) < 2:
                raise InstanceInvariantViolation(f"word {word!r} is shorter than 2")

    @classmethod
    def parse(cls, tiles: str) -> PcpInstance:
        """Parse ``u1:v1,u2:v2,...``."""
        us, vs = [], []
        for tile in tiles.split(","):
            left, sep, right = tile.strip().partition(":")
            if not sep:
                raise InstanceInvariantViolation(f"tile {tile!r} is not of the form u:v")
            us.append(left)
            vs.append(right)
        return cls(tuple(us), tuple(vs))

    @property
    def n(self) -> int:
        return len(self.u)

    @property
    def m(self) -> int:
        return max(len(w) for w in self.u + self.v)

    def words(self, side: str) -> tuple[str, ...]:
        if side not in ("u", "v"):
            raise ValueError(f"side must be u or v, got {side!r}")
        return self.u if side == "u" else self.v

    def positions(self) -> list[Position]:
        return [(i, j) for i in range(1, self.n + 1) for j in range(1, self.m + 1)]

    def begins(self) -> list[Position]:
        return [(i, 1) for i in range(1, self.n + 1)]

    def ends(self, side: str) -> list[Position]:
        return [(i, len(w)) for i, w in enumerate(self.words(side), 1)]

    def symbol(self, side: str, p: Position) -> str | None:
        i, j = p
        word = self.words(side)[i - 1]
        return word[j - 1] if 1 <= j <= len(word) else None

    def tiles(self) -> str:
        return ",".join(f"{a}:{b}" for a, b in zip(self.u, self.v))


def var(p: Position) -> str:
    return f"p_{p[0]}_{p[1]}"


def match(inst: PcpInstance, p: Position, q: Position) -> bool:
    a, b = inst.symbol("u", p), inst.symbol("v", q)
    return a is not None and a == b


def successors(inst: PcpInstance, side: str, p: Position) -> list[Position]:
    i, j = p
    if not (1 <= i <= inst.n and 1 <= j <= inst.m):
        raise OffsetOutOfRange(f"position {p} is outside 1..{inst.n} x 1..{inst.m}")
    length = len(inst.words(side)[i - 1])
    if j < length:
        return [(i, j + 1)]
    if j == length:
        return inst.begins()
    return []


# ---------------------------------------------------------------------------
# rule families


@dataclass(frozen=True)
class EncodedProblem:
    instance: PcpInstance
    sid: SID
    sequent: Sequent
    variables: tuple[str, ...]


def _w_name(p: Position, q: Position) -> str:
    return f"W_{p[0]}_{p[1]}_{q[0]}_{q[1]}"


def _c_name(p: Position, q: Position, a: int, b: int) -> str:
    return f"C_{p[0]}_{p[1]}_{q[0]}_{q[1]}_{a}_{b}"


def _cell(*targets) -> PointsTo:
    return PointsTo(ROOT, tuple(targets))


def _marks(*names) -> list:
    return [PredAtom("P", (name, NIL)) for name in names]


def _rule(pred, params, prefix, body) -> Rule:
    return Rule(pred, tuple(params), exists(prefix, star(*body)))


def encode(inst: PcpInstance, theory_id: str = "nat_succ") -> EncodedProblem:
    theory(theory_id)
    positions = inst.positions()
    begins = set(inst.begins())
    vvec = tuple(var(p) for p in positions) + (NIL,)
    wvec = vvec + ("y", "y1", "z", "z1", "u", "u1")
    uvec = vvec + ("y", "z", "u")
    head_v = (ROOT,) + vvec
    head_w = (ROOT,) + wvec
    head_u = (ROOT,) + uvec
    dummy = _cell(NIL, NIL, NIL, NIL, NIL, "x1")

    def S(a, b):
        return TheoryAtom("S", (a, b))

    def Sbar(a, b):
        return TheoryAtom("Sbar", (a, b))

    rules: list[Rule] = []
    arities = {"W": len(head_v), "P": 2, "A": len(head_v), "A1": len(head_v), "B": len(head_w), "C": len(head_v)}

    # W: candidate witnesses
    for p in inst.begins():
        arities[_w_name(p, p)] = len(head_v)
        rules.append(_rule("W", head_v, ["x1"], [dummy, PredAtom(_w_name(p, p), ("x1",) + vvec)]))
    for p in positions:
        for q in positions:
            arities[_w_name(p, q)] = len(head_v)
            if not match(inst, p, q):
                continue
            for p2 in successors(inst, "u", p):
                for q2 in successors(inst, "v", q):
                    body = [_cell(var(p), var(q), "y", "z", "u", "x1"), PredAtom(_w_name(p2, q2), ("x1",) + vvec)]
                    rules.append(_rule(_w_name(p, q), head_v, ["x1", "y", "z", "u"], body + _marks("y", "z", "u")))
            if p in inst.ends("u") and q in inst.ends("v") and p[0] == q[0]:
                body = [_cell(var(p), var(q), "y", "z", "u", NIL)] + _marks("y", "z", "u")
                rules.append(_rule(_w_name(p, q), head_v, ["y", "z", "u"], body))
    rules.append(Rule("P", ("x", "y"), PointsTo("x", ("y",) * KAPPA)))

    # A: the first cell breaks the S / Sbar pattern
    rules.append(_rule("A", head_v, ["x1"], [dummy, PredAtom("A1", ("x1",) + vvec)]))
    for p, q, p2, q2 in itertools.product(positions, repeat=4):
        arities[_w_name(p2, q2)] = len(head_v)
        base = [_cell(var(p), var(q), "y", "z", "u", "x1"), PredAtom(_w_name(p2, q2), ("x1",) + vvec)]
        base += _marks("y", "z", "u")
        for guard in (Sbar("y", "z"), S("u", "z")):
            rules.append(_rule("A1", head_v, ["x1", "y", "z", "u"], base + [guard]))

    # B: the pattern holds at some word start but not at the next one
    for guard in (Sbar("y1", "z1"), S("u1", "z1")):
        body = [dummy, PredAtom("B_0_0", ("x1",) + wvec), S("y", "z"), Sbar("u", "z"), guard]
        rules.append(_rule("B", head_w, ["x1"], body))
    counters = [0, 1, 2]
    for a, b in itertools.product(counters, repeat=2):
        arities[f"B_{a}_{b}"] = len(head_w)

    def b_call(a, b):
        return PredAtom(f"B_{a}_{b}", ("x1",) + wvec)

    for a, b in itertools.product(counters, repeat=2):
        for p, q in itertools.product(positions, repeat=2):
            if (a != 1 or p not in begins) and (b != 1 or q not in begins):
                body = [_cell(var(p), var(q), "y2", "z2", "u2", "x1"), b_call(a, b)] + _marks("y2", "z2", "u2")
                rules.append(_rule(f"B_{a}_{b}", head_w, ["x1", "y2", "z2", "u2"], body))
    both = {(0, 0): ("y", "z", "u", 1, 1), (0, 1): ("y", "z1", "u", 1, 2), (1, 0): ("y1", "z", "u1", 2, 1), (1, 1): ("y1", "z1", "u1", 2, 2)}
    for (a, b), (ys, zs, us, a2, b2) in both.items():
        for p, q in itertools.product(sorted(begins), repeat=2):
            body = [_cell(var(p), var(q), ys, zs, us, "x1"), b_call(a2, b2)] + _marks(ys, zs, us)
            rules.append(_rule(f"B_{a}_{b}", head_w, ["x1"], body))
    for a, (ys, us) in ((0, ("y", "u")), (1, ("y1", "u1"))):
        for b in counters:
            for p, q in itertools.product(sorted(begins), positions):
                if b != 1 or q not in begins:
                    body = [_cell(var(p), var(q), ys, "z2", us, "x1"), b_call(a + 1, b)] + _marks(ys, "z2", us)
                    rules.append(_rule(f"B_{a}_{b}", head_w, ["x1", "z2"], body))
    for b, zs in ((0, "z"), (1, "z1")):
        for a in counters:
            for p, q in itertools.product(positions, sorted(begins)):
                if a != 1 or p not in begins:
                    body = [_cell(var(p), var(q), "y2", zs, "u2", "x1"), b_call(a, b + 1)] + _marks("y2", zs, "u2")
                    rules.append(_rule(f"B_{a}_{b}", head_w, ["x1", "y2", "u2"], body))
    for a, b in ((2, 2), (2, 1), (1, 2)):
        for p, q in itertools.product(positions, repeat=2):
            body = [_cell(var(p), var(q), "y2", "z2", "u2", NIL)] + _marks("y2", "z2", "u2")
            rules.append(_rule(f"B_{a}_{b}", head_w, ["y2", "z2", "u2"], body))

    # C: a matched pair of word starts belongs to different tiles
    pairs = [(p, q) for p, q in itertools.product(sorted(begins), repeat=2) if p != q]
    for p, q in pairs:
        body = [dummy, PredAtom(_c_name(p, q, 0, 0), ("x1",) + uvec), S("y", "z"), Sbar("u", "z")]
        rules.append(_rule("C", head_v, ["x1", "y", "z", "u"], body))
    for p, q in pairs:
        for a, b in itertools.product((0, 1), repeat=2):
            arities[_c_name(p, q, a, b)] = len(head_u)

        def c_call(a, b, p=p, q=q):
            return PredAtom(_c_name(p, q, a, b), ("x1",) + uvec)

        for a, b in itertools.product((0, 1), repeat=2):
            for p2, q2 in itertools.product(positions, repeat=2):
                body = [_cell(var(p2), var(q2), "y2", "z2", "u2", "x1"), c_call(a, b)] + _marks("y2", "z2", "u2")
                rules.append(_rule(_c_name(p, q, a, b), head_u, ["x1", "y2", "z2", "u2"], body))
        body = [_cell(var(p), var(q), "y", "z", "u", "x1"), c_call(1, 1)] + _marks("y", "z", "u")
        rules.append(_rule(_c_name(p, q, 0, 0), head_u, ["x1"], body))
        for b in (0, 1):
            for q2 in positions:
                body = [_cell(var(p), var(q2), "y", "z2", "u", "x1"), c_call(1, b)] + _marks("y", "z2", "u")
                rules.append(_rule(_c_name(p, q, 0, b), head_u, ["x1", "z2"], body))
        for a in (0, 1):
            for p2 in positions:
                body = [_cell(var(p2), var(q), "y2", "z", "u2", "x1"), c_call(a, 1)] + _marks("y2", "z", "u2")
                rules.append(_rule(_c_name(p, q, a, 0), head_u, ["x1", "y2", "u2"], body))
        for p2, q2 in itertools.product(positions, repeat=2):
            body = [_cell(var(p2), var(q2), "y2", "z2", "u2", NIL)] + _marks("y2", "z2", "u2")
            rules.append(_rule(_c_name(p, q, 1, 1), head_u, ["y2", "z2", "u2"], body))

    sid = SID(KAPPA, tuple(rules), arities)
    lhs = PredAtom("W", head_v)
    rhs = (
        PredAtom("A", head_v),
        exists(["y", "z", "y1", "z1", "u", "u1"], PredAtom("B", head_w)),
        PredAtom("C", head_v),
    )
    sequent = Sequent(lhs, rhs, sid, theory_id)
    return EncodedProblem(inst, sid, sequent, head_v)


# ---------------------------------------------------------------------------
# witness structures


def alpha(l: int) -> tuple[int, int, int]:
    """The l-th location triple (alpha, alpha', alpha'')."""
    return 3 * l, 3 * l + 1, 3 * l + 2


def check_theory_hypothesis(theory_id: str, k: int) -> bool:
    """The location triples satisfy the hypothesis on S over the first k triples."""
    th = theory(theory_id)
    used = [loc for l in range(1, k + 1) for loc in alpha(l)]
    for l in range(1, k + 1):
        a, a1, a2 = alpha(l)
        if not th.holds("S", (a, a1)) or th.holds("S", (a2, a1)):
            return False
        for loc in used:
            if loc != a and th.holds("S", (a, loc)) and not th.holds("S", (a2, loc)) and loc != a1:
                return False
    return True


def decompose(inst: PcpInstance, side: str, tiles) -> list[Position]:
    words = inst.words(side)
    return [(i, j) for i in tiles for j in range(1, len(words[i - 1]) + 1)]


def chain_structure(inst: PcpInstance, chain: list[tuple[Position, Position]]) -> Structure:
    """The W-model for a chain of position pairs, with location triples at
    word starts: the l-th u-start holds alpha_l (y) and alpha''_l (u), the
    l-th v-start holds alpha'_l (z).  Everything else is fresh."""
    u_starts = sum(1 for p, _ in chain if p[1] == 1)
    v_starts = sum(1 for _, q in chain if q[1] == 1)
    counter = itertools.count(3 * (max(u_starts, v_starts) + 1))
    store = {ROOT: next(counter), NIL: next(counter)}
    for p in inst.positions():
        store[var(p)] = next(counter)
    nil = store[NIL]
    cells = [next(counter) for _ in chain]
    heap = {store[ROOT]: (nil,) * 5 + (cells[0],)}
    lu = lv = 0
    for index, (p, q) in enumerate(chain):
        if p[1] == 1:
            lu += 1
            y, u = alpha(lu)[0], alpha(lu)[2]
        else:
            y, u = next(counter), next(counter)
        if q[1] == 1:
            lv += 1
            z = alpha(lv)[1]
        else:
            z = next(counter)
        following = cells[index + 1] if index + 1 < len(cells) else nil
        heap[cells[index]] = (store[var(p)], store[var(q)], y, z, u, following)
        for mark in (y, z, u):
            heap[mark] = (nil,) * KAPPA
    return Structure(store, heap)


def build_witness_structure(inst: PcpInstance, solution, theory_id: str = "nat_succ") -> Structure:
    theory(theory_id)
    solution = list(solution)
    if not solution:
        raise NotASolution("a solution is a nonempty tile sequence")
    if any(not 1 <= i <= inst.n for i in solution):
        raise NotASolution(f"tile indices must lie in 1..{inst.n}")
    top = "".join(inst.u[i - 1] for i in solution)
    bottom = "".join(inst.v[i - 1] for i in solution)
    if top != bottom:
        raise NotASolution(f"{top!r} differs from {bottom!r}")
    chain = list(zip(decompose(inst, "u", solution), decompose(inst, "v", solution)))
    return chain_structure(inst, chain)


def w_chains(inst: PcpInstance, max_len: int) -> Iterator[list[tuple[Position, Position]]]:
    """Chains of position pairs accepted by W, up to ``max_len`` pairs."""

    def extend(chain):
        p, q = chain[-1]
        if not match(inst, p, q):
            return
        if p in inst.ends("u") and q in inst.ends("v") and p[0] == q[0]:
            yield list(chain)
        if len(chain) < max_len:
            for p2 in successors(inst, "u", p):
                for q2 in successors(inst, "v", q):
                    yield from extend(chain + [(p2, q2)])

    for p in inst.begins():
        yield from extend([(p, p)])


def enumerate_w_models(inst: PcpInstance, theory_id: str = "nat_succ", max_len: int = 6) -> Iterator[Structure]:
    """One canonical model of ``W(x, V)`` per accepted chain (see
    :func:`chain_structure`)."""
    theory(theory_id)
    for chain in w_chains(inst, max_len):
        yield chain_structure(inst, chain)


def solutions(inst: PcpInstance, max_tiles: int) -> Iterator[tuple[int, ...]]:
    """Tile sequences up to ``max_tiles`` long that solve the instance."""
    for k in range(1, max_tiles + 1):
        for seq in itertools.product(range(1, inst.n + 1), repeat=k):
            if "".join(inst.u[i - 1] for i in seq) == "".join(inst.v[i - 1] for i in seq):
                yield seq
