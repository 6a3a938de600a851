import itertools

import pytest

from slkit.conditions import check_constrained, check_sid
from slkit.parser import parse_problem, print_sequent
from slkit.pcp import (
    InstanceInvariantViolation,
    NotASolution,
    OffsetOutOfRange,
    PcpInstance,
    build_witness_structure,
    check_theory_hypothesis,
    encode,
    enumerate_w_models,
    match,
    solutions,
    successors,
    w_chains,
)
from slkit.semantics import check_countermodel, model_check
from slkit.syntax import Or, is_symbolic_heap

AB = PcpInstance(("ab",), ("ab",))
THEORIES = ["nat_succ", "nat_leq"]


def test_match():
    assert match(AB, (1, 1), (1, 1))
    assert not match(AB, (1, 1), (1, 2))
    assert not match(PcpInstance(("ab",), ("abb",)), (1, 3), (1, 3))


@pytest.mark.parametrize(
    "inst, p, expected",
    [
        (AB, (1, 1), [(1, 2)]),
        (AB, (1, 2), [(1, 1)]),
        (PcpInstance(("ab", "ba"), ("ab", "ab")), (1, 2), [(1, 1), (2, 1)]),
        (PcpInstance(("ab", "bab"), ("ab", "ab")), (1, 3), []),
    ],
)
def test_successors(inst, p, expected):
    assert successors(inst, "u", p) == expected


def test_successor_out_of_range():
    with pytest.raises(OffsetOutOfRange):
        successors(AB, "u", (1, 3))
    with pytest.raises(OffsetOutOfRange):
        successors(AB, "v", (2, 1))


@pytest.mark.parametrize("tiles", ["a:ab", "ab:b", "ab", ""])
def test_instance_invariants(tiles):
    with pytest.raises(InstanceInvariantViolation):
        PcpInstance.parse(tiles)


def test_parse_tiles():
    inst = PcpInstance.parse("ab:ab,ba:ab")
    assert inst.u == ("ab", "ba") and inst.v == ("ab", "ab")
    assert inst.tiles() == "ab:ab,ba:ab"


def _w_family(sid):
    return [r for r in sid.rules if r.pred == "P" or r.pred == "W" or r.pred.startswith("W_")]


def _oracle_w_count(inst):
    """Entry rules, plus one rule per (p, q, p', q') step and per final pair."""
    positions = inst.positions()
    steps = sum(
        len(successors(inst, "u", p)) * len(successors(inst, "v", q))
        for p, q in itertools.product(positions, repeat=2)
        if match(inst, p, q)
    )
    finals = sum(
        1
        for i in range(1, inst.n + 1)
        if match(inst, (i, len(inst.u[i - 1])), (i, len(inst.v[i - 1])))
    )
    return inst.n + steps + finals + 1


@pytest.mark.parametrize("tiles", ["ab:ab", "ab:ba", "ab:ab,ba:ab", "aab:aa,ba:bba"])
def test_w_family_count(tiles):
    inst = PcpInstance.parse(tiles)
    assert len(_w_family(encode(inst).sid)) == _oracle_w_count(inst)


def test_w_family_count_for_ab():
    assert len(_w_family(encode(AB).sid)) == 5


@pytest.mark.parametrize("theory", THEORIES)
def test_encoding_is_a_strict_pc_sid(theory):
    encoded = encode(PcpInstance.parse("ab:ab,ba:ab"), theory)
    sid = encoded.sid
    assert sid.kappa == 6
    assert all(report.ok for report in check_sid(sid))
    assert all(is_symbolic_heap(r.body) for r in sid.rules)
    assert not any(isinstance(r.body, Or) for r in sid.rules)
    assert check_constrained(encoded.sequent, {"S", "Sbar"}).ok
    assert len(encoded.sequent.rhs) == 3


def test_encoding_is_deterministic_and_parses():
    a = print_sequent(encode(PcpInstance.parse("ab:ab,ba:ab")).sequent)
    b = print_sequent(encode(PcpInstance.parse("ab:ab,ba:ab")).sequent)
    assert a == b
    assert print_sequent(parse_problem(a).sequents()[0]) == a


@pytest.mark.parametrize("theory", THEORIES)
def test_witness_for_ab(theory):
    encoded = encode(AB, theory)
    s = build_witness_structure(AB, [1], theory)
    assert s.size == 9
    assert model_check(s, encoded.sequent.lhs, encoded.sid, theory)
    assert check_countermodel(s, encoded.sequent, extra_locations=8)


def test_witness_rejects_non_solutions():
    with pytest.raises(NotASolution):
        build_witness_structure(AB, [])
    with pytest.raises(NotASolution):
        build_witness_structure(PcpInstance.parse("ab:ab,ba:ab"), [2])
    with pytest.raises(NotASolution):
        build_witness_structure(AB, [3])


@pytest.mark.parametrize("theory", THEORIES)
def test_longer_witness(theory):
    inst = PcpInstance.parse("aab:aa,ba:bba")
    (sol,) = list(solutions(inst, 2))
    assert sol == (1, 2)
    encoded = encode(inst, theory)
    s = build_witness_structure(inst, sol, theory)
    assert s.size == 1 + 4 * 5
    assert check_countermodel(s, encoded.sequent, extra_locations=8)


@pytest.mark.parametrize("theory", THEORIES)
def test_chain_without_solution_is_not_a_countermodel(theory):
    # W accepts aaaaaa split as aa.aa.aa against aaa.aaa, which is no solution
    inst = PcpInstance.parse("aa:aaa")
    assert next(solutions(inst, 6), None) is None
    models = list(enumerate_w_models(inst, theory, 6))
    assert len(models) == 1
    encoded = encode(inst, theory)
    assert model_check(models[0], encoded.sequent.lhs, encoded.sid, theory)
    assert not check_countermodel(models[0], encoded.sequent, extra_locations=8)


@pytest.mark.parametrize("theory", THEORIES)
def test_countermodels_are_exactly_solutions(theory):
    inst = PcpInstance.parse("ab:ab,ba:ab")
    encoded = encode(inst, theory)
    for chain, s in zip(w_chains(inst, 4), enumerate_w_models(inst, theory, 4)):
        u_tiles = [p[0] for p, _ in chain if p[1] == 1]
        v_tiles = [q[0] for _, q in chain if q[1] == 1]
        assert check_countermodel(s, encoded.sequent, extra_locations=8) == (u_tiles == v_tiles)


def test_unsatisfiable_w():
    assert list(enumerate_w_models(PcpInstance.parse("ab:ba"), "nat_succ", 6)) == []


def test_ab_stream_contains_countermodel():
    encoded = encode(AB)
    assert any(check_countermodel(s, encoded.sequent, 8) for s in enumerate_w_models(AB, "nat_succ", 2))


@pytest.mark.parametrize("theory", THEORIES)
def test_theory_hypothesis(theory):
    assert check_theory_hypothesis(theory, 6)
