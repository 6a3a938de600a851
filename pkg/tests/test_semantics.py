import itertools
import json
import random

import pytest
from brute import brute_check
from hypothesis import given, settings
from hypothesis import strategies as st

from slkit.normalform import dnf_symbolic_heaps, prenex
from slkit.parser import parse_formula, parse_problem, parse_sid
from slkit.search import all_structures
from slkit.semantics import (
    BudgetExceeded,
    NonPcSID,
    Structure,
    TheoryError,
    check_countermodel,
    model_check,
    theory,
)
from slkit.syntax import Sequent, disj

LS = parse_sid(
    """sid { kappa=1;
      ls(x,y) <= x -> (y);
      ls(x,y) <= EX z . x -> (z) * ls(z,y);
    }"""
)
ILS = parse_sid(
    """sid { kappa=1;
      ils(x,y,u,v) <= x -> (y) * leq(x,v) * geq(x,u);
      ils(x,y,u,v) <= EX z . x -> (z) * ils(z,y,x,v) * leq(x,v) * geq(x,u);
    }"""
)


def f(text):
    return parse_formula(text)


@pytest.mark.parametrize(
    "store, heap, expected",
    [
        ({"x": 1, "y": 2}, {1: (2,)}, True),
        ({"x": 1, "y": 2}, {}, False),
        ({"x": 1, "y": 3}, {1: (2,), 2: (3,)}, True),
        ({"x": 1, "y": 3}, {1: (2,), 2: (3,), 7: (7,)}, False),
    ],
)
def test_ls(store, heap, expected):
    assert model_check(Structure(store, heap), f("ls(x, y)"), LS) is expected


def test_sorted_list_under_order():
    s = Structure({"x": 5, "y": 9, "u": 1, "v": 10}, {5: (9,)})
    assert model_check(s, f("ils(x, y, u, v)"), ILS, "nat_leq")
    assert not model_check(Structure({"x": 5, "y": 9, "u": 6, "v": 10}, {5: (9,)}), f("ils(x, y, u, v)"), ILS, "nat_leq")


def test_sorted_chain():
    s = Structure({"x": 2, "y": 9, "u": 0, "v": 10}, {2: (4,), 4: (9,)})
    assert model_check(s, f("ils(x, y, u, v)"), ILS, "nat_leq")
    down = Structure({"x": 4, "y": 9, "u": 0, "v": 10}, {4: (2,), 2: (9,)})
    assert not model_check(down, f("ils(x, y, u, v)"), ILS, "nat_leq")


def _sequent(lhs, *rhs, sid=LS, th="equality"):
    return Sequent(f(lhs), tuple(f(g) for g in rhs), sid, th)


def test_countermodel_examples():
    chain = Structure({"x": 1, "y": 3}, {1: (2,), 2: (3,)})
    assert check_countermodel(chain, _sequent("ls(x, y)", "x -> (y)"))
    assert not check_countermodel(chain, _sequent("ls(x, y)", "ls(x, y)"))
    shared = Structure({"x": 1, "y": 1}, {1: (1,)})
    assert not check_countermodel(shared, _sequent("x -> (y)", "emp"))


def test_store_must_cover_free_vars():
    with pytest.raises(ValueError):
        model_check(Structure({"x": 1}, {}), f("x -> (y)"), LS)


def test_non_progressing_rule():
    sid = parse_sid("sid { kappa=1; p(x) <= q(x); q(x) <= x -> (x); }")
    with pytest.raises(NonPcSID):
        model_check(Structure({"x": 0}, {0: (0,)}), f("p(x)"), sid)


def test_budget():
    s = Structure({"x": 0, "y": 5}, {i: (i + 1,) for i in range(5)})
    with pytest.raises(BudgetExceeded):
        model_check(s, f("ls(x, y)"), LS, budget=3)


def test_budget_from_environment(monkeypatch):
    monkeypatch.setenv("SLKIT_BUDGET", "2")
    s = Structure({"x": 0, "y": 5}, {i: (i + 1,) for i in range(5)})
    with pytest.raises(BudgetExceeded):
        model_check(s, f("ls(x, y)"), LS)


@pytest.mark.parametrize(
    "th, pred, values, expected",
    [
        ("nat_succ", "S", (3, 4), True),
        ("nat_succ", "S", (3, 5), False),
        ("nat_succ", "Sbar", (3, 5), True),
        ("nat_succ", "Sbar", (3, 3), True),
        ("nat_leq", "S", (3, 5), True),
        ("nat_leq", "Sbar", (5, 3), True),
        ("nat_leq", "Sbar", (3, 3), False),
        ("equality", "eq", (1, 1), True),
        ("equality", "neq", (1, 1), False),
        ("equality", "false", (), False),
    ],
)
def test_theories(th, pred, values, expected):
    assert theory(th).holds(pred, values) is expected


def test_equality_rejects_order_atoms():
    with pytest.raises(TheoryError):
        theory("equality").holds("S", (1, 2))
    with pytest.raises(TheoryError):
        theory("presburger")


@pytest.mark.parametrize("th", ["equality", "nat_succ", "nat_leq"])
def test_theory_formulas_need_empty_heap(th):
    phi = f("x = x * x != y")
    assert model_check(Structure({"x": 0, "y": 1}, {}), phi, LS, th)
    assert not model_check(Structure({"x": 0, "y": 1}, {0: (1,)}), phi, LS, th)


def test_json_round_trip():
    s = Structure({"x": 1}, {1: (2,)})
    data = s.to_json()
    assert data == {"store": {"x": 1}, "heap": {"1": [2]}}
    assert Structure.from_json(json.dumps(data)) == s


def test_invariant_under_bijection():
    s = Structure({"x": 1, "y": 3}, {1: (2,), 2: (3,)})
    perm = {1: 7, 2: 0, 3: 4}
    t = Structure({k: perm[v] for k, v in s.store.items()}, {perm[k]: (perm[v[0]],) for k, v in s.heap.items()})
    assert model_check(s, f("ls(x, y)"), LS) == model_check(t, f("ls(x, y)"), LS)


def test_store_outside_free_vars_is_irrelevant():
    s = Structure({"x": 1, "y": 2}, {1: (2,)})
    assert model_check(s, f("ls(x, y)"), LS) == model_check(Structure({**s.store, "w": 9}, s.heap), f("ls(x, y)"), LS)


def test_extra_budget_sweep_is_inert_for_established_rules():
    rng = random.Random(3)
    phi = f("EX z . ls(x, z) * ls(z, y)")
    for _ in range(40):
        heap = {k: (rng.randrange(4),) for k in rng.sample(range(4), rng.randint(1, 3))}
        s = Structure({"x": rng.randrange(4), "y": rng.randrange(4)}, heap)
        verdicts = {model_check(s, phi, LS, extra_locations=e) for e in (0, 1, 3, 6)}
        assert len(verdicts) == 1


def test_star_matches_partition_oracle():
    phi = f("ls(x, y) * ls(y, x)")
    for s in all_structures(["x", "y"], 1, 3, 3):
        assert model_check(s, phi, LS) == brute_check(s, phi, LS)


PHIS = [
    "EX a . (x -> (a) \\/ ls(a, y)) * (EX b . ls(x, b))",
    "(EX a . ls(x, a)) * (y = y \\/ x -> (y))",
    "(EX a . x -> (a)) \\/ (EX a . ls(a, x) * a != x)",
]


@pytest.mark.parametrize("text", PHIS)
def test_normal_forms_are_equivalent(text):
    phi = f(text)
    pre = prenex(phi)
    flat = disj(*dnf_symbolic_heaps(phi))
    for s in all_structures(["x", "y"], 1, 2, 3):
        want = model_check(s, phi, LS)
        assert model_check(s, pre, LS) == want
        assert model_check(s, flat, LS) == want


@settings(max_examples=60, deadline=None)
@given(
    st.dictionaries(st.integers(0, 3), st.tuples(st.integers(0, 3)), max_size=4),
    st.integers(0, 3),
    st.integers(0, 3),
)
def test_agrees_with_brute_force(heap, x, y):
    s = Structure({"x": x, "y": y}, heap)
    for text in ["ls(x, y)", "EX z . ls(x, z) * ls(z, y)", "ls(x, y) * x != y \\/ ls(y, x)"]:
        phi = f(text)
        assert model_check(s, phi, LS) == brute_check(s, phi, LS)


def test_problem_theory_is_used():
    problem = parse_problem(
        "sid { kappa=1; p(x,y) <= x -> (y) * S(x, y); } theory nat_succ; entail { p(x,y) |- emp }"
    )
    sq = problem.sequents()[0]
    assert check_countermodel(Structure({"x": 1, "y": 2}, {1: (2,)}), sq)
    assert not check_countermodel(Structure({"x": 1, "y": 3}, {1: (3,)}), sq)


def test_all_structures_counts():
    # one variable, locations {0,1}, heap up to 1 cell of width 1
    got = list(all_structures(["x"], 1, 1, 2))
    assert len(got) == 2 * (1 + 2 * 2)
    assert len(set(got)) == len(got)
    assert all(len(s.heap) <= 1 for s in got)
    assert list(itertools.islice(got, 1))[0].heap == {}
