import pytest
from brute import brute_check, brute_countermodel

from slkit.parser import parse_formula, parse_problem
from slkit.search import (
    SearchBounds,
    all_structures,
    candidate_countermodels,
    countermodel_search,
    enumerate_models,
)
from slkit.semantics import BudgetExceeded, check_countermodel

RULES = """sid { kappa=1;
  ls(x,y) <= x -> (y);
  ls(x,y) <= EX z . x -> (z) * ls(z,y);
}"""


def sequent(entail, theory="equality", rules=RULES):
    return parse_problem(f"{rules} theory {theory}; entail {{ {entail} }}").sequents()[0]


def sid():
    return parse_problem(RULES).sid


def test_valid_sequent_has_no_countermodel():
    assert countermodel_search(sequent("x -> (y) |- ls(x,y)"), SearchBounds(3, 5)) is None


def test_invalid_sequent():
    sq = sequent("ls(x,y) |- x -> (y)")
    cm = countermodel_search(sq, SearchBounds(3, 5))
    assert cm is not None and cm.size == 2
    assert check_countermodel(cm, sq, extra_locations=5)
    assert brute_countermodel(cm, sq, extra_locations=5)


@pytest.mark.parametrize("bounds", [SearchBounds(1, 2), SearchBounds(3, 4), SearchBounds(3, 6)])
def test_identity_sequent_is_never_refuted(bounds):
    assert countermodel_search(sequent("ls(x,y) |- ls(x,y)"), bounds) is None


def test_first_countermodel_is_smallest():
    sq = sequent("ls(x,y) |- x -> (y)")
    candidates = [s for s in candidate_countermodels(sq, SearchBounds(3, 5)) if check_countermodel(s, sq, 5)]
    assert countermodel_search(sq, SearchBounds(3, 5)) == candidates[0]


def test_parallel_search_is_deterministic():
    sq = sequent("ls(x,y) |- x -> (y), EX z . x -> (z) * z -> (y)")
    serial = countermodel_search(sq, SearchBounds(4, 6))
    assert serial is not None and serial.size == 3
    assert countermodel_search(sq, SearchBounds(4, 6), jobs=2) == serial


def test_budget_exceeded_is_distinct_from_none():
    with pytest.raises(BudgetExceeded):
        countermodel_search(sequent("ls(x,y) |- x -> (y)"), SearchBounds(3, 5, budget=5))


def test_enumerate_single_cell_lists():
    models = list(enumerate_models(parse_formula("ls(x, y)"), sid(), bounds=SearchBounds(1, 3)))
    assert len(models) == 9
    assert all(s.heap == {s.store["x"]: (s.store["y"],)} for s in models)


def test_enumerate_false_and_emp():
    assert list(enumerate_models(parse_formula("false"), sid(), bounds=SearchBounds(2, 3))) == []
    emps = list(enumerate_models(parse_formula("emp"), sid(), bounds=SearchBounds(2, 3), free=["x"]))
    assert [s.store["x"] for s in emps] == [0, 1, 2]
    assert all(not s.heap for s in emps)


@pytest.mark.parametrize(
    "text",
    [
        "ls(x, y)",
        "EX z . ls(x, z) * ls(z, y)",
        "ls(x, y) * x != y",
        "ls(x, y) \\/ ls(y, x) * x = y",
    ],
)
def test_enumeration_matches_brute_force(text):
    phi = parse_formula(text)
    bounds = SearchBounds(2, 3)
    got = set(enumerate_models(phi, sid(), bounds=bounds))
    want = {s for s in all_structures(["x", "y"], 1, 2, 3) if brute_check(s, phi, sid())}
    assert got == want


def test_enumeration_with_order_theory():
    rules = """sid { kappa=1;
      ils(x,y,u,v) <= x -> (y) * leq(x,v) * geq(x,u);
      ils(x,y,u,v) <= EX z . x -> (z) * ils(z,y,x,v) * leq(x,v) * geq(x,u);
    }"""
    s = parse_problem(rules).sid
    phi = parse_formula("ils(x, y, u, v)")
    got = set(enumerate_models(phi, s, "nat_leq", SearchBounds(2, 3)))
    want = {m for m in all_structures(["u", "v", "x", "y"], 1, 2, 3) if brute_check(m, phi, s, "nat_leq")}
    assert got == want


def test_successor_countermodel():
    rules = "sid { kappa=1; p(x,y) <= x -> (y) * S(x,y); }"
    sq = sequent("x -> (y) |- p(x,y)", "nat_succ", rules)
    cm = countermodel_search(sq, SearchBounds(1, 4))
    assert cm is not None
    assert cm.store["y"] != cm.store["x"] + 1


def test_bounds_validation():
    with pytest.raises(ValueError):
        SearchBounds(-1, 3)
    with pytest.raises(ValueError):
        SearchBounds(1, 0)
