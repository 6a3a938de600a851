import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slkit.parser import (
    ArityMismatch,
    ParseError,
    ProblemFile,
    SLSyntaxError,
    UnknownTheory,
    parse_formula,
    parse_problem,
    print_problem,
)
from slkit.syntax import SID, Exists, Or, PointsTo, PredAtom, Rule, Star, TheoryAtom, fv

LS_FILE = """
sid { kappa=1; ls(x,y) <= x -> (y); ls(x,y) <= EX z . x -> (z) * ls(z,y); }
theory equality;
entail { ls(x,y) |- x -> (y) }
"""


def test_ls_file():
    problem = parse_problem(LS_FILE)
    assert len(problem.sid.rules) == 2
    assert len(problem.entailments) == 1
    assert problem.kappa == 1
    assert problem.theory == "equality"


def test_empty_file():
    problem = parse_problem("sid { kappa=1; } entail { }")
    assert problem.sid.rules == ()
    assert problem.entailments == []


@pytest.mark.parametrize(
    "text, error",
    [
        ("sid { kappa=1; } entail { p(x x) |- emp }", SLSyntaxError),
        ("sid { kappa=1; p(x) <= x -> (x); } entail { p(x, y) |- emp }", ArityMismatch),
        ("sid { kappa=2; p(x) <= x -> (x); } entail { }", ArityMismatch),
        ("sid { kappa=1; } theory reals; entail { }", UnknownTheory),
        ("sid { kappa=1; ", SLSyntaxError),
    ],
)
def test_errors(text, error):
    with pytest.raises(error) as info:
        parse_problem(text)
    assert info.value.line >= 1 and info.value.column >= 1


def test_error_position():
    with pytest.raises(SLSyntaxError) as info:
        parse_problem("sid { kappa=1; }\nentail {\n  p(x x) |- emp }")
    assert (info.value.line, info.value.column) == (3, 7)
    assert "','" in str(info.value.expected) or info.value.expected


def test_comments_and_bar_disjunction():
    problem = parse_problem(
        "// header\nsid { kappa=1; p(x) <= x -> (x) | EX y . x -> (y) * p(y); // two cases\n} entail { }"
    )
    assert isinstance(problem.sid.rules[0].body, Or)


def test_theory_atoms():
    f = parse_formula("S(x, y) * Sbar(y, x) * leq(x, y) * x != y * false")
    preds = []
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, Star):
            stack += [g.left, g.right]
        else:
            preds.append(g.pred)
    assert sorted(preds) == sorted(["S", "Sbar", "leq", "neq", "false"])


def test_print_is_stable_and_round_trips():
    problem = parse_problem(LS_FILE)
    text = print_problem(problem)
    assert print_problem(parse_problem(text)) == text
    again = parse_problem(text)
    assert again.sid == problem.sid
    assert again.entailments == problem.entailments


def test_generated_names_round_trip():
    text = "sid { kappa=1; p%a1(x) <= x -> (x); } entail { p%a1(x%2) |- emp }"
    problem = parse_problem(text)
    assert parse_problem(print_problem(problem)).entailments == problem.entailments


VARS = st.sampled_from(["x", "y", "z", "u1"])


@st.composite
def formulas(draw, kappa, depth=3):
    if depth == 0 or draw(st.integers(0, 2)) == 0:
        kind = draw(st.sampled_from(["pt", "pred", "theory", "emp"]))
        if kind == "pt":
            return PointsTo(draw(VARS), tuple(draw(VARS) for _ in range(kappa)))
        if kind == "pred":
            return PredAtom("q", (draw(VARS), draw(VARS)))
        if kind == "theory":
            return TheoryAtom(draw(st.sampled_from(["eq", "neq"])), (draw(VARS), draw(VARS)))
        return parse_formula("emp")
    kind = draw(st.sampled_from(["star", "or", "ex"]))
    if kind == "ex":
        return Exists(draw(st.sampled_from(["a", "b"])), draw(formulas(kappa, depth - 1)))
    left, right = draw(formulas(kappa, depth - 1)), draw(formulas(kappa, depth - 1))
    return Star(left, right) if kind == "star" else Or(left, right)


@st.composite
def problems(draw):
    kappa = draw(st.integers(1, 2))
    rules = []
    for _ in range(draw(st.integers(0, 3))):
        body = draw(formulas(kappa))
        params = tuple(sorted(fv(body) | {"x"}))
        rules.append(Rule("q" if len(params) == 2 else f"r{len(params)}", params, body))
    sid = SID.build(kappa, rules, {"q": 2})
    entailments = [
        (draw(formulas(kappa)), tuple(draw(formulas(kappa)) for _ in range(draw(st.integers(0, 2)))))
        for _ in range(draw(st.integers(0, 2)))
    ]
    return ProblemFile(sid, entailments, draw(st.sampled_from(["equality", "nat_leq"])))


@settings(max_examples=150)
@given(problems())
def test_round_trip_property(problem):
    again = parse_problem(print_problem(problem))
    assert again.sid.kappa == problem.sid.kappa
    assert again.sid.rules == problem.sid.rules
    assert again.entailments == problem.entailments
    assert again.theory == problem.theory


@settings(max_examples=300)
@given(st.binary(max_size=80))
def test_arbitrary_bytes_never_crash(data):
    text = data.decode("utf-8", errors="replace")
    try:
        parse_problem(text)
    except ParseError as exc:
        assert exc.line >= 1


@settings(max_examples=200)
@given(st.text(alphabet="sidkapentl{}();=<->*|\\/EX .,xyz!01 \n", max_size=60))
def test_grammar_soup_never_crashes(text):
    try:
        parse_problem(text)
    except ParseError:
        pass
