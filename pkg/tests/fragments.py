"""The four worked fragments for the equality-elimination steps.

Run as a script to rewrite the golden files after an intended change.
"""

from __future__ import annotations

import sys
from pathlib import Path

from slkit.conditions import AllocMap
from slkit.parser import parse_problem, print_sequent
from slkit.transform import session_fresh, step1, step2, step3, step4

GOLDEN = Path(__file__).parent / "golden"

STEP1_IN = "sid { kappa=1; r(x) <= x -> (x); pred p/2; } entail { p(x1,x2) |- r(x1) * r(x2) }"
STEP2_IN = (
    "sid { kappa=1; p(x) <= EX z . EX u . x -> (z) * q(z,u); pred q/2; pred p2/2; } "
    "entail { EX y1 . EX y2 . p2(x,y1) * p2(x,y2) |- emp }"
)
STEP3_IN = (
    "sid { kappa=1; p(y1,y2,y3) <= y1 -> (y2) * q(y2,y3) * y1 = y3; "
    "p(y1,y2,y3) <= y1 -> (y2) * r(y2,y3) * y1 = y2; pred q/2; pred r/2; } "
    "entail { p(x,y,x) |- emp }"
)
STEP4_IN = "sid { kappa=1; pred p/4; pred q/4; } entail { p(x,y,z,z1) * q(x,y,z,z1) * z1 -> (z1) |- emp }"
STEP4_ALLOC = AllocMap({"p": frozenset({1}), "q": frozenset({3})})


def load(text):
    return parse_problem(text).sequents()[0]


def outputs() -> dict[str, str]:
    s1 = load(STEP1_IN)
    fresh = session_fresh(s1)
    one = step1(s1, fresh)
    s4 = load(STEP4_IN)
    return {
        "step1": print_sequent(one),
        "step1_collapsed": print_sequent(step3(one, fresh)),
        "step2": print_sequent(step2(load(STEP2_IN))),
        "step3": print_sequent(step3(load(STEP3_IN))),
        "step4": print_sequent(step4(s4, STEP4_ALLOC)),
    }


if __name__ == "__main__":
    GOLDEN.mkdir(exist_ok=True)
    for name, text in outputs().items():
        (GOLDEN / f"{name}.sid").write_text(text)
        sys.stdout.write(f"== {name}\n{text}")
