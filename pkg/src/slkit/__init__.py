"""Separation logic with inductive definitions and theory atoms.

Parsing, side-condition checks, equality elimination, PCP encodings and an
exact model checker with bounded countermodel search.
"""

__version__ = "0.1.0"

from .conditions import (
    AllocMap,
    ConditionReport,
    check_alloc_compatibility,
    check_connectivity,
    check_constrained,
    check_establishment,
    check_progress,
    compute_alloc_map,
    is_alloc_compatible,
)
from .normalform import depends_on, dnf_symbolic_heaps, prenex, unfold_once
from .parser import ParseError, ProblemFile, parse_formula, parse_problem, print_problem, print_sequent
from .pcp import PcpInstance, build_witness_structure, encode, enumerate_w_models
from .search import SearchBounds, countermodel_search, enumerate_models
from .semantics import Structure, check_countermodel, model_check
from .syntax import SID, Rule, Sequent, Substitution, apply_subst, size, width
from .transform import eliminate_equalities, make_alloc_compatible, step1, step2, step3, step4

__all__ = [name for name in dir() if not name.startswith("_")]
