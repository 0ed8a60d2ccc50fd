"""Backbone fragility toolkit: WSAT/SKC, a DPLL backbone solver, BMS extraction and experiments."""
from .cnf import Backbone, CnfInstance, evaluate, hamming_distance, remove_clauses, satisfies
from .dimacs import parse_dimacs, read_dimacs, write_dimacs
from .errors import (BbfragError, BudgetExhausted, DimacsError, RobustnessUndefined,
                     SatisfiableError, UndefinedStatistic, UnflippableClause, UnsatisfiableError)
from .solver import (compute_backbone, count_solutions, enumerate_solutions, hdns, solution_cubes,
                     solve)

__version__ = "0.1.0"

__all__ = [
    "Backbone", "BbfragError", "BudgetExhausted", "CnfInstance", "DimacsError",
    "RobustnessUndefined", "SatisfiableError", "UndefinedStatistic", "UnflippableClause",
    "UnsatisfiableError", "compute_backbone", "count_solutions", "enumerate_solutions",
    "evaluate", "hamming_distance", "hdns", "parse_dimacs", "read_dimacs", "remove_clauses",
    "satisfies", "solution_cubes", "solve", "write_dimacs",
]
