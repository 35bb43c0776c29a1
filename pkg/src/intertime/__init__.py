"""Intersection times of two independent Markov chains.

Exact linear-algebra quantities (spectra, hitting and mixing times, Green
sums), Monte Carlo estimators of the intersection time and intersection
counts, and a harness that evaluates the known inequalities between them on
standard graph families.
"""

from intertime.chain import (
    ChainMatrix,
    check_reversible,
    check_transitive_heuristic,
    evolve,
    make_lazy,
    read_chain,
    stationary,
    write_chain,
)
from intertime.config import TOL, Tolerances
from intertime.errors import (
    BudgetError,
    DivergenceError,
    IntertimeError,
    StructuralError,
    UnsupportedOperationError,
    ValidationError,
)
from intertime.families import FamilySpec, central_node, generate

__version__ = "0.1.0"

__all__ = [
    "BudgetError",
    "ChainMatrix",
    "DivergenceError",
    "FamilySpec",
    "IntertimeError",
    "StructuralError",
    "TOL",
    "Tolerances",
    "UnsupportedOperationError",
    "ValidationError",
    "central_node",
    "check_reversible",
    "check_transitive_heuristic",
    "evolve",
    "generate",
    "make_lazy",
    "read_chain",
    "stationary",
    "write_chain",
]
