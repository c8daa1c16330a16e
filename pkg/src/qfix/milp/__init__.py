"""Self-contained MILP kernel: model container, simplex + branch & bound,
exact pre-solve reduction, independent solution verifier, LP file interchange.
"""

from .branch_bound import solve
from .lpformat import export_lp, import_lp
from .model import (
    INF,
    LinConstraint,
    MilpModel,
    Solution,
    SolveStats,
    SolverConfig,
    Status,
    VarKind,
    VarRef,
    check_solution,
)
from .reduce import ReducedModel, reduce_model, solve_reduced

__all__ = [
    "INF",
    "LinConstraint",
    "MilpModel",
    "ReducedModel",
    "Solution",
    "SolveStats",
    "SolverConfig",
    "Status",
    "VarKind",
    "VarRef",
    "check_solution",
    "export_lp",
    "import_lp",
    "reduce_model",
    "solve",
    "solve_reduced",
]
