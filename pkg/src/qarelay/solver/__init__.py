"""LP, interior point, relaxation and branch-and-bound machinery."""

from .bnb import (
    DEFAULT_NODE_BUDGET,
    DEFAULT_TOLERANCES,
    NodeBudgetExceeded,
    OracleTooLarge,
    Tolerances,
    branch_and_bound,
    enumerate_oracle,
    greedy_incumbent,
)
from .lp import EQ, GE, LE, LinearProgram, LPResult, LPStatus, solve_lp
from .relaxation import BnBNode, RelaxationResult, root_node, solve_fixed, solve_relaxation

__all__ = [
    "BnBNode", "DEFAULT_NODE_BUDGET", "DEFAULT_TOLERANCES", "EQ", "GE", "LE", "LPResult", "LPStatus",
    "LinearProgram", "NodeBudgetExceeded", "OracleTooLarge", "RelaxationResult", "Tolerances",
    "branch_and_bound", "enumerate_oracle", "greedy_incumbent", "root_node", "solve_fixed",
    "solve_lp", "solve_relaxation",
]
