"""Self-contained dense LP/QP solvers with dual extraction."""

from ddw.solvers.lp import LpProblem, LpSolution, Status, solve_lp
from ddw.solvers.qp import QpProblem, QpSolution, kkt_residuals, solve_qp
from ddw.solvers.vertices import enumerate_vertices

__all__ = [
    "LpProblem",
    "LpSolution",
    "Status",
    "solve_lp",
    "QpProblem",
    "QpSolution",
    "kkt_residuals",
    "solve_qp",
    "enumerate_vertices",
]
