"""Column generation for one block under approximate duals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ddw.errors import InstanceDefect, InvariantViolation
from ddw.model import BlockData, Column, ColumnPool
from ddw.solvers import LpProblem, Status, solve_lp


@dataclass
class PricingOutcome:
    z_sep: float
    threshold: float
    column: Column | None = None
    duplicate: bool = False
    candidate: Column | None = None  # optimiser of the pricing LP, accepted or not


def block_lp(block: BlockData, cost) -> LpProblem:
    return LpProblem(cost, G=block.B, h=block.b, lower=block.lower, upper=block.upper)


def _minimise(block_id: int, block: BlockData, cost) -> tuple[float, np.ndarray]:
    sol = solve_lp(block_lp(block, cost))
    if sol.status is Status.INFEASIBLE:
        raise InstanceDefect(f"block {block_id}: local constraints are infeasible")
    if sol.status is not Status.OPTIMAL:
        raise InstanceDefect(f"block {block_id}: pricing LP is {sol.status.value}")
    return sol.objective, sol.x


def acceptance_threshold(pool: ColumnPool, eps_d_target: float) -> float:
    """-max_i ||A_n x^i|| * eps_d: reduced costs above this cannot be trusted."""
    if len(pool) == 0:
        raise InvariantViolation(f"block {pool.block_id}: threshold needs a nonempty pool")
    return -pool.max_link_norm() * eps_d_target


def price(block_id: int, block: BlockData, pool: ColumnPool, pi_hat, u_hat: float, eps_d_target: float) -> PricingOutcome:
    """Solve min {(c - A'pi).x - u : x in X_n} and accept the vertex only below the threshold."""
    threshold = acceptance_threshold(pool, eps_d_target)
    pi_hat = np.asarray(pi_hat, dtype=float)
    value, x = _minimise(block_id, block, block.c - block.A.T @ pi_hat)
    z_sep = value - u_hat
    cand = Column.from_point(block_id, block, x)
    if z_sep >= threshold:
        return PricingOutcome(z_sep, threshold, None, False, cand)
    if pool.contains(x):
        return PricingOutcome(z_sep, threshold, None, True, cand)
    return PricingOutcome(z_sep, threshold, cand, False, cand)


def seed_initial_column(block_id: int, block: BlockData) -> Column:
    """The vertex minimising c_n.x over X_n, used to make the first pool nonempty."""
    _, x = _minimise(block_id, block, block.c)
    return Column.from_point(block_id, block, x)
