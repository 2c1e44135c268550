"""Small dense LP solver: two-phase tableau simplex with Bland's rule.

Solves ``min c @ x  s.t.  A_ub @ x <= b_ub,  lo <= x <= hi``. Box bounds may be
infinite. Infeasible and unbounded problems are reported through
``LPSolution.status`` rather than raised.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgumentError, NumericError

logger = logging.getLogger(__name__)

MAX_VARIABLES = 200
MAX_CONSTRAINTS = 400


class LPStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LPProblem:
    c: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        c = np.array(self.c, dtype=np.float64).reshape(-1)
        n = c.size
        A = np.array(self.A_ub, dtype=np.float64).reshape(-1, n) if n else np.zeros((0, 0))
        b = np.array(self.b_ub, dtype=np.float64).reshape(-1)
        lo = np.broadcast_to(np.array(self.lo, dtype=np.float64), (n,)).copy()
        hi = np.broadcast_to(np.array(self.hi, dtype=np.float64), (n,)).copy()
        if n == 0:
            raise InvalidArgumentError("LP needs at least one variable")
        if A.shape[0] != b.size:
            raise InvalidArgumentError(f"A_ub has {A.shape[0]} rows but b_ub has {b.size} entries")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise InvalidArgumentError("LP coefficients must be finite")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo == np.inf) or np.any(hi == -np.inf):
            raise InvalidArgumentError("invalid variable box")
        for name, value in (("c", c), ("A_ub", A), ("b_ub", b), ("lo", lo), ("hi", hi)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def num_variables(self) -> int:
        return int(self.c.size)

    @property
    def num_constraints(self) -> int:
        return int(self.b_ub.size)


@dataclass(frozen=True)
class LPSolution:
    status: LPStatus
    x: np.ndarray | None
    objective: float | None
    iterations: int


class _Tableau:
    """Rows are constraints, the last row holds reduced costs and minus the objective."""

    def __init__(self, table: np.ndarray, basis: list[int], tol: float, max_iterations: int):
        self.T = table
        self.basis = basis
        self.tol = tol
        self.max_iterations = max_iterations
        self.iterations = 0

    def pivot(self, row: int, col: int) -> None:
        T = self.T
        T[row] /= T[row, col]
        factors = T[:, col].copy()
        factors[row] = 0.0
        T -= np.outer(factors, T[row])
        self.basis[row] = col

    def set_costs(self, costs: np.ndarray) -> None:
        self.T[-1, :-1] = costs
        self.T[-1, -1] = 0.0
        for row, var in enumerate(self.basis):
            if costs[var] != 0.0:
                self.T[-1] -= costs[var] * self.T[row]

    def run(self, allowed: int) -> bool:
        """Bland-rule simplex over the first ``allowed`` columns. False when unbounded."""
        T = self.T
        while True:
            reduced = T[-1, :allowed]
            candidates = np.flatnonzero(reduced < -self.tol)
            if candidates.size == 0:
                return True
            col = int(candidates[0])
            column = T[:-1, col]
            rows = np.flatnonzero(column > self.tol)
            if rows.size == 0:
                return False
            ratios = T[rows, -1] / column[rows]
            best = ratios.min()
            ties = rows[ratios <= best + self.tol * max(1.0, abs(best))]
            row = int(min(ties, key=lambda r: self.basis[r]))
            self.pivot(row, col)
            self.iterations += 1
            if self.iterations > self.max_iterations:
                raise NumericError(f"simplex exceeded {self.max_iterations} pivots")


def _standard_form(problem: LPProblem):
    """Map x = offset + M y with y >= 0; finite upper boxes become extra rows."""
    n = problem.num_variables
    columns, extra_rows, extra_rhs = [], [], []
    offset = np.zeros(n)
    for j in range(n):
        lo, hi = problem.lo[j], problem.hi[j]
        e = np.zeros(n)
        e[j] = 1.0
        if np.isfinite(lo):
            offset[j] = lo
            columns.append(e)
            if np.isfinite(hi):
                extra_rows.append((len(columns) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            columns.append(-e)
        else:
            columns.append(e)
            columns.append(-e)
    M = np.column_stack(columns)
    A = problem.A_ub @ M
    b = problem.b_ub - problem.A_ub @ offset
    if extra_rows:
        box = np.zeros((len(extra_rows), M.shape[1]))
        for i, (col, width) in enumerate(extra_rows):
            box[i, col] = 1.0
            extra_rhs.append(width)
        A = np.vstack([A, box])
        b = np.concatenate([b, extra_rhs])
    return A, b, problem.c @ M, offset, M


def solve_lp(problem: LPProblem, tol: float = 1e-9, max_iterations: int = 10_000) -> LPSolution:
    if problem.num_variables > MAX_VARIABLES or problem.num_constraints > MAX_CONSTRAINTS:
        raise InvalidArgumentError(
            f"LP too large for the dense solver: {problem.num_variables} variables, "
            f"{problem.num_constraints} constraints (limits {MAX_VARIABLES}/{MAX_CONSTRAINTS})"
        )
    if np.any(problem.lo > problem.hi):
        return LPSolution(LPStatus.INFEASIBLE, None, None, 0)

    A, b, cost, offset, M = _standard_form(problem)
    m, n = A.shape
    flip = b < 0
    A[flip] *= -1.0
    b = np.abs(b)
    slack = np.eye(m)
    slack[flip] *= -1.0
    n_art = int(flip.sum())
    art = np.zeros((m, n_art))
    art[np.flatnonzero(flip), np.arange(n_art)] = 1.0

    width = n + m + n_art
    table = np.zeros((m + 1, width + 1))
    table[:m, :n] = A
    table[:m, n:n + m] = slack
    table[:m, n + m:width] = art
    table[:m, -1] = b
    basis = [n + i for i in range(m)]
    for k, row in enumerate(np.flatnonzero(flip)):
        basis[row] = n + m + k
    tab = _Tableau(table, basis, tol, max_iterations)

    if n_art:
        phase1 = np.zeros(width)
        phase1[n + m:] = 1.0
        tab.set_costs(phase1)
        tab.run(width)
        infeasibility = -tab.T[-1, -1]
        if infeasibility > tol * max(1.0, float(np.abs(b).max(initial=0.0))):
            logger.debug(f"LP infeasible: phase-one residual {infeasibility:.3g}")
            return LPSolution(LPStatus.INFEASIBLE, None, None, tab.iterations)
        # pivot remaining artificials out of the basis; drop redundant rows
        keep = []
        for row in range(m):
            if tab.basis[row] < n + m:
                keep.append(row)
                continue
            nonzero = np.flatnonzero(np.abs(tab.T[row, :n + m]) > tol)
            if nonzero.size:
                tab.pivot(row, int(nonzero[0]))
                keep.append(row)
        tab.T = np.vstack([tab.T[keep][:, list(range(n + m)) + [width]], tab.T[-1:, list(range(n + m)) + [width]]])
        tab.basis = [tab.basis[r] for r in keep]

    phase2 = np.concatenate([cost, np.zeros(m)])
    tab.set_costs(phase2)
    if not tab.run(n + m):
        return LPSolution(LPStatus.UNBOUNDED, None, None, tab.iterations)

    y = np.zeros(n + m)
    for row, var in enumerate(tab.basis):
        y[var] = tab.T[row, -1]
    x = offset + M @ y[:n]
    x = np.clip(x, problem.lo, problem.hi)
    objective = float(problem.c @ x)
    logger.debug(f"LP optimal after {tab.iterations} pivots, objective {objective:.6g}")
    return LPSolution(LPStatus.OPTIMAL, x, objective, tab.iterations)
