"""Two-phase dense-tableau simplex for ``min c.x  s.t.  A x >= b``.

Pricing uses Bland's rule (lowest-index improving column, lowest-index
leaving variable among ratio ties), which guarantees termination on
degenerate problems.  Problem sizes here are tiny (a few dozen columns), so
the tableau is kept dense.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, LpStalled
from .linalg import as_mat, as_vec

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

MAX_ITER = 10**6


@dataclass(frozen=True)
class LpProblem:
    c: np.ndarray
    a_ge: np.ndarray
    b_ge: np.ndarray
    nonneg: bool = True

    def __post_init__(self):
        c = as_vec(self.c, "c")
        b = as_vec(self.b_ge, "b_ge")
        a = np.asarray(self.a_ge, dtype=float)
        a = a.reshape(0, c.size) if a.size == 0 else as_mat(a, "a_ge")
        if c.size == 0:
            raise DimensionError("LP needs at least one variable")
        if a.shape != (b.size, c.size):
            raise DimensionError(f"a_ge {a.shape} inconsistent with c ({c.size}) / b ({b.size})")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "a_ge", a)
        object.__setattr__(self, "b_ge", b)


@dataclass(frozen=True)
class LpSolution:
    status: str
    x: np.ndarray
    objective: float
    iterations: int


class _Tableau:
    def __init__(self, body, basis, tol, max_iter):
        self.t = body          # rows 0..k-1 constraints, last row reduced costs
        self.basis = basis
        self.tol = tol
        self.max_iter = max_iter
        self.iterations = 0

    def pivot(self, row, col):
        t = self.t
        t[row] /= t[row, col]
        for r in range(t.shape[0]):
            if r != row and t[r, col] != 0.0:
                t[r] -= t[r, col] * t[row]
        self.basis[row] = col

    def run(self, ncols):
        """Iterate until optimal; returns False if unbounded."""
        t, tol = self.t, self.tol
        k = t.shape[0] - 1
        while True:
            cost = t[-1, :ncols]
            improving = np.flatnonzero(cost < -tol)
            if improving.size == 0:
                return True
            if self.iterations >= self.max_iter:
                raise LpStalled(f"simplex stalled after {self.iterations} iterations")
            col = int(improving[0])
            column = t[:k, col]
            rows = np.flatnonzero(column > tol)
            if rows.size == 0:
                return False
            ratios = t[rows, -1] / column[rows]
            best = ratios.min()
            ties = rows[ratios <= best + tol * max(1.0, abs(best))]
            row = int(min(ties, key=lambda r: self.basis[r]))
            self.pivot(row, col)
            self.iterations += 1


def solve_lp(p: LpProblem, tol: float = 1e-9, max_iter: int = MAX_ITER) -> LpSolution:
    """Solve ``p`` by two-phase simplex.

    Raises:
        LpStalled: more than ``max_iter`` pivots.
    """
    c, a, b = p.c, p.a_ge, p.b_ge
    if not p.nonneg:
        # free variables: x = xp - xn
        c = np.concatenate([c, -c])
        a = np.hstack([a, -a])
    nv = c.size
    k = b.size

    if k == 0:
        if np.any(c < -tol):
            return LpSolution(UNBOUNDED, np.zeros(p.c.size), -np.inf, 0)
        return LpSolution(OPTIMAL, np.zeros(p.c.size), 0.0, 0)

    # A x - s + art = b with rows flipped so b >= 0
    sign = np.where(b < 0, -1.0, 1.0)
    body = np.zeros((k + 1, nv + 2 * k + 1))
    body[:k, :nv] = a * sign[:, None]
    body[:k, nv:nv + k] = -np.diag(sign)
    body[:k, nv + k:nv + 2 * k] = np.eye(k)
    body[:k, -1] = b * sign
    n_real = nv + k
    body[-1, :n_real] = -body[:k, :n_real].sum(axis=0)
    body[-1, -1] = -body[:k, -1].sum()
    tab = _Tableau(body, list(range(n_real, n_real + k)), tol, max_iter)
    tab.run(n_real + k)

    scale = max(1.0, float(np.abs(b).max()))
    if -tab.t[-1, -1] > 1e-7 * scale:
        return LpSolution(INFEASIBLE, np.zeros(p.c.size), np.nan, tab.iterations)

    # drive remaining artificials out of the basis, dropping redundant rows
    keep = []
    for r in range(k):
        if tab.basis[r] >= n_real:
            cand = np.flatnonzero(np.abs(tab.t[r, :n_real]) > tol)
            if cand.size:
                tab.pivot(r, int(cand[0]))
            else:
                continue
        keep.append(r)
    t2 = np.vstack([tab.t[keep][:, list(range(n_real)) + [-1]], np.zeros(n_real + 1)])
    basis = [tab.basis[r] for r in keep]
    cost = np.concatenate([c, np.zeros(k)])
    t2[-1, :n_real] = cost
    for r, j in enumerate(basis):
        if cost[j] != 0.0:
            t2[-1] -= cost[j] * t2[r]
    tab2 = _Tableau(t2, basis, tol, max_iter - tab.iterations)
    bounded = tab2.run(n_real)
    iters = tab.iterations + tab2.iterations
    if not bounded:
        return LpSolution(UNBOUNDED, np.zeros(p.c.size), -np.inf, iters)

    x = np.zeros(n_real)
    for r, j in enumerate(tab2.basis):
        x[j] = tab2.t[r, -1]
    x = x[:nv]
    x[np.abs(x) < 1e-13] = 0.0
    if not p.nonneg:
        half = nv // 2
        x = x[:half] - x[half:]
    return LpSolution(OPTIMAL, x, float(p.c @ x), iters)
