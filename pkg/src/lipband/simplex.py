"""Dense tableau simplex for small LPs in canonical form.

Solves ``max c @ x  s.t.  A @ x <= b, x >= 0`` with ``b >= 0`` so the slack
basis is an initial feasible vertex. Bland's rule is used for both the entering
and leaving variable, which rules out cycling.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

TOL = 1e-9


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    UNBOUNDED = "Unbounded"
    INFEASIBLE = "Infeasible"
    DEGENERATE = "Degenerate"


@dataclass
class SimplexResult:
    status: Status
    x: Optional[np.ndarray]
    value: float
    # Shadow prices of the <= rows (the dual solution).
    duals: Optional[np.ndarray]
    iterations: int
    # A basic variable sits at zero at the optimum: the dual may not be unique.
    degenerate_basis: bool = False


def maximize(c, A, b, tol: float = TOL, max_iter: int = 10_000) -> SimplexResult:
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if c.shape != (n,) or b.shape != (m,):
        raise ValueError("shape mismatch between c, A and b")
    if np.any(b < 0):
        raise ValueError("canonical form requires b >= 0")

    # rows 0..m-1: [A | I | b]; row m: [-c | 0 | 0]
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = A
    tab[:m, n:n + m] = np.eye(m)
    tab[:m, -1] = b
    tab[m, :n] = -c
    basis = list(range(n, n + m))

    it = 0
    while True:
        obj = tab[m, :-1]
        candidates = np.flatnonzero(obj < -tol)
        if candidates.size == 0:
            break
        if it >= max_iter:
            return SimplexResult(Status.DEGENERATE, None, float("nan"), None, it)
        col = int(candidates[0])
        column = tab[:m, col]
        rows = np.flatnonzero(column > tol)
        if rows.size == 0:
            return SimplexResult(Status.UNBOUNDED, None, float("inf"), None, it)
        ratios = tab[rows, -1] / column[rows]
        best = ratios.min()
        # Bland: among (near-)tied ratios leave with the smallest basic index
        tied = rows[ratios <= best + tol * max(1.0, abs(best))]
        row = int(min(tied, key=lambda r: basis[r]))
        tab[row] /= tab[row, col]
        for r in range(m + 1):
            if r != row and tab[r, col] != 0.0:
                tab[r] -= tab[r, col] * tab[row]
        basis[row] = col
        it += 1

    x = np.zeros(n + m)
    for r, var in enumerate(basis):
        x[var] = tab[r, -1]
    degenerate = bool(np.any(tab[:m, -1] <= tol))
    return SimplexResult(
        Status.OPTIMAL,
        x[:n].clip(min=0.0),
        float(tab[m, -1]),
        tab[m, n:n + m].clip(min=0.0),
        it,
        degenerate,
    )
