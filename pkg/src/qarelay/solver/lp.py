"""Linear programming: a dense two-phase tableau simplex, plus a HiGHS backend.

The in-house simplex prices with Dantzig's rule and drops to Bland's rule for
as long as pivots stay degenerate, which rules out cycling.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

LE, GE, EQ = "<=", ">=", "="


class LPStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class LPError(RuntimeError):
    pass


@dataclass(eq=False)
class LinearProgram:
    """maximize c @ x  s.t.  A[i] @ x  (senses[i])  b[i],  lower <= x <= upper."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    senses: list[str] = field(default_factory=list)
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.asarray(self.b, dtype=float).ravel()
        m = self.A.shape[0]
        if self.b.size != m:
            raise ValueError(f"b has {self.b.size} entries for {m} rows")
        if not self.senses:
            self.senses = [LE] * m
        if len(self.senses) != m or any(s not in (LE, GE, EQ) for s in self.senses):
            raise ValueError("senses must be one of '<=', '>=', '=' per row")
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float).ravel()
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).ravel()
        if self.lower.size != n or self.upper.size != n:
            raise ValueError("bounds must match the number of variables")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape


@dataclass
class LPResult:
    status: LPStatus
    x: np.ndarray | None
    value: float
    iterations: int = 0
    backend: str = "simplex"

    @property
    def is_optimal(self) -> bool:
        return self.status is LPStatus.OPTIMAL


class _Tableau:
    """Rows hold B^-1 [A | b]; ``obj`` holds reduced costs z_j - c_j and the value."""

    def __init__(self, tab: np.ndarray, basis: np.ndarray, tol: float) -> None:
        self.tab = tab
        self.basis = basis
        self.tol = tol
        self.obj = np.zeros(tab.shape[1])
        self.iterations = 0

    def set_cost(self, cost: np.ndarray) -> None:
        cb = cost[self.basis]
        self.obj = cb @ self.tab
        self.obj[:-1] -= cost

    def pivot(self, r: int, c: int) -> None:
        tab = self.tab
        tab[r] /= tab[r, c]
        col = tab[:, c].copy()
        col[r] = 0.0
        tab -= np.outer(col, tab[r])
        self.obj -= self.obj[c] * tab[r]
        self.basis[r] = c
        self.iterations += 1

    def run(self, allowed: np.ndarray, max_iter: int) -> LPStatus:
        bland = False
        tol = self.tol
        while True:
            red = np.where(allowed, self.obj[:-1], 0.0)
            candidates = np.flatnonzero(red < -tol)
            if candidates.size == 0:
                return LPStatus.OPTIMAL
            c = int(candidates[0]) if bland else int(candidates[np.argmin(red[candidates])])
            column = self.tab[:, c]
            rows = np.flatnonzero(column > tol)
            if rows.size == 0:
                return LPStatus.UNBOUNDED
            ratios = self.tab[rows, -1] / column[rows]
            best = ratios.min()
            tied = rows[ratios <= best + tol * max(1.0, abs(best))]
            r = int(tied[np.argmin(self.basis[tied])])
            self.pivot(r, c)
            # Bland's rule while stalled; Dantzig again once progress resumes.
            bland = best <= tol
            if self.iterations > max_iter:
                raise LPError(f"simplex exceeded {max_iter} pivots")


def _to_standard_form(lp: LinearProgram):
    """Map x to y >= 0; returns (A, b, senses, cost, recover) for the y-problem."""
    n = lp.c.size
    cols: list[np.ndarray] = []
    costs: list[float] = []
    shift = np.zeros(n)
    recover_cols: list[tuple[int, float]] = []
    extra_rows: list[tuple[int, float]] = []
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        a_col = lp.A[:, j]
        if np.isfinite(lo):
            shift[j] = lo
            cols.append(a_col)
            costs.append(lp.c[j])
            recover_cols.append((j, 1.0))
            if np.isfinite(hi):
                extra_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            shift[j] = hi
            cols.append(-a_col)
            costs.append(-lp.c[j])
            recover_cols.append((j, -1.0))
        else:
            cols.extend([a_col, -a_col])
            costs.extend([lp.c[j], -lp.c[j]])
            recover_cols.extend([(j, 1.0), (j, -1.0)])
    m = lp.A.shape[0]
    ny = len(cols)
    A = np.column_stack(cols) if cols else np.zeros((m, 0))
    b = lp.b - lp.A @ shift
    senses = list(lp.senses)
    if extra_rows:
        ub = np.zeros((len(extra_rows), ny))
        for r, (col, width) in enumerate(extra_rows):
            ub[r, col] = 1.0
        A = np.vstack([A, ub])
        b = np.concatenate([b, [w for _, w in extra_rows]])
        senses += [LE] * len(extra_rows)
    cost = np.array(costs)

    def recover(y: np.ndarray) -> np.ndarray:
        x = shift.copy()
        for col, (j, sign) in enumerate(recover_cols):
            x[j] += sign * y[col]
        return x

    return A, b, senses, cost, recover


def simplex(lp: LinearProgram, tol: float = 1e-9, max_iter: int | None = None) -> LPResult:
    A, b, senses, cost, recover = _to_standard_form(lp)
    m, ny = A.shape
    A = A.copy()
    b = b.copy()
    senses = list(senses)
    for i in range(m):
        if b[i] < 0:
            A[i] *= -1.0
            b[i] *= -1.0
            senses[i] = {LE: GE, GE: LE, EQ: EQ}[senses[i]]
    n_slack = sum(1 for s in senses if s != EQ)
    n_art = sum(1 for s in senses if s != LE)
    total = ny + n_slack + n_art
    tab = np.zeros((m, total + 1))
    tab[:, :ny] = A
    tab[:, -1] = b
    basis = np.empty(m, dtype=int)
    artificial = np.zeros(total, dtype=bool)
    s_col, a_col = ny, ny + n_slack
    for i, sense in enumerate(senses):
        if sense == LE:
            tab[i, s_col] = 1.0
            basis[i] = s_col
            s_col += 1
        else:
            if sense == GE:
                tab[i, s_col] = -1.0
                s_col += 1
            tab[i, a_col] = 1.0
            basis[i] = a_col
            artificial[a_col] = True
            a_col += 1
    max_iter = max_iter or 50 * (m + total + 10)
    T = _Tableau(tab, basis, tol)
    scale = 1.0 + (np.abs(b).max() if m else 0.0)

    if n_art:
        phase1 = np.where(artificial, -1.0, 0.0)
        T.set_cost(phase1)
        T.run(np.ones(total, dtype=bool), max_iter)
        # phase-1 value is minus the total artificial mass
        if T.obj[-1] < -tol * scale:
            return LPResult(LPStatus.INFEASIBLE, None, float("nan"), T.iterations)
        keep = np.ones(T.tab.shape[0], dtype=bool)
        for r in range(T.tab.shape[0]):
            if artificial[T.basis[r]]:
                row = np.where(artificial, 0.0, np.abs(T.tab[r, :-1]))
                c = int(np.argmax(row))
                if row[c] > tol:
                    T.pivot(r, c)
                else:
                    keep[r] = False
        if not keep.all():
            T.tab = T.tab[keep]
            T.basis = T.basis[keep]

    full_cost = np.concatenate([cost, np.zeros(total - ny)])
    T.set_cost(full_cost)
    status = T.run(~artificial, max_iter)
    if status is LPStatus.UNBOUNDED:
        return LPResult(status, None, float("inf"), T.iterations)
    y = np.zeros(total)
    y[T.basis] = T.tab[:, -1]
    x = recover(y[:ny])
    return LPResult(LPStatus.OPTIMAL, x, float(lp.c @ x), T.iterations)


def highs(lp: LinearProgram) -> LPResult:
    from scipy.optimize import linprog

    senses = np.array(lp.senses)
    ub_rows = senses != EQ
    A_ub = lp.A[ub_rows] * np.where(senses[ub_rows] == GE, -1.0, 1.0)[:, None]
    b_ub = lp.b[ub_rows] * np.where(senses[ub_rows] == GE, -1.0, 1.0)
    eq = senses == EQ
    res = linprog(
        -lp.c,
        A_ub=A_ub if A_ub.size else None,
        b_ub=b_ub if A_ub.size else None,
        A_eq=lp.A[eq] if eq.any() else None,
        b_eq=lp.b[eq] if eq.any() else None,
        bounds=list(zip(np.where(np.isfinite(lp.lower), lp.lower, None), np.where(np.isfinite(lp.upper), lp.upper, None))),
        method="highs",
    )
    iters = int(getattr(res, "nit", 0) or 0)
    if res.status == 0:
        return LPResult(LPStatus.OPTIMAL, res.x, float(lp.c @ res.x), iters, "highs")
    if res.status == 2:
        return LPResult(LPStatus.INFEASIBLE, None, float("nan"), iters, "highs")
    if res.status == 3:
        return LPResult(LPStatus.UNBOUNDED, None, float("inf"), iters, "highs")
    raise LPError(f"HiGHS failed: {res.message}")


# Dense tableau work grows as rows * columns; past this size HiGHS is faster.
AUTO_SIMPLEX_LIMIT = 4000


def solve_lp(lp: LinearProgram, backend: str = "simplex") -> LPResult:
    if backend == "auto":
        m, n = lp.shape
        backend = "simplex" if m * n <= AUTO_SIMPLEX_LIMIT else "highs"
    if backend == "simplex":
        return simplex(lp)
    if backend == "highs":
        return highs(lp)
    raise ValueError(f"unknown LP backend {backend!r}")
