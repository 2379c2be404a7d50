"""Conditional gradient (Frank-Wolfe) over a node polytope with an LP oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lp import LinearProgram, LPStatus, solve_lp


@dataclass
class FWResult:
    z: np.ndarray
    value: float
    gap: float
    iterations: int
    converged: bool


def _line_search(obj, z: np.ndarray, d: np.ndarray, iters: int = 60) -> float:
    """Maximize the concave map t -> F(z + t d) on [0, 1] by bisection on its slope."""
    if obj.gradient(z + d) @ d >= 0:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if obj.gradient(z + mid * d) @ d > 0:
            lo = mid
        else:
            hi = mid
    return lo


def frank_wolfe(problem, start: np.ndarray, eps_gap: float, max_iter: int, lp_backend: str = "auto") -> FWResult:
    """Maximize the plain concave objective of ``problem`` from a feasible ``start``.

    The Frank-Wolfe gap <grad F(z), s - z> bounds F* - F(z) for concave F,
    so ``value + gap`` is always a valid upper bound, even at the iteration cap.
    """
    obj = problem.objective(perspective=False)
    z = np.clip(np.asarray(start, dtype=float), problem.lo, problem.hi)
    value = obj.value(z)
    best_bound = np.inf
    for it in range(1, max_iter + 1):
        grad = obj.gradient(z)
        lp = LinearProgram(c=grad, A=problem.G, b=problem.h, lower=problem.lo, upper=problem.hi)
        res = solve_lp(lp, backend=lp_backend)
        if res.status is not LPStatus.OPTIMAL:
            raise RuntimeError(f"Frank-Wolfe oracle returned {res.status.value}")
        d = res.x - z
        gap = max(float(grad @ d), 0.0)
        best_bound = min(best_bound, value + gap)
        if best_bound - value <= eps_gap:
            return FWResult(z, value, best_bound - value, it, True)
        t = _line_search(obj, z, d)
        z = z + t * d
        value = obj.value(z)
    return FWResult(z, value, max(best_bound - value, 0.0), max_iter, False)
