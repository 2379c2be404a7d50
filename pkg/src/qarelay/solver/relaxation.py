"""Continuous relaxations of the relay-selection program at branch-and-bound nodes.

At a node some indicators are fixed to 0 or 1 and the rest relax to [0, 1].
The relaxation maximizes the perspective of each per-pair term,
``x * g(a / x)``. It agrees with ``g(a)`` whenever x is 0 or 1, so it is a valid
relaxation, and it is much tighter than relaxing ``g(a)`` directly. Because
every term is positively homogeneous on the pair domain
``{0 <= a <= cap * x, 0 <= x <= 1}``, the Lagrangian that dualizes all
non-coupling rows has a closed-form maximizer. That yields a rigorous upper
bound for any non-negative multipliers, which is used as the certificate.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from ..optmodel import MixedIntegerConvexProgram, Objective
from .ipm import maximize_concave
from .lp import LinearProgram, LPStatus, solve_lp

FREE = -1
_COUPLING = re.compile(r"coupling\[(\d+),(\d+)\]")
CAP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class BnBNode:
    """Partial assignment of indicators: -1 free, 0 or 1 fixed."""

    fixed: np.ndarray
    parent_bound: float = np.inf
    depth: int = 0

    def child(self, k: int, value: int, bound: float) -> "BnBNode":
        fixed = self.fixed.copy()
        fixed[k] = value
        return BnBNode(fixed, bound, self.depth + 1)


def root_node(program: MixedIntegerConvexProgram) -> BnBNode:
    fixed = np.full(program.num_pairs, FREE, dtype=np.int8)
    # A link with zero capacity carries nothing, so switching it off loses nothing.
    fixed[implied_caps(program) <= CAP_TOL] = 0
    return BnBNode(fixed)


def coupling_pairs(program: MixedIntegerConvexProgram) -> np.ndarray:
    out = np.full(program.num_constraints, -1)
    for r, label in enumerate(program.labels):
        m = _COUPLING.fullmatch(label)
        if m:
            out[r] = int(m.group(1)) * program.num_relays + int(m.group(2))
    return out


class PairObjective:
    """Sum over pairs of w*kappa*ln(1 + a/2) + c*a, in perspective form where x is free.

    ``z = [a_0..a_{na-1}, x_0..x_{nx-1}]``; ``xidx[k]`` is the position of the
    indicator paired with rate k inside the x block, or -1 when x is fixed at 1.
    """

    def __init__(self, weight: np.ndarray, linear: np.ndarray, kappa: float, xidx: np.ndarray, nx: int) -> None:
        self.w = weight * kappa
        self.c = linear
        self.xidx = xidx
        self.na = len(weight)
        self.nx = nx
        self.paired = xidx >= 0
        self.xpos = self.na + xidx[self.paired]

    def _split(self, z: np.ndarray):
        a = z[: self.na]
        x = np.ones(self.na)
        x[self.paired] = z[self.xpos]
        return a, x

    def value(self, z: np.ndarray) -> float:
        a, x = self._split(z)
        return float(np.sum(self.w * x * np.log1p(a / (2.0 * x))) + self.c @ a)

    def gradient(self, z: np.ndarray) -> np.ndarray:
        a, x = self._split(z)
        t = a / x
        g = np.zeros(self.na + self.nx)
        g[: self.na] = self.w / (2.0 + t) + self.c
        gx = self.w * (np.log1p(t / 2.0) - t / (2.0 + t))
        g[self.xpos] = gx[self.paired]
        return g

    def hessian(self, z: np.ndarray) -> np.ndarray:
        a, x = self._split(z)
        t = a / x
        curv = -self.w / ((2.0 + t) ** 2 * x)
        N = self.na + self.nx
        H = np.zeros((N, N))
        idx = np.arange(self.na)
        H[idx, idx] = curv
        p = idx[self.paired]
        xp = self.xpos
        H[p, xp] = -t[p] * curv[p]
        H[xp, p] = -t[p] * curv[p]
        H[xp, xp] = t[p] ** 2 * curv[p]
        return H


class PlainObjective(PairObjective):
    """The same terms without the perspective: indicators carry no objective weight."""

    def _split(self, z: np.ndarray):
        return z[: self.na], np.ones(self.na)

    def gradient(self, z: np.ndarray) -> np.ndarray:
        a = z[: self.na]
        g = np.zeros(self.na + self.nx)
        g[: self.na] = self.w / (2.0 + a) + self.c
        return g

    def hessian(self, z: np.ndarray) -> np.ndarray:
        a = z[: self.na]
        N = self.na + self.nx
        H = np.zeros((N, N))
        idx = np.arange(self.na)
        H[idx, idx] = -self.w / (2.0 + a) ** 2
        return H


@dataclass(eq=False)
class NodeProblem:
    """The node's continuous program over z = [a (active pairs), x (free pairs)]."""

    G: np.ndarray
    h: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    a_pairs: np.ndarray
    x_pairs: np.ndarray
    coupling: np.ndarray
    weight: np.ndarray
    linear: np.ndarray
    kappa: float
    xidx: np.ndarray
    rows: np.ndarray
    infeasible: bool = False

    @property
    def na(self) -> int:
        return len(self.a_pairs)

    @property
    def nx(self) -> int:
        return len(self.x_pairs)

    def objective(self, perspective: bool = True) -> PairObjective:
        cls = PairObjective if perspective else PlainObjective
        return cls(self.weight, self.linear, self.kappa, self.xidx, self.nx)

    def upper_bound(self, duals: np.ndarray) -> float:
        """Lagrangian bound from multipliers on the non-coupling rows (must be >= 0)."""
        keep = ~self.coupling
        lam = np.maximum(duals[keep], 0.0)
        Gd = self.G[keep]
        p = lam @ Gd[:, : self.na]
        q = lam @ Gd[:, self.na :]
        cap = self.hi[: self.na]
        w = self.weight * self.kappa
        slope = p - self.linear
        a_star = np.where(
            w > 0,
            np.where(slope > 0, w / np.where(slope > 0, slope, 1.0) - 2.0, cap),
            np.where(slope < 0, cap, 0.0),
        )
        a_star = np.clip(a_star, 0.0, cap)
        best = w * np.log1p(a_star / 2.0) - slope * a_star
        paired = self.xidx >= 0
        best[paired] = np.maximum(0.0, best[paired] - q[self.xidx[paired]])
        return float(lam @ self.h[keep] + best.sum())

    def zero_point_feasible(self, tol: float) -> bool:
        return bool(np.all(self.h >= -tol))


def implied_caps(program: MixedIntegerConvexProgram) -> np.ndarray:
    """Per-pair rate bounds, tightened by rows that only add up non-negative rates.

    A row ``sum_k g_k a_k <= h`` with every ``g_k >= 0`` and no indicator
    terms forces ``a_k <= h / g_k``. Using the tighter value as the coupling
    coefficient leaves the integer program unchanged and strengthens the
    relaxation considerably when a relay's capacity is far below its links'.
    """
    n = program.num_pairs
    cap = program.cap.copy()
    Ga, Gx = program.G[:, :n], program.G[:, n:]
    rows = ~np.any(Gx != 0, axis=1) & np.all(Ga >= 0, axis=1) & np.any(Ga > 0, axis=1)
    for r in np.flatnonzero(rows):
        pos = Ga[r] > 0
        cap[pos] = np.minimum(cap[pos], max(program.h[r], 0.0) / Ga[r, pos])
    return cap


def node_problem(program: MixedIntegerConvexProgram, fixed: np.ndarray) -> NodeProblem:
    n = program.num_pairs
    cap = implied_caps(program)
    fixed = np.asarray(fixed)
    active = (fixed != 0) & (cap > CAP_TOL)
    free_x = (fixed == FREE) & (cap > CAP_TOL)
    ones = fixed == 1
    a_pairs = np.flatnonzero(active)
    x_pairs = np.flatnonzero(free_x)
    G_a = program.G[:, :n]
    G_x = program.G[:, n:].copy()
    cpl = coupling_pairs(program)
    crow = np.flatnonzero(cpl >= 0)
    G_x[crow, cpl[crow]] = -cap[cpl[crow]]
    h = program.h - G_x[:, ones].sum(axis=1)
    row_keep = (cpl < 0) | free_x[np.maximum(cpl, 0)]
    G = np.hstack([G_a[:, a_pairs], G_x[:, x_pairs]])
    empty = ~np.any(G != 0.0, axis=1)
    infeasible = bool(np.any(h[empty & row_keep] < -1e-12))
    row_keep &= ~empty
    rows = np.flatnonzero(row_keep)
    G = G[row_keep]
    h = h[row_keep]
    coupling = cpl[row_keep] >= 0
    xidx = np.full(len(a_pairs), -1)
    pos = {k: i for i, k in enumerate(x_pairs)}
    for i, k in enumerate(a_pairs):
        xidx[i] = pos.get(k, -1)
    lo = np.zeros(len(a_pairs) + len(x_pairs))
    hi = np.concatenate([cap[a_pairs], np.ones(len(x_pairs))])
    obj: Objective = program.objective
    return NodeProblem(
        G=G,
        h=h,
        lo=lo,
        hi=hi,
        a_pairs=a_pairs,
        x_pairs=x_pairs,
        coupling=coupling,
        weight=obj.quality_weight[a_pairs],
        linear=obj.linear[a_pairs],
        kappa=obj.kappa,
        xidx=xidx,
        rows=rows,
        infeasible=infeasible,
    )


@dataclass(eq=False)
class RelaxationResult:
    a: np.ndarray
    x: np.ndarray
    value: float
    gap: float
    iterations: int
    feasible: bool
    converged: bool = True
    method: str = "ipm"

    @property
    def bound(self) -> float:
        """value + gap: an upper bound on every solution in the node's subtree."""
        return self.value + self.gap


def is_feasible(problem: NodeProblem, tol: float = 1e-9, lp_backend: str = "auto") -> tuple[bool, np.ndarray | None]:
    """Phase-1 feasibility of the node polytope; returns a feasible point when an LP was needed."""
    if problem.infeasible:
        return False, None
    if problem.zero_point_feasible(tol):
        return True, np.zeros(problem.na + problem.nx)
    lp = LinearProgram(
        c=np.zeros(problem.na + problem.nx), A=problem.G, b=problem.h, lower=problem.lo, upper=problem.hi
    )
    res = solve_lp(lp, backend=lp_backend)
    if res.status is LPStatus.INFEASIBLE:
        return False, None
    return True, res.x


def _infeasible(n: int, method: str) -> RelaxationResult:
    return RelaxationResult(np.zeros(n), np.zeros(n), -np.inf, 0.0, 0, False, True, method)


def _scatter(program: MixedIntegerConvexProgram, problem: NodeProblem, fixed: np.ndarray, z: np.ndarray, zero_rate: float):
    n = program.num_pairs
    a = np.zeros(n)
    a[problem.a_pairs] = np.clip(z[: problem.na], 0.0, problem.hi[: problem.na])
    x = np.where(np.asarray(fixed) == 1, 1.0, 0.0)
    x[problem.x_pairs] = z[problem.na :]
    # With no flow an indicator earns nothing; report it switched off.
    idle = (np.asarray(fixed) == FREE) & (a <= zero_rate)
    x[idle] = 0.0
    a[idle] = 0.0
    return a, x


def solve_relaxation(
    program: MixedIntegerConvexProgram,
    node: BnBNode,
    eps_gap: float = 1e-9,
    method: str = "ipm",
    lp_backend: str = "auto",
    max_iter: int | None = None,
    zero_rate: float = 1e-9,
    feas_tol: float = 1e-9,
) -> RelaxationResult:
    """Maximize the node relaxation; ``bound`` is a certified upper bound.

    ``method="ipm"`` solves the perspective relaxation by interior point with a
    Lagrangian certificate. ``method="frank_wolfe"`` runs conditional gradient
    on the plain (non-perspective) relaxation with an LP oracle; its duality
    gap certifies a looser but still valid bound.
    """
    n = program.num_pairs
    problem = node_problem(program, node.fixed)
    feasible, start = is_feasible(problem, feas_tol, lp_backend)
    if not feasible:
        return _infeasible(n, method)
    if problem.na == 0:
        a, x = _scatter(program, problem, node.fixed, np.zeros(problem.nx), zero_rate)
        return RelaxationResult(a, x, 0.0, 0.0, 0, True, True, method)

    if method == "frank_wolfe":
        from .frank_wolfe import frank_wolfe

        fw = frank_wolfe(problem, start, eps_gap, max_iter or 5000, lp_backend)
        a, x = _scatter(program, problem, node.fixed, fw.z, 0.0)
        return RelaxationResult(a, x, fw.value, fw.gap, fw.iterations, True, fw.converged, method)
    if method != "ipm":
        raise ValueError(f"unknown relaxation method {method!r}")

    iters = 0
    z, duals, lb, ub, it = _ipm_pass(problem, eps_gap, max_iter or 200)
    iters += it
    if ub - lb > eps_gap:
        # Idle pairs sit at the kink of the perspective, where duals stall.
        # Re-solving with them switched off is smooth; its duals still certify
        # the full node because idle pairs enter the bound in closed form.
        fixed = np.array(node.fixed, copy=True)
        a_full, _ = _scatter(program, problem, node.fixed, z, 0.0)
        idle = (fixed == FREE) & (a_full <= _IDLE_RATE * np.maximum(program.cap, 1.0))
        if idle.any():
            fixed[idle] = 0
            reduced = node_problem(program, fixed)
            if reduced.na and not reduced.infeasible:
                z2, d2, lb2, ub2, it2 = _ipm_pass(reduced, eps_gap, max_iter or 200)
                iters += it2
                mapped = np.zeros(program.num_constraints)
                mapped[reduced.rows] = d2
                ub = min(ub, problem.upper_bound(mapped[problem.rows]))
                if lb2 > lb:
                    a2, x2 = _scatter(program, reduced, fixed, z2, zero_rate)
                    gap = max(ub - lb2, 0.0)
                    return RelaxationResult(a2, x2, lb2, gap, iters, True, gap <= eps_gap, method)
    a, x = _scatter(program, problem, node.fixed, z, zero_rate)
    gap = max(ub - lb, 0.0)
    return RelaxationResult(a, x, lb, gap, iters, True, gap <= eps_gap, method)


_IDLE_RATE = 1e-7


def _ipm_pass(problem: NodeProblem, eps_gap: float, max_iter: int):
    """One interior point solve; returns (z, duals, value, certified bound, iterations)."""
    obj = problem.objective(perspective=True)
    best = {"ub": np.inf}

    def stop(z: np.ndarray, duals: np.ndarray) -> bool:
        best["ub"] = min(best["ub"], problem.upper_bound(duals))
        return best["ub"] - obj.value(z) <= eps_gap

    z0 = np.concatenate([
        np.where(problem.xidx >= 0, 0.25, 0.5) * problem.hi[: problem.na],
        np.full(problem.nx, 0.5),
    ])
    res = maximize_concave(
        obj, problem.G, problem.h, problem.lo, problem.hi, z0=z0,
        mu_tol=1e-14, max_iter=max_iter, dual_tol=np.inf, stop=stop,
    )
    ub = min(best["ub"], problem.upper_bound(res.duals))
    return res.z, res.duals, obj.value(res.z), ub, res.iterations


@dataclass(eq=False)
class FixedSolve:
    feasible: bool
    a: np.ndarray
    value: float
    gap: float = 0.0


def solve_fixed(
    program: MixedIntegerConvexProgram,
    x: np.ndarray,
    eps_gap: float = 1e-9,
    method: str = "ipm",
    lp_backend: str = "auto",
) -> FixedSolve:
    """Optimal rates for a fixed binary indicator vector.

    ``method="lp"`` (linear objectives only) solves the rate LP by simplex and
    returns a vertex; ``"ipm"`` returns the interior point optimum.
    """
    x = np.asarray(x).round().astype(np.int8)
    n = program.num_pairs
    if method == "lp":
        if not program.objective.is_linear:
            raise ValueError("the LP route needs a linear objective")
        problem = node_problem(program, x)
        if problem.infeasible:
            return FixedSolve(False, np.zeros(n), -np.inf)
        if problem.na == 0:
            return FixedSolve(True, np.zeros(n), 0.0)
        lp = LinearProgram(c=problem.linear, A=problem.G, b=problem.h, lower=problem.lo, upper=problem.hi)
        res = solve_lp(lp, backend=lp_backend)
        if res.status is not LPStatus.OPTIMAL:
            return FixedSolve(False, np.zeros(n), -np.inf)
        a = np.zeros(n)
        a[problem.a_pairs] = np.clip(res.x, 0.0, problem.hi)
        return FixedSolve(True, a, float(program.objective.value(a)))
    rel = solve_relaxation(program, BnBNode(x), eps_gap=eps_gap, method=method, lp_backend=lp_backend, zero_rate=0.0)
    if not rel.feasible:
        return FixedSolve(False, np.zeros(n), -np.inf)
    a = np.where(x == 1, rel.a, 0.0)
    return FixedSolve(True, a, float(program.objective.value(a)), rel.gap)
