"""Branch and bound over the link indicators, greedy warm start, and an enumeration oracle.

Search is best-bound-first. Each node is bounded by its certified relaxation
bound, branches on the most fractional indicator, and tries a support-rounding
heuristic to improve the incumbent early.

Sum-rate objectives usually have a whole face of optimal rate splits. By
default the reported split is the analytic centre of that face for the chosen
links, which is what an interior point solver converges to. Alternatives are
the simplex vertex (``tie_break="vertex"``) or the best quality among splits
within ``Tolerances.tie_break`` of the optimal sum rate (``"quality"``).
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from ..optmodel import (
    MixedIntegerConvexProgram,
    ObjectiveKind,
    ProblemSpec,
    Solution,
    build_program,
    infeasible_solution,
    make_solution,
    quality_objective,
)
from .relaxation import FREE, BnBNode, implied_caps, root_node, solve_fixed, solve_relaxation


@dataclass(frozen=True)
class Tolerances:
    absolute: float = 1e-6
    relaxation_gap: float = 1e-6
    relaxation_target: float = 1e-9
    prune: float = 1e-9
    integrality: float = 1e-6
    feasibility: float = 1e-9
    zero_rate: float = 1e-9
    tie_break: float = 1e-7


DEFAULT_TOLERANCES = Tolerances()
DEFAULT_NODE_BUDGET = 1_000_000
ORACLE_MAX_PAIRS = 12


class NodeBudgetExceeded(RuntimeError):
    def __init__(self, budget: int) -> None:
        super().__init__(f"node budget exhausted: explored node_budget={budget} nodes without closing the search")
        self.budget = budget


class OracleTooLarge(ValueError):
    pass


@dataclass
class SearchStats:
    nodes: int = 0
    pruned: int = 0
    infeasible: int = 0
    heuristic_updates: int = 0
    max_depth: int = 0
    loose_bounds: int = 0

    def merge(self, other: "SearchStats") -> None:
        self.nodes += other.nodes
        self.pruned += other.pruned
        self.infeasible += other.infeasible
        self.heuristic_updates += other.heuristic_updates
        self.max_depth = max(self.max_depth, other.max_depth)
        self.loose_bounds += other.loose_bounds


@dataclass
class _Incumbent:
    value: float = -np.inf
    x: np.ndarray | None = None
    a: np.ndarray | None = None
    tried: set = field(default_factory=set)

    def offer(self, x: np.ndarray, a: np.ndarray, value: float) -> bool:
        if value > self.value:
            self.value, self.x, self.a = value, x.copy(), a.copy()
            return True
        return False


class _Beams:
    def __init__(self, spec: ProblemSpec) -> None:
        self.S = spec.instance.num_sources
        self.R = spec.instance.num_relays
        self.source = spec.beams_source
        self.relay = spec.beams_relay
        self.lower = spec.lower_bounds_gbps

    def can_add(self, x: np.ndarray, k: int) -> bool:
        i, j = divmod(k, self.R)
        grid = x.reshape(self.S, self.R)
        return grid[i].sum() < self.source[i] and grid[:, j].sum() < self.relay[j]

    def feasible(self, x: np.ndarray) -> bool:
        grid = x.reshape(self.S, self.R)
        return bool(np.all(grid.sum(axis=1) <= self.source) and np.all(grid.sum(axis=0) <= self.relay))


def _fixed_method(program: MixedIntegerConvexProgram) -> str:
    return "lp" if program.objective.is_linear else "ipm"


def _try_fixed(program, x, incumbent: _Incumbent, tol: Tolerances, lp_backend: str) -> bool:
    key = x.tobytes()
    if key in incumbent.tried:
        return False
    incumbent.tried.add(key)
    res = solve_fixed(program, x, eps_gap=tol.relaxation_target, method=_fixed_method(program), lp_backend=lp_backend)
    return res.feasible and incumbent.offer(x, res.a, res.value)


def _round_support(node: BnBNode, a: np.ndarray, beams: _Beams, zero_rate: float) -> np.ndarray:
    """Switch on the pairs carrying the most rate, largest first, while beams allow."""
    x = (node.fixed == 1).astype(np.int8)
    order = np.argsort(-a, kind="stable")
    for k in order:
        if a[k] <= zero_rate:
            break
        if node.fixed[k] == FREE and beams.can_add(x, k):
            x[k] = 1
    return x


def _propagate(fixed: np.ndarray, caps: np.ndarray, beams: _Beams, tol: float) -> np.ndarray | None:
    """Switch off links that cannot be part of any assignment meeting a source's lower bound.

    With ``r`` beams still open at source i, the most it can receive is the
    rate already committed plus its ``r`` best free links. A free link whose
    use leaves that maximum below the bound is fixed to 0. Returns None when
    some source cannot reach its bound at all.
    """
    S, R = beams.S, beams.R
    fixed = fixed.copy()
    grid = fixed.reshape(S, R)
    u = caps.reshape(S, R)
    for i in range(S):
        if beams.lower[i] <= 0:
            continue
        committed = u[i, grid[i] == 1].sum()
        free = np.flatnonzero(grid[i] == FREE)
        left = int(beams.source[i] - np.sum(grid[i] == 1))
        best = np.sort(u[i, free])[::-1]
        reach = committed + best[: max(left, 0)].sum()
        if reach < beams.lower[i] - tol:
            return None
        if left <= 0 or len(free) == 0:
            continue
        # using link j instead of the weakest of the top-``left`` ones
        runner_up = best[left - 1] if left <= len(best) else 0.0
        for j in free:
            alt = reach - runner_up + u[i, j] if u[i, j] < runner_up else reach
            if alt < beams.lower[i] - tol:
                grid[i, j] = 0
    return fixed


def _search(
    program: MixedIntegerConvexProgram,
    beams: _Beams,
    tol: Tolerances,
    budget: int,
    method: str,
    lp_backend: str,
    incumbent: _Incumbent,
    first_feasible: bool = False,
) -> SearchStats:
    stats = SearchStats()
    counter = itertools.count()
    caps = implied_caps(program)
    # Feasibility runs dive depth-first; optimization is best-bound-first.
    heap = [(0.0, -np.inf, next(counter), root_node(program))]
    while heap:
        _, neg_bound, _, node = heapq.heappop(heap)
        if -neg_bound <= incumbent.value + tol.prune:
            stats.pruned += 1
            continue
        if stats.nodes >= budget:
            raise NodeBudgetExceeded(budget)
        stats.nodes += 1
        stats.max_depth = max(stats.max_depth, node.depth)
        fixed = _propagate(node.fixed, caps, beams, tol.feasibility)
        if fixed is None:
            stats.infeasible += 1
            continue
        node = BnBNode(fixed, node.parent_bound, node.depth)
        rel = solve_relaxation(
            program, node, eps_gap=tol.relaxation_target, method=method,
            lp_backend=lp_backend, zero_rate=tol.zero_rate, feas_tol=tol.feasibility,
        )
        if not rel.feasible:
            stats.infeasible += 1
            continue
        if rel.gap > tol.relaxation_gap:
            stats.loose_bounds += 1
        bound = min(rel.bound, node.parent_bound)
        if bound <= incumbent.value + tol.prune:
            stats.pruned += 1
            continue
        free = node.fixed == FREE
        frac = np.minimum(rel.x, 1.0 - rel.x)
        frac[~free] = 0.0
        if np.all(frac <= tol.integrality):
            # The relaxation optimum is integral: the node is solved exactly.
            x = np.where(free, np.round(rel.x), node.fixed).astype(np.int8)
            _try_fixed(program, x, incumbent, tol, lp_backend)
            if first_feasible and incumbent.x is not None:
                return stats
            continue
        guess = _round_support(node, rel.a, beams, tol.zero_rate)
        if _try_fixed(program, guess, incumbent, tol, lp_backend):
            stats.heuristic_updates += 1
        if first_feasible and incumbent.x is not None:
            return stats
        # argmax returns the lowest index among equally fractional entries
        k = int(np.argmax(frac))
        for value in ((1, 0) if first_feasible else (0, 1)):
            if value == 1 and not beams.can_add(np.where(node.fixed == 1, 1, 0), k):
                continue
            depth_key = -(node.depth + 1) if first_feasible else 0.0
            heapq.heappush(heap, (depth_key, -bound, next(counter), node.child(k, value, bound)))
    return stats


def _tie_break_program(program: MixedIntegerConvexProgram, spec: ProblemSpec, best_sum: float, slack: float):
    """Quality maximization over the rate splits whose sum-rate objective stays within ``slack``."""
    n = program.num_pairs
    row = np.zeros(2 * n)
    row[:n] = -program.objective.linear
    stage2 = program.with_objective(quality_objective(n, spec.quality)).with_rows(row, [-(best_sum - slack)], ["tie[0]"])
    return stage2


TIE_BREAKS = ("center", "vertex", "quality")


def _check_tie_break(mode: str) -> None:
    if mode not in TIE_BREAKS:
        raise ValueError(f"unknown tie_break {mode!r}; expected one of {TIE_BREAKS}")


def _central_rates(program: MixedIntegerConvexProgram, x: np.ndarray, tol: Tolerances) -> np.ndarray:
    """Interior point solution of the rate LP for fixed links: the centre of its optimal face."""
    res = solve_fixed(program, x, eps_gap=tol.relaxation_target, method="ipm")
    return res.a


def _polished_rates(program: MixedIntegerConvexProgram, x: np.ndarray, a: np.ndarray, value: float) -> np.ndarray:
    """Re-solve the winning assignment to full precision.

    Search-time solves stop at a 1e-9 certified gap, which leaves the rates
    themselves off by up to about sqrt(1e-9) on flat faces of the objective.
    """
    res = solve_fixed(program, x, eps_gap=0.0, method="ipm")
    return res.a if res.feasible and res.value >= value else a


def _greedy_x(spec: ProblemSpec) -> np.ndarray:
    inst = spec.instance
    S, R = inst.num_sources, inst.num_relays
    cap = spec.rate_caps
    residual = inst.a_rdr_max.astype(float).copy()
    x = np.zeros((S, R), dtype=np.int8)
    used_s = np.zeros(S, dtype=int)
    used_r = np.zeros(R, dtype=int)
    while True:
        score = np.minimum(cap, residual[None, :])
        open_ = (x == 0) & (used_s[:, None] < spec.beams_source[:, None]) & (used_r[None, :] < spec.beams_relay[None, :])
        score = np.where(open_, score, -np.inf)
        k = int(np.argmax(score))
        i, j = divmod(k, R)
        if not np.isfinite(score[i, j]) or score[i, j] <= 0:
            return x.ravel()
        x[i, j] = 1
        used_s[i] += 1
        used_r[j] += 1
        residual[j] -= score[i, j]


def greedy_incumbent(spec: ProblemSpec, lp_backend: str = "auto") -> Solution | None:
    """Greedy link assignment followed by the continuous solve; None when it misses the lower bounds."""
    t0 = time.perf_counter()
    program = build_program(spec)
    x = _greedy_x(spec)
    res = solve_fixed(program, x, method=_fixed_method(program), lp_backend=lp_backend)
    if not res.feasible:
        return None
    return make_solution(spec, x, res.a, 0, time.perf_counter() - t0)


def branch_and_bound(
    spec: ProblemSpec,
    tol: Tolerances = DEFAULT_TOLERANCES,
    node_budget: int = DEFAULT_NODE_BUDGET,
    method: str = "ipm",
    lp_backend: str = "auto",
    warm_start: bool = True,
    tie_break: str = "center",
    feasibility_only: bool = False,
) -> Solution:
    """Globally optimal relay selection, or an Infeasible solution.

    ``feasibility_only`` stops at the first integer-feasible point; the
    returned status is exact but the objective is not optimized.
    """
    t0 = time.perf_counter()
    program = build_program(spec)
    beams = _Beams(spec)
    incumbent = _Incumbent()
    if warm_start:
        x = _greedy_x(spec)
        _try_fixed(program, x, incumbent, tol, lp_backend)
    stats = SearchStats()
    if not (feasibility_only and incumbent.x is not None):
        stats = _search(program, beams, tol, node_budget, method, lp_backend, incumbent, feasibility_only)
    if incumbent.x is None:
        return infeasible_solution(spec, stats.nodes, time.perf_counter() - t0)

    stages = 1
    if not program.objective.is_linear and not feasibility_only:
        incumbent.a = _polished_rates(program, incumbent.x, incumbent.a, incumbent.value)
    if program.objective.is_linear and not feasibility_only:
        _check_tie_break(tie_break)
        if tie_break == "center":
            incumbent.a = _central_rates(program, incumbent.x, tol)
        elif tie_break == "quality":
            stage2 = _tie_break_program(program, spec, incumbent.value, tol.tie_break)
            second = _Incumbent()
            second.offer(incumbent.x, incumbent.a, stage2.objective.value(incumbent.a))
            remaining = node_budget - stats.nodes
            if remaining <= 0:
                raise NodeBudgetExceeded(node_budget)
            try:
                stats.merge(_search(stage2, beams, tol, remaining, method, lp_backend, second))
            except NodeBudgetExceeded:
                raise NodeBudgetExceeded(node_budget) from None
            incumbent = second
            stages = 2

    sol = make_solution(spec, incumbent.x, incumbent.a, stats.nodes, time.perf_counter() - t0)
    sol.stats.update(vars(stats), stages=stages, feasibility_only=feasibility_only)
    return sol


def _beam_feasible_assignments(beams: _Beams, n: int):
    for bits in itertools.product((0, 1), repeat=n):
        x = np.array(bits, dtype=np.int8)
        if beams.feasible(x):
            yield x


def enumerate_oracle(spec: ProblemSpec, eps_gap: float = 1e-8, lp_backend: str = "simplex", tie_break: str = "center") -> Solution:
    """Exhaustive search over every beam-feasible indicator vector.

    Sum-rate objectives solve each rate program as an LP; the quality
    objective goes through the interior point solver. Ties resolve to the
    first vector in lexicographic order.
    """
    n = spec.instance.num_sources * spec.instance.num_relays
    if n > ORACLE_MAX_PAIRS:
        raise OracleTooLarge(f"enumerate_oracle handles at most {ORACLE_MAX_PAIRS} pairs, got {n}")
    t0 = time.perf_counter()
    program = build_program(spec)
    beams = _Beams(spec)
    method = _fixed_method(program)
    results = []
    for x in _beam_feasible_assignments(beams, n):
        res = solve_fixed(program, x, eps_gap=eps_gap, method=method, lp_backend=lp_backend)
        if res.feasible:
            results.append((x, res.a, res.value))
    if not results:
        return infeasible_solution(spec, len(results), time.perf_counter() - t0)
    # max() keeps the first of equal values, i.e. the lexicographically smallest x
    best_x, best_a, best = max(results, key=lambda r: r[2])
    if not program.objective.is_linear:
        best_a = _polished_rates(program, best_x, best_a, best)
    if program.objective.is_linear:
        _check_tie_break(tie_break)
        if tie_break == "center":
            best_a = _central_rates(program, best_x, DEFAULT_TOLERANCES)
        elif tie_break == "quality":
            stage2 = _tie_break_program(program, spec, best, DEFAULT_TOLERANCES.tie_break)
            top = -np.inf
            for x, _, value in results:
                if value < best - DEFAULT_TOLERANCES.tie_break:
                    continue
                res = solve_fixed(stage2, x, eps_gap=eps_gap, method="ipm")
                if res.feasible and res.value > top:
                    top, best_x, best_a = res.value, x, res.a
    return make_solution(spec, best_x, best_a, len(results), time.perf_counter() - t0)
