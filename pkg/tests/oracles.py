"""Independent reference solvers and instance generators shared by the tests."""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np

from qarelay.optmodel import NetworkInstance, ObjectiveKind, ProblemSpec, build_gated_program
from qarelay.solver.ipm import maximize_concave
from qarelay.solver.lp import LinearProgram, LPStatus, solve_lp


def random_spec(rng: np.random.Generator, max_sources=3, max_relays=3, kind="vqm") -> ProblemSpec:
    S = int(rng.integers(1, max_sources + 1))
    R = int(rng.integers(1, max_relays + 1))
    inst = NetworkInstance(
        a_srr_max=rng.uniform(0, 3, (S, R)),
        a_rdr_max=rng.uniform(0, 3, R),
        beams_source=rng.integers(1, 3, S),
        beams_relay=rng.integers(1, 3, R),
    )
    lower = float(rng.choice([0.0, 0.75]))
    return ProblemSpec(inst, lower_bounds_gbps=lower, objective_kind=ObjectiveKind.parse(kind))


class _Separable:
    """sum_k w_k ln(1 + a_k/2) + c_k a_k, written out independently of the solver package."""

    def __init__(self, w, c):
        self.w, self.c = np.asarray(w, float), np.asarray(c, float)

    def value(self, a):
        return float(self.w @ np.log1p(a / 2.0) + self.c @ a)

    def gradient(self, a):
        return self.w / (2.0 + a) + self.c

    def hessian(self, a):
        return np.diag(-self.w / (2.0 + a) ** 2)


def solve_gated(spec: ProblemSpec, x) -> tuple[bool, float]:
    """Optimal value of the x-gated continuous program, or (False, -inf) when infeasible.

    Feasibility comes from an LP phase one on HiGHS; the value from an interior
    point run on the gated rows (every rate multiplied by its indicator).
    """
    g = build_gated_program(spec, np.asarray(x).ravel())
    n = len(g.cap)
    lo, hi = np.zeros(n), g.cap.copy()
    phase1 = solve_lp(LinearProgram(c=np.zeros(n), A=g.G, b=g.h, lower=lo, upper=hi), backend="highs")
    if phase1.status is not LPStatus.OPTIMAL:
        return False, -np.inf
    obj = g.objective
    w = obj.quality_weight * obj.kappa
    if not np.any(w):
        res = solve_lp(LinearProgram(c=obj.linear, A=g.G, b=g.h, lower=lo, upper=hi), backend="highs")
        return True, float(res.value)
    # the box needs positive width; a zero-capacity pair can only carry zero
    live = hi > 0
    sub = maximize_concave(
        _Separable(w[live], obj.linear[live]), g.G[:, live], g.h, lo[live], hi[live],
    )
    return True, _Separable(w[live], obj.linear[live]).value(sub.z)


def exact_simplex(c, A, b):
    """max c.x s.t. A x <= b, x >= 0 with b >= 0, in exact rational arithmetic (Bland's rule)."""
    m, n = len(A), len(c)
    T = [[Fraction(v) for v in A[i]] + [Fraction(int(i == k)) for k in range(m)] + [Fraction(b[i])] for i in range(m)]
    z = [Fraction(-v) for v in c] + [Fraction(0)] * (m + 1)
    basis = list(range(n, n + m))
    while True:
        entering = next((j for j in range(n + m) if z[j] < 0), None)
        if entering is None:
            break
        ratios = [(T[i][-1] / T[i][entering], basis[i], i) for i in range(m) if T[i][entering] > 0]
        if not ratios:
            return None, None  # unbounded
        _, _, r = min(ratios)
        piv = T[r][entering]
        T[r] = [v / piv for v in T[r]]
        for i in range(m):
            if i != r and T[i][entering] != 0:
                f = T[i][entering]
                T[i] = [vi - f * vr for vi, vr in zip(T[i], T[r])]
        f = z[entering]
        z = [vz - f * vr for vz, vr in zip(z, T[r])]
        basis[r] = entering
    x = [Fraction(0)] * (n + m)
    for i, j in enumerate(basis):
        x[j] = T[i][-1]
    return x[:n], z[-1]


def binary_vectors(n: int):
    return (np.array(v) for v in itertools.product((0, 1), repeat=n))
