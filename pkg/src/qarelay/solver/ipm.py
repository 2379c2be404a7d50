"""Primal-dual interior point method for smooth concave maximization.

Solves ``max F(z)  s.t.  G z <= h,  lo < z < hi`` with Mehrotra's
predictor-corrector. Box bounds are kept strictly feasible at every iterate
(so ``F`` is only ever evaluated inside its domain); the general rows may
start infeasible and are driven to feasibility through their slacks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np
import scipy.linalg


class ConcaveObjective(Protocol):
    def value(self, z: np.ndarray) -> float: ...

    def gradient(self, z: np.ndarray) -> np.ndarray: ...

    def hessian(self, z: np.ndarray) -> np.ndarray: ...


@dataclass
class IPMResult:
    z: np.ndarray
    duals: np.ndarray
    iterations: int
    converged: bool
    primal_residual: float
    mu: float


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not neg.any():
        return np.inf
    return float(np.min(-v[neg] / dv[neg]))


def maximize_concave(
    objective: ConcaveObjective,
    G: np.ndarray,
    h: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    z0: np.ndarray | None = None,
    feas_tol: float = 1e-11,
    mu_tol: float = 1e-13,
    max_iter: int = 200,
    dual_tol: float = 1e-9,
    stop: Callable[[np.ndarray, np.ndarray], bool] | None = None,
) -> IPMResult:
    """Run the interior point iteration.

    ``stop(z, duals)`` is polled once the rows are satisfied to ``feas_tol``;
    returning True ends the run early with ``converged=True``. Passing
    ``dual_tol=inf`` ends the run on complementarity alone, which suits
    objectives whose gradient is discontinuous at the box corner.
    """
    m, N = G.shape
    width = hi - lo
    if np.any(width <= 0):
        raise ValueError("every variable needs a box with positive width")
    z = lo + 0.5 * width if z0 is None else np.clip(z0, lo + 1e-3 * width, hi - 1e-3 * width)
    s = np.maximum(h - G @ z, 1.0)
    lam = np.ones(m)
    wl = np.ones(N)
    wu = np.ones(N)
    n_comp = m + 2 * N
    Gt = G.T
    rp_norm = np.inf
    mu = np.inf
    sigma_floor = 0.0

    for it in range(1, max_iter + 1):
        zl = z - lo
        zu = hi - z
        g = -objective.gradient(z)
        H = -objective.hessian(z)
        r_d = g + Gt @ lam - wl + wu
        r_p = G @ z + s - h
        mu = (s @ lam + zl @ wl + zu @ wu) / n_comp
        rp_norm = float(np.abs(r_p).max()) if m else 0.0
        rd_norm = float(np.abs(r_d).max())
        if rp_norm <= feas_tol:
            if stop is not None and stop(z, lam):
                return IPMResult(z, lam, it, True, rp_norm, mu)
            if mu <= mu_tol and rd_norm <= dual_tol:
                return IPMResult(z, lam, it, True, rp_norm, mu)

        d_row = lam / s
        M = H + (Gt * d_row) @ G
        M[np.diag_indices(N)] += wl / zl + wu / zu
        factor = _Factor(M)

        def direction(r_s: np.ndarray, r_l: np.ndarray, r_u: np.ndarray):
            rhs = -r_d - Gt @ (d_row * r_p - r_s / s) - r_l / zl + r_u / zu
            dz = factor.solve(rhs)
            ds = -r_p - G @ dz
            dlam = (-r_s - lam * ds) / s
            dwl = (-r_l - wl * dz) / zl
            dwu = (-r_u + wu * dz) / zu
            return dz, ds, dlam, dwl, dwu

        def step_bound(dz, ds, dlam, dwl, dwu) -> float:
            return min(
                _max_step(s, ds),
                _max_step(lam, dlam),
                _max_step(zl, dz),
                _max_step(zu, -dz),
                _max_step(wl, dwl),
                _max_step(wu, dwu),
            )

        aff = direction(s * lam, zl * wl, zu * wu)
        dz_a, ds_a, dlam_a, dwl_a, dwu_a = aff
        alpha = min(1.0, step_bound(*aff))
        mu_aff = (
            (s + alpha * ds_a) @ (lam + alpha * dlam_a)
            + (zl + alpha * dz_a) @ (wl + alpha * dwl_a)
            + (zu - alpha * dz_a) @ (wu + alpha * dwu_a)
        ) / n_comp
        sigma = max(sigma_floor, min(1.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
        target = sigma * mu
        cor = direction(
            s * lam + ds_a * dlam_a - target,
            zl * wl + dz_a * dwl_a - target,
            zu * wu - dz_a * dwu_a - target,
        )
        alpha = min(1.0, 0.995 * step_bound(*cor))
        # a short step means the corrector overshot on the curved objective;
        # keep the next target closer to the central path until steps recover
        sigma_floor = 0.1 if alpha < 0.9 else 0.0
        dz, ds, dlam, dwl, dwu = cor
        z = z + alpha * dz
        s = s + alpha * ds
        lam = lam + alpha * dlam
        wl = wl + alpha * dwl
        wu = wu + alpha * dwu

    return IPMResult(z, lam, max_iter, False, rp_norm, mu)


class _Factor:
    """Cholesky of M after symmetric diagonal scaling, with one refinement step.

    Near the optimum the barrier terms spread the diagonal over many orders
    of magnitude; scaling to unit diagonal keeps the factorization usable.
    """

    def __init__(self, M: np.ndarray) -> None:
        self.M = M
        diag = np.abs(np.diag(M))
        self.d = 1.0 / np.sqrt(np.where(diag > 0, diag, 1.0))
        Ms = M * self.d[:, None] * self.d[None, :]
        reg = 0.0
        for _ in range(10):
            try:
                self.cho = scipy.linalg.cho_factor(Ms + reg * np.eye(len(M)), check_finite=False)
                return
            except np.linalg.LinAlgError:
                reg = max(reg * 10.0, 1e-14)
        raise np.linalg.LinAlgError("interior point system is not positive definite")

    def _solve(self, rhs: np.ndarray) -> np.ndarray:
        return self.d * scipy.linalg.cho_solve(self.cho, self.d * rhs, check_finite=False)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        x = self._solve(rhs)
        return x + self._solve(rhs - self.M @ x)
