"""Normalized video quality and the Hessian diagnostic of the gated objective."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linkbudget import DomainError


@dataclass(frozen=True)
class QualityParams:
    a_max_gbps: float = 1.5
    log_base: float = math.e

    def __post_init__(self) -> None:
        if not self.a_max_gbps > 0:
            raise DomainError(f"a_max_gbps must be positive, got {self.a_max_gbps}")
        if not self.log_base > 1:
            raise DomainError(f"log_base must exceed 1, got {self.log_base}")

    @property
    def normalizer(self) -> float:
        """K = 1 / log_beta(a_max + 1)."""
        return 1.0 / math.log(self.a_max_gbps + 1.0, self.log_base)

    @property
    def kappa(self) -> float:
        """Base-free scale: f_q(a) = kappa * ln(1 + min(a, a_max))."""
        return 1.0 / math.log1p(self.a_max_gbps)


DEFAULT_QUALITY = QualityParams()


def f_q(a: float, q: QualityParams = DEFAULT_QUALITY) -> float:
    """Normalized quality of a stream at rate ``a`` Gbit/s, saturating at 1."""
    if a < 0:
        raise DomainError(f"rate must be non-negative, got {a}")
    if a >= q.a_max_gbps:
        return 1.0
    b = q.log_base
    return math.log(a + 1.0, b) / math.log(q.a_max_gbps + 1.0, b)


def f_q_array(a: np.ndarray, q: QualityParams = DEFAULT_QUALITY) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise DomainError("rates must be non-negative")
    return np.log1p(np.minimum(a, q.a_max_gbps)) * q.kappa


@dataclass(frozen=True)
class HessianReport:
    h: np.ndarray
    eigenvalues: tuple[float, float]
    aux: float  # the scalar I = -(K/ln b) x / (a+1)^2


def gated_objective(a: float, x: float, q: QualityParams = DEFAULT_QUALITY) -> float:
    """f(a, x) = K log_b(a + 1) x, the unclamped quality gated by a relaxed indicator."""
    return q.normalizer * math.log(a + 1.0, q.log_base) * x


def hessian_eigenvalues(a: float, x: float, q: QualityParams = DEFAULT_QUALITY) -> HessianReport:
    """Closed-form Hessian of ``gated_objective`` and its two eigenvalues.

    The eigenvalues are I/2 +- sqrt(I^2 + (2c/(a+1))^2)/2 with c = K/ln(b);
    their product is -(c/(a+1))^2, so the Hessian is indefinite everywhere.
    """
    if not 0.0 <= a <= q.a_max_gbps:
        raise DomainError(f"rate must lie in [0, {q.a_max_gbps}], got {a}")
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"indicator must lie in [0, 1], got {x}")
    c = q.normalizer / math.log(q.log_base)
    off = c / (a + 1.0)
    aux = -c * x / (a + 1.0) ** 2
    # variable order (x, a)
    h = np.array([[0.0, off], [off, aux]])
    root = math.sqrt(aux * aux + (2.0 * off) ** 2)
    eig = (aux / 2.0 - root / 2.0, aux / 2.0 + root / 2.0)
    return HessianReport(h=h, eigenvalues=eig, aux=aux)
