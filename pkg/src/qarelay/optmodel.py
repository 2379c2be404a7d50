"""Problem instances and the convexified relay-selection program.

Pairs (source i, relay j) are flattened row-major: ``k = i * R + j``. The
program's variable vector is ``[a_0..a_{n-1}, x_0..x_{n-1}]`` with rates in
Gbit/s and ``x`` the binary connectivity indicators.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linkbudget import DEFAULT_PARAMS, DomainError, LinkBudgetParams, capacity_bps
from .quality import DEFAULT_QUALITY, QualityParams, f_q_array


class ObjectiveKind(str, enum.Enum):
    VQM = "vqm"
    SRM = "srm"
    JRSR = "jrsr"

    @classmethod
    def parse(cls, value: "str | ObjectiveKind") -> "ObjectiveKind":
        if isinstance(value, ObjectiveKind):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown objective {value!r}; expected vqm, srm or jrsr") from None


class SolveStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"


def _as_points(points: Sequence[Sequence[float]] | np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DomainError(f"{name} must be a list of [x, y] points")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite coordinates")
    return arr


def _beam_vector(beams: int | Sequence[int], count: int, name: str) -> np.ndarray:
    arr = np.full(count, beams, dtype=int) if np.isscalar(beams) else np.asarray(beams, dtype=int)
    if arr.shape != (count,):
        raise DomainError(f"{name} must have {count} entries, got shape {arr.shape}")
    if np.any(arr < 1):
        raise DomainError(f"{name} must be positive integers")
    return arr


@dataclass(frozen=True, eq=False)
class NetworkInstance:
    a_srr_max: np.ndarray
    a_rdr_max: np.ndarray
    beams_source: np.ndarray
    beams_relay: np.ndarray
    source_positions: np.ndarray | None = None
    relay_positions: np.ndarray | None = None
    destination_position: np.ndarray | None = None

    def __post_init__(self) -> None:
        srr = np.asarray(self.a_srr_max, dtype=float)
        rdr = np.asarray(self.a_rdr_max, dtype=float)
        if srr.ndim != 2 or srr.shape[0] < 1 or srr.shape[1] < 1:
            raise DomainError("a_srr_max must be a non-empty sources x relays matrix")
        if rdr.shape != (srr.shape[1],):
            raise DomainError("a_rdr_max length must equal the number of relays")
        if np.any(srr < 0) or np.any(rdr < 0) or not np.all(np.isfinite(srr)) or not np.all(np.isfinite(rdr)):
            raise DomainError("achievable rates must be finite and non-negative")
        object.__setattr__(self, "a_srr_max", srr)
        object.__setattr__(self, "a_rdr_max", rdr)
        object.__setattr__(self, "beams_source", _beam_vector(self.beams_source, srr.shape[0], "beams_source"))
        object.__setattr__(self, "beams_relay", _beam_vector(self.beams_relay, srr.shape[1], "beams_relay"))
        if self.source_positions is not None and len(self.source_positions) != srr.shape[0]:
            raise DomainError("source position count does not match the rate matrix")
        if self.relay_positions is not None and len(self.relay_positions) != srr.shape[1]:
            raise DomainError("relay position count does not match the rate matrix")

    @property
    def num_sources(self) -> int:
        return self.a_srr_max.shape[0]

    @property
    def num_relays(self) -> int:
        return self.a_srr_max.shape[1]

    def with_beams(self, beams_source: int | Sequence[int], beams_relay: int | Sequence[int]) -> "NetworkInstance":
        return NetworkInstance(
            a_srr_max=self.a_srr_max,
            a_rdr_max=self.a_rdr_max,
            beams_source=_beam_vector(beams_source, self.num_sources, "beams_source"),
            beams_relay=_beam_vector(beams_relay, self.num_relays, "beams_relay"),
            source_positions=self.source_positions,
            relay_positions=self.relay_positions,
            destination_position=self.destination_position,
        )


def build_instance(
    sources: Sequence[Sequence[float]],
    relays: Sequence[Sequence[float]],
    destination: Sequence[float] = (0.0, 0.0),
    beams_source: int | Sequence[int] = 1,
    beams_relay: int | Sequence[int] = 1,
    params: LinkBudgetParams = DEFAULT_PARAMS,
) -> NetworkInstance:
    """Fill the achievable-rate tables from node geometry via the link budget."""
    src = _as_points(sources, "sources")
    rel = _as_points(relays, "relays")
    dst = np.asarray(destination, dtype=float)
    if dst.shape != (2,) or not np.all(np.isfinite(dst)):
        raise DomainError("destination must be a finite [x, y] point")
    if len(src) == 0 or len(rel) == 0:
        raise DomainError("need at least one source and one relay")
    srr = np.empty((len(src), len(rel)))
    for i, s in enumerate(src):
        for j, r in enumerate(rel):
            d = math.hypot(*(s - r))
            if d == 0:
                raise DomainError(f"source {i} and relay {j} are co-located")
            srr[i, j] = capacity_bps(d, params) / 1e9
    rdr = np.empty(len(rel))
    for j, r in enumerate(rel):
        d = math.hypot(*(r - dst))
        if d == 0:
            raise DomainError(f"relay {j} is co-located with the destination")
        rdr[j] = capacity_bps(d, params) / 1e9
    return NetworkInstance(
        a_srr_max=srr,
        a_rdr_max=rdr,
        beams_source=beams_source,
        beams_relay=beams_relay,
        source_positions=src,
        relay_positions=rel,
        destination_position=dst,
    )


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    instance: NetworkInstance
    quality: QualityParams = DEFAULT_QUALITY
    lower_bounds_gbps: np.ndarray | None = None
    objective_kind: ObjectiveKind = ObjectiveKind.VQM

    def __post_init__(self) -> None:
        s = self.instance.num_sources
        lb = np.zeros(s) if self.lower_bounds_gbps is None else self.lower_bounds_gbps
        lb = np.full(s, lb, dtype=float) if np.isscalar(lb) else np.asarray(lb, dtype=float)
        if lb.shape != (s,):
            raise DomainError(f"lower_bounds_gbps must have {s} entries")
        if np.any(lb < 0) or not np.all(np.isfinite(lb)):
            raise DomainError("lower bounds must be finite and non-negative")
        object.__setattr__(self, "lower_bounds_gbps", lb)
        object.__setattr__(self, "objective_kind", ObjectiveKind.parse(self.objective_kind))

    @property
    def beams_source(self) -> np.ndarray:
        if self.objective_kind is ObjectiveKind.JRSR:
            return np.ones(self.instance.num_sources, dtype=int)
        return self.instance.beams_source

    @property
    def beams_relay(self) -> np.ndarray:
        if self.objective_kind is ObjectiveKind.JRSR:
            return np.ones(self.instance.num_relays, dtype=int)
        return self.instance.beams_relay

    @property
    def rate_caps(self) -> np.ndarray:
        """Per-pair rate bound min(A_srr, 2 a_max); f_q(a/2) is flat above it."""
        return np.minimum(self.instance.a_srr_max, 2.0 * self.quality.a_max_gbps)

    def with_objective(self, kind: ObjectiveKind | str) -> "ProblemSpec":
        return ProblemSpec(self.instance, self.quality, self.lower_bounds_gbps, ObjectiveKind.parse(kind))

    def with_lower_bounds(self, lower: float | Sequence[float]) -> "ProblemSpec":
        return ProblemSpec(self.instance, self.quality, lower, self.objective_kind)


@dataclass(frozen=True)
class Objective:
    """Separable objective sum_k w_k * kappa * ln(1 + a_k / 2) + c_k * a_k."""

    quality_weight: np.ndarray
    linear: np.ndarray
    kappa: float

    def value(self, a: np.ndarray) -> float:
        a = np.asarray(a, dtype=float).ravel()
        return float(np.sum(self.quality_weight * self.kappa * np.log1p(a / 2.0)) + self.linear @ a)

    @property
    def is_linear(self) -> bool:
        return not np.any(self.quality_weight)


@dataclass(frozen=True, eq=False)
class MixedIntegerConvexProgram:
    """max objective(a) s.t. G @ [a; x] <= h, 0 <= a <= cap, x binary.

    Rows are stored in ``<=`` form; ``labels`` names the constraint family
    and index, e.g. ``"relay_capacity[2]"``. Rows labelled ``coupling`` are the
    rows ``a_k - cap_k * x_k <= 0``.
    """

    num_sources: int
    num_relays: int
    cap: np.ndarray
    objective: Objective
    G: np.ndarray
    h: np.ndarray
    labels: tuple[str, ...]
    kind: ObjectiveKind

    @property
    def num_pairs(self) -> int:
        return self.num_sources * self.num_relays

    @property
    def num_variables(self) -> int:
        return 2 * self.num_pairs

    @property
    def num_constraints(self) -> int:
        return len(self.h)

    @property
    def coupling_rows(self) -> np.ndarray:
        return np.array([lab.startswith("coupling[") for lab in self.labels], dtype=bool)

    def with_rows(self, G: np.ndarray, h: np.ndarray, labels: Sequence[str]) -> "MixedIntegerConvexProgram":
        G = np.atleast_2d(np.asarray(G, dtype=float))
        return MixedIntegerConvexProgram(
            self.num_sources,
            self.num_relays,
            self.cap,
            self.objective,
            np.vstack([self.G, G]),
            np.concatenate([self.h, np.atleast_1d(np.asarray(h, dtype=float))]),
            self.labels + tuple(labels),
            self.kind,
        )

    def with_objective(self, objective: Objective, kind: ObjectiveKind | None = None) -> "MixedIntegerConvexProgram":
        return MixedIntegerConvexProgram(
            self.num_sources, self.num_relays, self.cap, objective, self.G, self.h, self.labels, kind or self.kind
        )


def quality_objective(n: int, q: QualityParams) -> Objective:
    return Objective(np.ones(n), np.zeros(n), q.kappa)


def sum_rate_objective(n: int, q: QualityParams) -> Objective:
    return Objective(np.zeros(n), np.full(n, 0.5), q.kappa)


def build_program(spec: ProblemSpec) -> MixedIntegerConvexProgram:
    inst = spec.instance
    S, R = inst.num_sources, inst.num_relays
    n = S * R
    cap = spec.rate_caps.ravel()
    bs, br = spec.beams_source, spec.beams_relay
    rows: list[np.ndarray] = []
    rhs: list[float] = []
    labels: list[str] = []

    def add(row: np.ndarray, bound: float, label: str) -> None:
        rows.append(row)
        rhs.append(float(bound))
        labels.append(label)

    for j in range(R):
        row = np.zeros(2 * n)
        row[[i * R + j for i in range(S)]] = 1.0
        add(row, inst.a_rdr_max[j], f"relay_capacity[{j}]")
    for j in range(R):
        row = np.zeros(2 * n)
        row[[n + i * R + j for i in range(S)]] = 1.0
        add(row, br[j], f"relay_beams[{j}]")
    for i in range(S):
        row = np.zeros(2 * n)
        row[[n + i * R + j for j in range(R)]] = 1.0
        add(row, bs[i], f"source_beams[{i}]")
    for k in range(n):
        row = np.zeros(2 * n)
        row[k] = 1.0
        row[n + k] = -cap[k]
        add(row, 0.0, f"coupling[{k // R},{k % R}]")
    for i in range(S):
        row = np.zeros(2 * n)
        row[[i * R + j for j in range(R)]] = -1.0
        add(row, -spec.lower_bounds_gbps[i], f"lower_bound[{i}]")

    if spec.objective_kind is ObjectiveKind.VQM:
        objective = quality_objective(n, spec.quality)
    else:
        objective = sum_rate_objective(n, spec.quality)
    return MixedIntegerConvexProgram(
        num_sources=S,
        num_relays=R,
        cap=cap,
        objective=objective,
        G=np.array(rows),
        h=np.array(rhs),
        labels=tuple(labels),
        kind=spec.objective_kind,
    )


@dataclass(frozen=True, eq=False)
class GatedProgram:
    """The original (pre-reformulation) continuous program for a fixed binary x.

    Every term is multiplied by x: objective sum f_q(a/2) * x, relay capacity
    sum a*x <= A_rdr, lower bound sum a*x >= L, and a <= min(A_srr, 2 a_max)
    for every pair regardless of x.
    """

    cap: np.ndarray
    objective: Objective
    G: np.ndarray
    h: np.ndarray


def build_gated_program(spec: ProblemSpec, x: np.ndarray) -> GatedProgram:
    inst = spec.instance
    S, R = inst.num_sources, inst.num_relays
    xv = np.asarray(x, dtype=float).reshape(S, R)
    rows: list[np.ndarray] = []
    rhs: list[float] = []
    for j in range(R):
        row = np.zeros((S, R))
        row[:, j] = xv[:, j]
        rows.append(row.ravel())
        rhs.append(inst.a_rdr_max[j])
    for i in range(S):
        row = np.zeros((S, R))
        row[i, :] = -xv[i, :]
        rows.append(row.ravel())
        rhs.append(-spec.lower_bounds_gbps[i])
    base = quality_objective(S * R, spec.quality)
    if spec.objective_kind is not ObjectiveKind.VQM:
        base = sum_rate_objective(S * R, spec.quality)
    gated = Objective(base.quality_weight * xv.ravel(), base.linear * xv.ravel(), base.kappa)
    return GatedProgram(cap=spec.rate_caps.ravel(), objective=gated, G=np.array(rows), h=np.array(rhs))


@dataclass(eq=False)
class Solution:
    status: SolveStatus
    x: np.ndarray
    a: np.ndarray
    objective_value: float
    per_source_rate: np.ndarray
    per_source_quality: np.ndarray
    per_source_stream_quality: np.ndarray
    quality: float
    sum_rate: float
    nodes: int = 0
    wall_time: float = 0.0
    stats: dict = field(default_factory=dict)

    @property
    def is_optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL

    @property
    def stream_quality(self) -> float:
        return float(self.per_source_stream_quality.sum())


def make_solution(spec: ProblemSpec, x: np.ndarray, a: np.ndarray, nodes: int = 0, wall_time: float = 0.0) -> Solution:
    S, R = spec.instance.num_sources, spec.instance.num_relays
    x = np.asarray(x).reshape(S, R).round().astype(int)
    a = np.asarray(a, dtype=float).reshape(S, R)
    pair_quality = f_q_array(a / 2.0, spec.quality)
    quality = float(pair_quality.sum())
    sum_rate = float(a.sum())
    value = quality if spec.objective_kind is ObjectiveKind.VQM else sum_rate / 2.0
    per_rate = a.sum(axis=1)
    return Solution(
        status=SolveStatus.OPTIMAL,
        x=x,
        a=a,
        objective_value=value,
        per_source_rate=per_rate,
        per_source_quality=pair_quality.sum(axis=1),
        per_source_stream_quality=f_q_array(per_rate / 2.0, spec.quality),
        quality=quality,
        sum_rate=sum_rate,
        nodes=nodes,
        wall_time=wall_time,
    )


def infeasible_solution(spec: ProblemSpec, nodes: int = 0, wall_time: float = 0.0) -> Solution:
    S, R = spec.instance.num_sources, spec.instance.num_relays
    return Solution(
        status=SolveStatus.INFEASIBLE,
        x=np.zeros((S, R), dtype=int),
        a=np.zeros((S, R)),
        objective_value=float("nan"),
        per_source_rate=np.zeros(S),
        per_source_quality=np.zeros(S),
        per_source_stream_quality=np.zeros(S),
        quality=float("nan"),
        sum_rate=float("nan"),
        nodes=nodes,
        wall_time=wall_time,
    )


def check_solution(spec: ProblemSpec, sol: Solution, tol: float = 1e-9) -> list[str]:
    """Return human-readable constraint violations; empty means the solution is valid."""
    inst = spec.instance
    S, R = inst.num_sources, inst.num_relays
    x = np.asarray(sol.x)
    a = np.asarray(sol.a, dtype=float)
    if x.shape != (S, R) or a.shape != (S, R):
        return [f"shape mismatch: expected {(S, R)}, got x{x.shape} a{a.shape}"]
    problems: list[str] = []
    if not np.all((x == 0) | (x == 1)):
        problems.append("binary: x has non-binary entries")
    if np.any(a < -tol):
        problems.append("a has negative entries")
    cap = spec.rate_caps
    for i, j in zip(*np.nonzero(a > cap * x + tol)):
        problems.append(f"coupling[{i},{j}]: a={a[i, j]:.12g} exceeds {cap[i, j]:.12g}*x={x[i, j]}")
    for j in range(R):
        load = a[:, j].sum()
        if load > inst.a_rdr_max[j] + tol:
            problems.append(f"relay_capacity[{j}]: relay load {load:.12g} > {inst.a_rdr_max[j]:.12g}")
        if x[:, j].sum() > spec.beams_relay[j]:
            problems.append(f"relay_beams[{j}]: {x[:, j].sum()} links > {spec.beams_relay[j]} beams")
    for i in range(S):
        if x[i, :].sum() > spec.beams_source[i]:
            problems.append(f"source_beams[{i}]: {x[i, :].sum()} links > {spec.beams_source[i]} beams")
        if sol.status is SolveStatus.OPTIMAL and a[i, :].sum() < spec.lower_bounds_gbps[i] - tol:
            problems.append(f"lower_bound[{i}]: delivered {a[i, :].sum():.12g} < {spec.lower_bounds_gbps[i]:.12g}")
    return problems
