"""Monte Carlo evaluation of relay selection schemes over random stadium deployments.

Cameras sit on a segment at the stadium rim, relays on a parallel segment
closer to the destination at the origin. Every trial draws its own RNG stream
from ``(rng_seed, trial_index)``, so a trial sees the same deployment whatever
the scheme, lower bound, worker count or execution order.
"""

from __future__ import annotations

import dataclasses
import enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .csvio import write_csv
from .linkbudget import DEFAULT_PARAMS, DomainError, LinkBudgetParams
from .optmodel import NetworkInstance, ObjectiveKind, ProblemSpec, Solution, build_instance
from .quality import DEFAULT_QUALITY, QualityParams
from .solver.bnb import DEFAULT_NODE_BUDGET, NodeBudgetExceeded, branch_and_bound


class Setting(str, enum.Enum):
    I = "I"
    II = "II"
    III = "III"

    @classmethod
    def parse(cls, value: "str | Setting") -> "Setting":
        if isinstance(value, Setting):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise DomainError(f"unknown setting {value!r}; expected I, II or III") from None


# Fraction of the way from the camera line to the destination where relays sit.
DEFAULT_RELAY_FRACTION = {Setting.I: 0.2, Setting.II: 0.5, Setting.III: 0.8}
DEFAULT_CAMERA_LINE = ((500.0, -100.0), (500.0, 100.0))
ALL_SCHEMES = (ObjectiveKind.VQM, ObjectiveKind.SRM, ObjectiveKind.JRSR)


class SimulationError(RuntimeError):
    def __init__(self, trial: int, scheme: str, cause: Exception) -> None:
        super().__init__(f"trial {trial} ({scheme}): {cause}")
        self.trial = trial
        self.scheme = scheme
        self.cause = cause


@dataclass(frozen=True)
class SimulationConfig:
    num_sources: int = 10
    num_relays: int = 10
    setting: Setting = Setting.II
    trials: int = 1000
    rng_seed: int = 0
    camera_line: tuple = DEFAULT_CAMERA_LINE
    relay_line_fraction: tuple = (0.2, 0.5, 0.8)
    beams_source: int = 2
    beams_relay: int = 2
    lower_bound_gbps: float = 0.75
    objectives: tuple = ALL_SCHEMES
    link_params: LinkBudgetParams = DEFAULT_PARAMS
    quality: QualityParams = DEFAULT_QUALITY
    node_budget: int = DEFAULT_NODE_BUDGET
    workers: int = 1

    def __post_init__(self) -> None:
        set_ = object.__setattr__
        set_(self, "setting", Setting.parse(self.setting))
        set_(self, "objectives", tuple(ObjectiveKind.parse(o) for o in self.objectives))
        line = np.asarray(self.camera_line, dtype=float)
        if line.shape != (2, 2) or not np.all(np.isfinite(line)):
            raise DomainError("camera_line must be two [x, y] endpoints")
        if np.allclose(line[0], line[1]):
            raise DomainError("camera_line endpoints must be distinct")
        set_(self, "camera_line", tuple(map(tuple, line.tolist())))
        fractions = tuple(float(f) for f in self.relay_line_fraction)
        if len(fractions) != 3 or not all(0.0 < f < 1.0 for f in fractions):
            raise DomainError("relay_line_fraction needs three values in (0, 1), one per setting")
        set_(self, "relay_line_fraction", fractions)
        for name in ("num_sources", "num_relays", "trials", "beams_source", "beams_relay", "node_budget", "workers"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise DomainError(f"{name} must be a positive integer, got {value!r}")
            set_(self, name, int(value))
        if not 0 <= int(self.rng_seed) < 2**64:
            raise DomainError("rng_seed must fit in 64 unsigned bits")
        set_(self, "rng_seed", int(self.rng_seed))
        if not np.isfinite(self.lower_bound_gbps) or self.lower_bound_gbps < 0:
            raise DomainError("lower_bound_gbps must be finite and non-negative")
        if not self.objectives:
            raise DomainError("at least one objective is required")

    def with_updates(self, **changes) -> "SimulationConfig":
        return dataclasses.replace(self, **changes)

    @property
    def relay_fraction(self) -> float:
        return self.relay_line_fraction[list(Setting).index(self.setting)]

    @property
    def relay_line(self) -> np.ndarray:
        """The camera segment pulled toward the destination's axis by the setting's fraction."""
        line = np.array(self.camera_line)
        line[:, 0] *= 1.0 - self.relay_fraction
        return line


def trial_rng(seed: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial_index,)))


def _on_segment(line: np.ndarray, t: np.ndarray) -> np.ndarray:
    return line[0] + t[:, None] * (line[1] - line[0])


def generate_instance(cfg: SimulationConfig, trial_index: int) -> NetworkInstance:
    rng = trial_rng(cfg.rng_seed, trial_index)
    cameras = _on_segment(np.array(cfg.camera_line), rng.random(cfg.num_sources))
    relays = _on_segment(cfg.relay_line, rng.random(cfg.num_relays))
    return build_instance(
        cameras, relays, (0.0, 0.0), cfg.beams_source, cfg.beams_relay, cfg.link_params
    )


def solve_scheme(
    cfg: SimulationConfig,
    instance: NetworkInstance,
    scheme: ObjectiveKind,
    lower_bound: float,
    feasibility_only: bool = False,
) -> Solution:
    spec = ProblemSpec(instance, cfg.quality, lower_bound, scheme)
    return branch_and_bound(spec, node_budget=cfg.node_budget, feasibility_only=feasibility_only)


@dataclass
class SchemeTrials:
    """Per-trial outcomes of one scheme; infeasible trials score zero quality."""

    scheme: ObjectiveKind
    objective: np.ndarray
    quality: np.ndarray
    stream_quality: np.ndarray
    sum_rate: np.ndarray
    delivered: np.ndarray
    feasible: np.ndarray
    nodes: np.ndarray

    @property
    def cdf_samples(self) -> np.ndarray:
        return np.sort(self.quality)

    @property
    def mean_quality(self) -> float:
        return float(np.mean(self.quality))

    @property
    def mean_stream_quality(self) -> float:
        return float(np.mean(self.stream_quality))

    @property
    def feasible_fraction(self) -> float:
        return float(np.mean(self.feasible))


@dataclass
class TrialResults:
    config: SimulationConfig
    schemes: dict = field(default_factory=dict)

    def __getitem__(self, scheme: ObjectiveKind | str) -> SchemeTrials:
        return self.schemes[ObjectiveKind.parse(scheme)]

    def dominance_violations(self, tol: float = 1e-9) -> list[tuple[int, str, str]]:
        """Trials where a scheme's quality beats the one ranked above it by more than ``tol``."""
        order = [s for s in ALL_SCHEMES if s in self.schemes]
        out = []
        for upper, lower in zip(order, order[1:]):
            q_up, q_lo = self.schemes[upper].quality, self.schemes[lower].quality
            for t in np.flatnonzero(q_up < q_lo - tol):
                out.append((int(t), upper.value, lower.value))
        return out


def _run_trial(args) -> list[tuple]:
    cfg, trial = args
    instance = generate_instance(cfg, trial)
    rows = []
    for scheme in cfg.objectives:
        try:
            sol = solve_scheme(cfg, instance, scheme, cfg.lower_bound_gbps)
        except NodeBudgetExceeded as exc:
            raise SimulationError(trial, scheme.value, exc) from exc
        if sol.is_optimal:
            rows.append((sol.objective_value, sol.quality, sol.stream_quality, sol.sum_rate, sol.per_source_rate, True, sol.nodes))
        else:
            rows.append((np.nan, 0.0, 0.0, 0.0, np.zeros(cfg.num_sources), False, sol.nodes))
    return rows


def _map_trials(fn: Callable, cfg: SimulationConfig, jobs: list, progress: Callable[[int], None] | None):
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            out = []
            for k, res in enumerate(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * cfg.workers)))):
                out.append(res)
                if progress:
                    progress(k + 1)
            return out
    out = []
    for k, job in enumerate(jobs):
        out.append(fn(job))
        if progress:
            progress(k + 1)
    return out


def run_trials(cfg: SimulationConfig, progress: Callable[[int], None] | None = None) -> TrialResults:
    per_trial = _map_trials(_run_trial, cfg, [(cfg, t) for t in range(cfg.trials)], progress)
    results = TrialResults(cfg)
    for s, scheme in enumerate(cfg.objectives):
        cols = list(zip(*(row[s] for row in per_trial)))
        results.schemes[scheme] = SchemeTrials(
            scheme=scheme,
            objective=np.array(cols[0], dtype=float),
            quality=np.array(cols[1], dtype=float),
            stream_quality=np.array(cols[2], dtype=float),
            sum_rate=np.array(cols[3], dtype=float),
            delivered=np.vstack(cols[4]),
            feasible=np.array(cols[5], dtype=bool),
            nodes=np.array(cols[6], dtype=int),
        )
    return results


def compute_cdf(samples: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Empirical CDF as (distinct sorted values, P(X <= value))."""
    arr = np.asarray(samples, dtype=float).ravel()
    if arr.size == 0:
        raise DomainError("compute_cdf needs at least one sample")
    if np.any(np.isnan(arr)):
        raise DomainError("compute_cdf samples contain NaN")
    values, counts = np.unique(arr, return_counts=True)
    return values, np.cumsum(counts) / arr.size


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:step`` (inclusive of stop) or a comma list, in Gbit/s."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise DomainError(f"grid {text!r} must look like start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise DomainError(f"grid {text!r} needs step > 0 and stop >= start")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        grid = np.round(start + step * np.arange(count), 12)
    else:
        grid = np.array([float(p) for p in text.split(",") if p.strip()])
    if grid.size == 0 or np.any(np.diff(grid) <= 0) or np.any(grid < 0):
        raise DomainError("grid values must be non-negative and strictly increasing")
    return grid


DEFAULT_GRID = parse_grid("0:1.5:0.1")


@dataclass
class OutageCurve:
    setting: Setting
    grid: np.ndarray
    probabilities: dict
    trials: int

    def __getitem__(self, scheme: ObjectiveKind | str) -> np.ndarray:
        return self.probabilities[ObjectiveKind.parse(scheme)]


def _outage_trial(args) -> np.ndarray:
    cfg, trial, grid = args
    instance = generate_instance(cfg, trial)
    out = np.zeros((len(cfg.objectives), len(grid)), dtype=bool)
    for s, scheme in enumerate(cfg.objectives):
        for g, L in enumerate(grid):
            # A larger bound only shrinks the feasible set, so once out, always out.
            if g and out[s, g - 1]:
                out[s, g] = True
                continue
            try:
                sol = solve_scheme(cfg, instance, scheme, float(L), feasibility_only=True)
            except NodeBudgetExceeded as exc:
                raise SimulationError(trial, scheme.value, exc) from exc
            out[s, g] = (not sol.is_optimal) or bool(np.any(sol.per_source_rate < L - 1e-9))
    return out


def outage_sweep(
    cfg: SimulationConfig,
    grid: Sequence[float] = DEFAULT_GRID,
    progress: Callable[[int], None] | None = None,
) -> OutageCurve:
    """Fraction of trials in which some stream cannot be given its lower bound."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be non-empty and strictly increasing")
    flags = _map_trials(_outage_trial, cfg, [(cfg, t, grid) for t in range(cfg.trials)], progress)
    stacked = np.stack(flags)
    probs = {scheme: stacked[:, s, :].mean(axis=0) for s, scheme in enumerate(cfg.objectives)}
    return OutageCurve(cfg.setting, grid, probs, cfg.trials)


CDF_HEADER = ("scheme", "setting", "trial", "aggregate_quality")
SUMMARY_HEADER = (
    "scheme", "setting", "num_sources", "num_relays", "mean_quality",
    "mean_stream_quality", "feasible_fraction", "trials",
)
OUTAGE_HEADER = ("scheme", "setting", "lower_bound_gbps", "outage_prob")


def cdf_rows(results: Sequence[TrialResults]) -> list[tuple]:
    rows = []
    for res in results:
        for scheme, st in res.schemes.items():
            order = np.lexsort((np.arange(len(st.quality)), st.quality))
            rows.extend((scheme.value, res.config.setting.value, int(t), st.quality[t]) for t in order)
    return rows


def summary_rows(results: Sequence[TrialResults]) -> list[tuple]:
    rows = []
    for res in results:
        cfg = res.config
        for scheme, st in res.schemes.items():
            rows.append((
                scheme.value, cfg.setting.value, cfg.num_sources, cfg.num_relays,
                st.mean_quality, st.mean_stream_quality, st.feasible_fraction, cfg.trials,
            ))
    return rows


def outage_rows(curves: Sequence[OutageCurve]) -> list[tuple]:
    rows = []
    for curve in curves:
        for scheme, probs in curve.probabilities.items():
            rows.extend((scheme.value, curve.setting.value, float(L), float(p)) for L, p in zip(curve.grid, probs))
    return rows


def write_trial_csvs(outdir: str | Path, results: Sequence[TrialResults]) -> list[Path]:
    outdir = Path(outdir)
    return [
        write_csv(outdir / "cdf.csv", CDF_HEADER, cdf_rows(results)),
        write_csv(outdir / "summary.csv", SUMMARY_HEADER, summary_rows(results)),
    ]


def write_outage_csv(outdir: str | Path, curves: Sequence[OutageCurve]) -> Path:
    return write_csv(Path(outdir) / "outage.csv", OUTAGE_HEADER, outage_rows(curves))
