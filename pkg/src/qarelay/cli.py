"""Command-line entry point.

Subcommands: ``linkbudget``, ``quality``, ``solve``, ``simulate`` and ``sweep``.
Config files use the flat ``key = value`` format from :mod:`qarelay.config`;
any flag given on the command line wins over the file.

Exit codes: 0 ok, 2 usage or bad input, 3 infeasible, 4 resource limit, 5 I/O.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import MODEL_REVISION, __version__
from .config import (
    INSTANCE_KEYS,
    SIMULATION_KEYS,
    ConfigError,
    link_params_from,
    problem_from_config,
    quality_from,
    read_config,
    simulation_from,
)
from .csvio import fmt, render_csv, write_atomic
from .linkbudget import DomainError, LinkBudgetParams, link_report
from .optmodel import ObjectiveKind, Solution
from .quality import f_q, hessian_eigenvalues
from .simulator import (
    OUTAGE_HEADER,
    Setting,
    SimulationError,
    outage_rows,
    outage_sweep,
    parse_grid,
    run_trials,
    write_outage_csv,
    write_trial_csvs,
)
from .solver.bnb import TIE_BREAKS, NodeBudgetExceeded, OracleTooLarge, branch_and_bound, enumerate_oracle

OUTPUT_ENV = "QARELAY_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "qarelay-out"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_RESOURCE = 4
EXIT_IO = 5

_LINK_FLAGS = tuple(f.name for f in dataclasses.fields(LinkBudgetParams))


@dataclass
class CliConfig:
    command: str
    config_path: Path | None = None
    overrides: dict[str, Any] = field(default_factory=dict)
    output_dir: Path | None = None
    oracle: bool = False
    tie_break: str = "center"
    distances: tuple[float, ...] = ()
    rates: tuple[float, ...] = ()
    indicator: float | None = None
    grid: np.ndarray | None = None


def _grid_arg(text: str) -> np.ndarray:
    try:
        return parse_grid(text)
    except (DomainError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_link_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("link budget overrides")
    for name in _LINK_FLAGS:
        g.add_argument(_flag(name), dest=name, type=float, metavar="V")


def _add_quality_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--a-max-gbps", dest="a_max_gbps", type=float, metavar="V", help="rate at which quality saturates")


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="simulation config file")
    p.add_argument("--sources", dest="num_sources", type=int)
    p.add_argument("--relays", dest="num_relays", type=int)
    p.add_argument(
        "--setting", dest="settings", action="append", metavar="{I,II,III}",
        help="repeatable; defaults to the config value, else all three",
    )
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--objectives", help="comma-separated subset of vqm,srm,jrsr")
    p.add_argument("--beams-source", dest="beams_source", type=int)
    p.add_argument("--beams-relay", dest="beams_relay", type=int)
    p.add_argument("--node-budget", dest="node_budget", type=int)
    p.add_argument("--workers", type=int, help="worker processes for independent trials")
    p.add_argument("-o", "--output-dir", dest="output_dir", type=Path, help=f"defaults to ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT_DIR}")
    _add_link_flags(p)
    _add_quality_flags(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qarelay", description=__doc__.split("\n")[0])
    parser.add_argument(
        "--version", action="version",
        version=f"qarelay {__version__} (model revision {MODEL_REVISION})",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("linkbudget", help="link budget and capacity at given distances")
    p.add_argument("--distance", type=float, nargs="+", required=True, metavar="M")
    _add_link_flags(p)

    p = sub.add_parser("quality", help="normalized quality of a coding rate")
    p.add_argument("--rate", type=float, nargs="+", required=True, metavar="GBPS")
    p.add_argument("--indicator", type=float, metavar="X", help="also report the gated Hessian at this x")
    p.add_argument("--log-base", dest="log_base", type=float)
    _add_quality_flags(p)

    p = sub.add_parser("solve", help="optimal relay selection for one instance")
    p.add_argument("--config", type=Path, required=True, help="instance config file")
    p.add_argument("--objective", choices=[k.value for k in ObjectiveKind])
    p.add_argument("--lower-bound", dest="lower_bounds_gbps", type=float, metavar="GBPS")
    p.add_argument("--oracle", action="store_true", help="exhaustive enumeration instead of branch-and-bound")
    p.add_argument("--tie-break", dest="tie_break", choices=TIE_BREAKS, default="center")
    p.add_argument("--node-budget", dest="node_budget", type=int)
    p.add_argument("-o", "--output-dir", dest="output_dir", type=Path, help="also write solution.csv here")

    p = sub.add_parser("simulate", help="Monte Carlo quality comparison of the schemes")
    _add_sim_flags(p)
    p.add_argument("--lower-bound", dest="lower_bound_gbps", type=float, metavar="GBPS")

    p = sub.add_parser("sweep", help="stream outage against the per-stream lower bound")
    _add_sim_flags(p)
    p.add_argument("--lower-bounds", dest="lower_bounds", type=_grid_arg, metavar="START:STOP:STEP")
    return parser


_NOT_OVERRIDES = {"command", "config", "output_dir", "oracle", "tie_break", "distance", "rate", "indicator", "lower_bounds"}


def parse_args(argv: Sequence[str] | None = None) -> CliConfig:
    """Parse flags; argparse exits with status 2 on a usage error."""
    ns = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(ns).items() if v is not None and k not in _NOT_OVERRIDES}
    if "objectives" in overrides:
        overrides["objectives"] = [o.strip() for o in overrides["objectives"].split(",") if o.strip()]
    return CliConfig(
        command=ns.command,
        config_path=getattr(ns, "config", None),
        overrides=overrides,
        output_dir=getattr(ns, "output_dir", None),
        oracle=getattr(ns, "oracle", False),
        tie_break=getattr(ns, "tie_break", "center"),
        distances=tuple(getattr(ns, "distance", None) or ()),
        rates=tuple(getattr(ns, "rate", None) or ()),
        indicator=getattr(ns, "indicator", None),
        grid=getattr(ns, "lower_bounds", None),
    )


def _merged(cfg: CliConfig, allowed) -> dict:
    values = read_config(cfg.config_path, allowed) if cfg.config_path else {}
    values.update(cfg.overrides)
    return values


def _output_dir(cfg: CliConfig, values: dict) -> Path:
    if cfg.output_dir is not None:
        return cfg.output_dir
    if "output_dir" in values:
        return Path(values["output_dir"])
    return Path(os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT_DIR)


def _prepare_dir(path: Path) -> Path:
    """Create the output directory before any long computation starts."""
    path.mkdir(parents=True, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise PermissionError(13, "output directory is not writable", str(path))
    return path


def _table(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    cells = [list(header)] + [[fmt(v) for v in row] for row in rows]
    widths = [max(len(r[c]) for r in cells) for c in range(len(header))]
    lines = ["  ".join(s.rjust(w) for s, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _matrix(m: np.ndarray) -> str:
    return "\n".join("    " + " ".join(f"{fmt(v):>12}" for v in row) for row in np.atleast_2d(m))


LINK_HEADER = ("distance_m", "pathloss_db", "oxygen_db", "signal_dbm", "noise_dbm", "snr_db", "capacity_gbps")


def _run_linkbudget(cfg: CliConfig, out) -> int:
    params = link_params_from(cfg.overrides)
    rows = [tuple(dataclasses.astuple(link_report(d, params))) for d in cfg.distances]
    print(_table(LINK_HEADER, rows), file=out)
    print(file=out)
    print(render_csv(LINK_HEADER, rows), end="", file=out)
    return EXIT_OK


def _run_quality(cfg: CliConfig, out) -> int:
    q = quality_from(cfg.overrides)
    header = ["rate_gbps", "quality"]
    if cfg.indicator is not None:
        header += ["eig_1", "eig_2"]
    rows = []
    for a in cfg.rates:
        row = [a, f_q(a, q)]
        if cfg.indicator is not None and a <= q.a_max_gbps:
            row += list(hessian_eigenvalues(a, cfg.indicator, q).eigenvalues)
        elif cfg.indicator is not None:
            row += [float("nan")] * 2  # the Hessian is only defined below saturation
        rows.append(row)
    print(_table(header, rows), file=out)
    print(file=out)
    print(render_csv(header, rows), end="", file=out)
    return EXIT_OK


SOLUTION_HEADER = ("kind", "source", "relay", "value")


def solution_rows(sol: Solution) -> list[tuple]:
    rows: list[tuple] = [
        ("status", "", "", sol.status.value),
        ("objective", "", "", sol.objective_value),
        ("quality", "", "", sol.quality),
        ("sum_rate_gbps", "", "", sol.sum_rate),
        ("nodes", "", "", sol.nodes),
    ]
    S, R = sol.x.shape
    for i in range(S):
        for j in range(R):
            rows.append(("x", i, j, int(sol.x[i, j])))
    for i in range(S):
        for j in range(R):
            rows.append(("a_gbps", i, j, sol.a[i, j]))
    for i in range(S):
        rows.append(("source_rate_gbps", i, "", sol.per_source_rate[i]))
        rows.append(("source_quality", i, "", sol.per_source_quality[i]))
    return rows


def _run_solve(cfg: CliConfig, out) -> int:
    values = _merged(cfg, INSTANCE_KEYS)
    spec = problem_from_config(values)
    if cfg.oracle:
        sol = enumerate_oracle(spec, tie_break=cfg.tie_break)
        method = "enumeration"
    else:
        budget = int(values.get("node_budget", 1_000_000))
        sol = branch_and_bound(spec, node_budget=budget, tie_break=cfg.tie_break)
        method = "branch-and-bound"

    print(f"status:     {sol.status.value}", file=out)
    print(f"objective:  {spec.objective_kind.value} = {fmt(sol.objective_value)}", file=out)
    print(f"quality:    {fmt(sol.quality)}", file=out)
    print(f"sum rate:   {fmt(sol.sum_rate)} Gbit/s", file=out)
    print(f"method:     {method}, {sol.nodes} nodes, {sol.wall_time:.3f} s", file=out)
    print("x:", file=out)
    print(_matrix(sol.x), file=out)
    print("a (Gbit/s):", file=out)
    print(_matrix(sol.a), file=out)
    per_source = [(i, sol.per_source_rate[i], sol.per_source_quality[i]) for i in range(len(sol.per_source_rate))]
    print(_table(("source", "rate_gbps", "quality"), per_source), file=out)
    print(file=out)
    # wall time stays out of the CSV so reruns are byte-identical
    text = render_csv(SOLUTION_HEADER, solution_rows(sol))
    print(text, end="", file=out)
    outdir = cfg.output_dir or (Path(os.environ[OUTPUT_ENV]) if os.environ.get(OUTPUT_ENV) else None)
    if outdir is not None:
        path = write_atomic(outdir / "solution.csv", text)
        print(f"wrote {path}", file=out)
    return EXIT_OK if sol.is_optimal else EXIT_INFEASIBLE


def _settings(values: dict) -> list[Setting]:
    raw = values.pop("settings", None)
    if raw is None and "setting" in values:
        raw = [values["setting"]]
    if raw is None:
        return list(Setting)
    if isinstance(raw, str):
        raw = raw.split(",")
    try:
        return [Setting.parse(s.strip() if isinstance(s, str) else s) for s in raw]
    except (DomainError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _sim_configs(cfg: CliConfig, values: dict):
    settings = _settings(values)
    base = {k: v for k, v in values.items() if k not in ("output_dir", "lower_bounds")}
    return [simulation_from(base, setting=s.value) for s in settings]


def _run_simulate(cfg: CliConfig, out) -> int:
    values = _merged(cfg, SIMULATION_KEYS)
    if "lower_bounds" in values:
        raise ConfigError("lower_bounds is a sweep key; use lower_bound_gbps for simulate")
    outdir = _prepare_dir(_output_dir(cfg, values))
    results = []
    for sc in _sim_configs(cfg, values):
        results.append(run_trials(sc))
    rows = []
    for res in results:
        for scheme, st in res.schemes.items():
            rows.append((res.config.setting.value, scheme.value, st.mean_quality, st.mean_stream_quality, st.feasible_fraction))
    print(_table(("setting", "scheme", "mean_quality", "mean_stream_quality", "feasible_fraction"), rows), file=out)
    for path in write_trial_csvs(outdir, results):
        print(f"wrote {path}", file=out)
    return EXIT_OK


def _run_sweep(cfg: CliConfig, out) -> int:
    values = _merged(cfg, SIMULATION_KEYS)
    if "lower_bound_gbps" in values:
        raise ConfigError("lower_bound_gbps is a simulate key; use lower_bounds for sweep")
    grid = cfg.grid
    if grid is None:
        raw = values.get("lower_bounds", "0:1.5:0.1")
        try:
            grid = parse_grid(raw) if isinstance(raw, str) else np.asarray(raw, dtype=float)
        except ValueError as exc:
            raise ConfigError(f"lower_bounds: {exc}") from None
    outdir = _prepare_dir(_output_dir(cfg, values))
    curves = [outage_sweep(sc, grid) for sc in _sim_configs(cfg, values)]
    print(_table(OUTAGE_HEADER, outage_rows(curves)), file=out)
    print(f"wrote {write_outage_csv(outdir, curves)}", file=out)
    return EXIT_OK


_COMMANDS = {
    "linkbudget": _run_linkbudget,
    "quality": _run_quality,
    "solve": _run_solve,
    "simulate": _run_simulate,
    "sweep": _run_sweep,
}


def run(cfg: CliConfig, out=None, err=None) -> int:
    """Dispatch a parsed command and map failures onto exit codes."""
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        return _COMMANDS[cfg.command](cfg, out)
    except OracleTooLarge as exc:
        print(f"qarelay: resource limit: {exc}", file=err)
        return EXIT_RESOURCE
    except (ConfigError, DomainError) as exc:
        print(f"qarelay: error: {exc}", file=err)
        return EXIT_USAGE
    except (NodeBudgetExceeded, SimulationError, MemoryError) as exc:
        print(f"qarelay: resource limit: {exc}", file=err)
        return EXIT_RESOURCE
    except OSError as exc:
        where = f" ({exc.filename})" if exc.filename else ""
        print(f"qarelay: I/O error{where}: {exc.strerror or exc}", file=err)
        return EXIT_IO


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cfg = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
