"""Flat ``key = value`` config files.

Values are read as JSON where possible (numbers, lists, quoted strings,
true/false); anything else is kept as a bare string, so ``setting = II``
works. ``#`` starts a comment. A list may continue over several lines until
its brackets balance. Unknown and repeated keys are errors.
"""

from __future__ import annotations

import dataclasses
import json
import re
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .linkbudget import DomainError, LinkBudgetParams
from .optmodel import NetworkInstance, ObjectiveKind, ProblemSpec, build_instance
from .quality import QualityParams
from .simulator import SimulationConfig


class ConfigError(ValueError):
    pass


LINK_KEYS = frozenset(f.name for f in dataclasses.fields(LinkBudgetParams))
QUALITY_KEYS = frozenset({"a_max_gbps", "log_base"})
INSTANCE_KEYS = frozenset({
    "sources", "relays", "destination", "beams_source", "beams_relay",
    "lower_bounds_gbps", "objective", "a_srr_max", "a_rdr_max", "node_budget",
}) | LINK_KEYS | QUALITY_KEYS
SIMULATION_KEYS = frozenset({
    "num_sources", "num_relays", "setting", "settings", "trials", "seed", "camera_line",
    "relay_line_fraction", "beams_source", "beams_relay", "lower_bound_gbps", "lower_bounds",
    "objectives", "node_budget", "workers", "output_dir",
}) | LINK_KEYS | QUALITY_KEYS


def _strip_comment(line: str) -> str:
    in_quote = False
    for k, ch in enumerate(line):
        if ch == '"':
            in_quote = not in_quote
        elif ch == "#" and not in_quote:
            return line[:k]
    return line


_BARE_WORD = re.compile(r'"[^"]*"|\b(?!true\b|false\b|null\b)[A-Za-z_][A-Za-z0-9_.]*')


def _value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        if not text.startswith(("[", "{", '"')):
            return text
        if not text.startswith("["):
            raise
    # lists may hold bare words, e.g. [I, II, III]
    quoted = _BARE_WORD.sub(lambda m: m.group(0) if m.group(0).startswith('"') else f'"{m.group(0)}"', text)
    return json.loads(quoted)


def parse_config_text(text: str, allowed: Iterable[str] | None = None, source: str = "<config>") -> dict:
    allowed = None if allowed is None else frozenset(allowed)
    out: dict[str, Any] = {}
    pending: tuple[str, str, int] | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if pending is not None:
            key, acc, start = pending
            acc = f"{acc} {line}"
        else:
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, acc = line.partition("=")
            key, acc, start = key.strip(), acc.strip(), lineno
            if not key.isidentifier():
                raise ConfigError(f"{source}:{lineno}: invalid key {key!r}")
            if allowed is not None and key not in allowed:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}; allowed keys: {', '.join(sorted(allowed))}")
            if key in out:
                raise ConfigError(f"{source}:{lineno}: key {key!r} given twice")
        if acc.count("[") > acc.count("]"):
            pending = (key, acc, start)
            continue
        pending = None
        if not acc:
            raise ConfigError(f"{source}:{start}: key {key!r} has no value")
        try:
            out[key] = _value(acc)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}:{start}: cannot parse value of {key!r}: {exc.msg}") from None
    if pending is not None:
        raise ConfigError(f"{source}:{pending[2]}: unterminated list for key {pending[0]!r}")
    return out


def read_config(path: str | Path, allowed: Iterable[str] | None = None) -> dict:
    """Read and parse a config file; OSError propagates for the caller to report."""
    path = Path(path)
    return parse_config_text(path.read_text(encoding="utf-8"), allowed, str(path))


def _pick(values: dict, keys: Iterable[str]) -> dict:
    return {k: values[k] for k in keys if k in values}


def _floats(values: dict, keys: Iterable[str]) -> dict:
    try:
        return {k: float(v) for k, v in _pick(values, keys).items()}
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"numeric value expected: {exc}") from None


def link_params_from(values: dict, base: LinkBudgetParams = LinkBudgetParams()) -> LinkBudgetParams:
    return base.with_updates(**_floats(values, LINK_KEYS))


def quality_from(values: dict) -> QualityParams:
    return QualityParams(**_floats(values, QUALITY_KEYS))


def problem_from_config(values: dict) -> ProblemSpec:
    """Build a ProblemSpec from instance-file keys, geometry or explicit rates."""
    try:
        beams_s = values.get("beams_source", 1)
        beams_r = values.get("beams_relay", 1)
        if "a_srr_max" in values or "a_rdr_max" in values:
            if "a_srr_max" not in values or "a_rdr_max" not in values:
                raise ConfigError("a_srr_max and a_rdr_max must be given together")
            if "sources" in values or "relays" in values:
                raise ConfigError("give either geometry (sources/relays) or rates (a_srr_max/a_rdr_max), not both")
            instance = NetworkInstance(
                a_srr_max=np.asarray(values["a_srr_max"], dtype=float),
                a_rdr_max=np.asarray(values["a_rdr_max"], dtype=float),
                beams_source=beams_s,
                beams_relay=beams_r,
            )
        else:
            missing = [k for k in ("sources", "relays") if k not in values]
            if missing:
                raise ConfigError(f"missing key(s): {', '.join(missing)}")
            instance = build_instance(
                values["sources"], values["relays"], values.get("destination", (0.0, 0.0)),
                beams_s, beams_r, link_params_from(values),
            )
        return ProblemSpec(
            instance,
            quality_from(values),
            values.get("lower_bounds_gbps"),
            ObjectiveKind.parse(values.get("objective", "vqm")),
        )
    except ConfigError:
        raise
    except (DomainError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


_SIM_DIRECT = (
    "num_sources", "num_relays", "trials", "camera_line", "relay_line_fraction",
    "beams_source", "beams_relay", "lower_bound_gbps", "node_budget", "workers",
)


def simulation_from(values: dict, setting: str | None = None) -> SimulationConfig:
    fields: dict[str, Any] = _pick(values, _SIM_DIRECT)
    if "seed" in values:
        fields["rng_seed"] = values["seed"]
    if setting is not None:
        fields["setting"] = setting
    elif "setting" in values:
        fields["setting"] = values["setting"]
    if "objectives" in values:
        obj = values["objectives"]
        fields["objectives"] = tuple(obj.split(",") if isinstance(obj, str) else obj)
    try:
        return SimulationConfig(link_params=link_params_from(values), quality=quality_from(values), **fields)
    except (DomainError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
