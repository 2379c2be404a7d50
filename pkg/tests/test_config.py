import math
from pathlib import Path

import numpy as np
import pytest

from qarelay.config import (
    INSTANCE_KEYS,
    SIMULATION_KEYS,
    ConfigError,
    parse_config_text,
    problem_from_config,
    read_config,
    simulation_from,
)
from qarelay.optmodel import ObjectiveKind
from qarelay.simulator import Setting

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_values_and_comments():
    text = """
    # comment line
    a = 3            # trailing comment
    b = [1, 2.5]
    c = II
    d = "x # not a comment"
    e = [[1, 2],
         [3, 4]]
    f = [I, III]
    g = true
    """
    v = parse_config_text(text)
    assert v == {"a": 3, "b": [1, 2.5], "c": "II", "d": "x # not a comment", "e": [[1, 2], [3, 4]],
                 "f": ["I", "III"], "g": True}


@pytest.mark.parametrize("text,msg", [
    ("a = 1\na = 2", "given twice"),
    ("just words", "expected 'key = value'"),
    ("bad key = 1", "invalid key"),
    ("a =", "has no value"),
    ("a = [1, 2", "unterminated"),
    ('a = "open', "cannot parse"),
    ("zzz = 1", "unknown key 'zzz'"),
])
def test_rejections(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config_text(text, allowed={"a"})


def test_error_names_file_and_line():
    with pytest.raises(ConfigError, match=r"f\.cfg:2:"):
        parse_config_text("a = 1\nb = 2", allowed={"a"}, source="f.cfg")


def test_shipped_configs_parse():
    spec = problem_from_config(read_config(CONFIGS / "one_by_one.cfg", INSTANCE_KEYS))
    assert spec.instance.a_srr_max.tolist() == [[2.0]]
    spec = problem_from_config(read_config(CONFIGS / "stadium_2x2.cfg", INSTANCE_KEYS))
    assert spec.instance.num_sources == 2 and np.all(spec.lower_bounds_gbps == 0.5)
    values = read_config(CONFIGS / "simulate.cfg", SIMULATION_KEYS)
    assert values["settings"] == ["I", "II", "III"]
    cfg = simulation_from(values, setting="III")
    assert cfg.rng_seed == 7 and cfg.setting is Setting.III and cfg.trials == 100


def test_problem_from_rates_and_geometry():
    spec = problem_from_config({"a_srr_max": [[1.0, 2.0]], "a_rdr_max": [1.0, 1.0], "objective": "srm", "beams_source": 2})
    assert spec.objective_kind is ObjectiveKind.SRM and spec.instance.beams_source.tolist() == [2]
    spec = problem_from_config({"sources": [[300, 0]], "relays": [[100, 0]], "eirp_dbm": 57})
    assert spec.instance.a_srr_max[0, 0] > 3.0


@pytest.mark.parametrize("values", [
    {"a_srr_max": [[1.0]]},
    {"a_srr_max": [[1.0]], "a_rdr_max": [1.0], "sources": [[1, 1]]},
    {"sources": [[1, 1]]},
    {"a_srr_max": [[1.0]], "a_rdr_max": [1.0, 2.0]},
    {"a_srr_max": [[1.0]], "a_rdr_max": [1.0], "objective": "best"},
    {"a_srr_max": [[1.0]], "a_rdr_max": [1.0], "lower_bounds_gbps": -1},
    {"sources": [[1, 1]], "relays": [[2, 2]], "eirp_dbm": "loud"},
])
def test_problem_from_config_errors(values):
    with pytest.raises(ConfigError):
        problem_from_config(values)


def test_simulation_from_overrides():
    cfg = simulation_from({"seed": 5, "objectives": "vqm,jrsr", "log_base": 10, "a_max_gbps": 2})
    assert cfg.objectives == (ObjectiveKind.VQM, ObjectiveKind.JRSR)
    assert cfg.quality.log_base == 10 and cfg.quality.a_max_gbps == 2
    assert not math.isclose(cfg.quality.a_max_gbps, 1.5)
    with pytest.raises(ConfigError):
        simulation_from({"trials": 0})
    with pytest.raises(ConfigError):
        simulation_from({"setting": "IV"})
