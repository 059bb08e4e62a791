import json
from fractions import Fraction

import pytest

from dprkit.config import ConfigError, ProjectConfig, load_scenario_requests
from dprkit.fabric import GeometryError


def base():
    return {
        "geometry": {"rows_top": 1, "rows_bottom": 0, "columns": "CLB:2,BRAM:1,CLB:2,BRAM:1"},
        "modules": [{"name": "m", "clb": 2, "bram": 1, "size_kb": 50}],
        "regions": [{"name": "R", "half": "top", "row": 0, "col_start": 0, "col_count": 6, "slot_columns": 3}],
    }


def test_reference_config(ref_cfg):
    assert ref_cfg.source == "reference"
    assert [r.name for r in ref_cfg.regions] == ["PRR1", "PRR2", "PRR3"]
    assert ref_cfg.size_model.overrides["CSD_8"] == 112_000
    assert ref_cfg.size_model.overrides["PRR1"] == 336_000
    assert [p.n_slots for p in ref_cfg.plans()] == [3, 3, 2]
    assert ref_cfg.warnings == []


def test_minimal_config_round_trip(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(base()))
    cfg = ProjectConfig.load(path)
    assert cfg.plan(cfg.region("R")).n_slots == 2
    assert cfg.size_model.overrides == {"m": 50_000}


@pytest.mark.parametrize("mutate, error", [
    (lambda d: d["regions"][0].update(modules=["ghost"]), ConfigError),
    (lambda d: d["modules"].append(dict(d["modules"][0])), ConfigError),
    (lambda d: d["regions"][0].update(name="m"), ConfigError),
    (lambda d: d.pop("geometry"), ConfigError),
    (lambda d: d["geometry"].update(columns="CLB:2,XYZ:1"), GeometryError),
    (lambda d: d["modules"][0].update(clb=0, bram=0), ConfigError),
])
def test_bad_configs(mutate, error):
    data = base()
    mutate(data)
    with pytest.raises(error):
        ProjectConfig.from_dict(data)


def test_fit_warning():
    data = base()
    data["modules"].append({"name": "huge", "clb": 9})
    data["regions"][0]["modules"] = ["m"]
    cfg = ProjectConfig.from_dict(data)
    assert cfg.warnings == ["module huge fits no region it is assigned to"]


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError):
        ProjectConfig.load(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError):
        ProjectConfig.load(bad)


def test_requests_from_frames(ref_cfg, tmp_path):
    path = tmp_path / "sc.json"
    path.write_text(json.dumps({"scenario": {"per_frame_cost_ms": 0.02, "requests": [
        {"time": 0, "module": "CSD_8", "frames": 25, "predict": "CSD_16"},
        {"time": 1, "module": "CSD_16", "duration_ms": 2},
    ]}}))
    requests = load_scenario_requests(ref_cfg, path)
    assert requests[0].duration == Fraction(1, 2) and requests[0].predict == "CSD_16"
    assert requests[1].duration == 2
    with pytest.raises(ConfigError):
        ref_cfg.parse_requests({"requests": [{"module": "CSD_8"}]})
    with pytest.raises(ConfigError):
        ref_cfg.parse_requests({"requests": [{"module": "nope", "duration_ms": 1}]})
