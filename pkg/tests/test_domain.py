import dataclasses

import pytest

from slicesim.domain import (
    InvalidScenario,
    ResourceGrid,
    SLICES,
    allocation_offsets,
    config_from_dict,
    config_to_dict,
    config_to_yaml,
    default_config,
    load_config,
    save_config,
    scenario_problems,
    slice_rb_budget,
    validate_scenario,
)


def test_grid_arithmetic():
    grid = ResourceGrid()
    assert grid.total_rbgs == 14
    assert grid.rbs_per_rbg == 6
    assert grid.total_rbs == 84
    assert grid.rbg_bandwidth_hz == pytest.approx(6 * 180e3)
    assert grid.tti_s == 1e-3
    assert grid.symbols_per_tti == 14
    assert grid.subcarriers_per_rb == 12


def test_slice_budget_from_allocation():
    grid = ResourceGrid()
    alloc = {"E": 5, "U": 5, "M": 4}
    assert slice_rb_budget("M", alloc, grid) == 24
    assert slice_rb_budget("E", alloc, grid) == 30
    assert sum(slice_rb_budget(s, alloc, grid) for s in SLICES) == 84


def test_allocation_offsets_partition_band():
    alloc = {"E": 5, "U": 5, "M": 4}
    offs = allocation_offsets(alloc)
    assert offs["E"] == 0
    assert offs["U"] == 5
    assert offs["M"] == 10


def test_default_config_validates():
    cfg = default_config()
    assert scenario_problems(cfg) == []
    assert validate_scenario(cfg) is cfg


def test_default_users():
    cfg = default_config()
    users = cfg.users
    assert len(users) == 9
    assert [u.id for u in users] == list(range(9))
    assert [u.slice for u in users] == ["E"] * 3 + ["U"] * 3 + ["M"] * 3
    assert cfg.slice_users("U") == [3, 4, 5]


def test_default_orus_equilateral():
    cfg = default_config()
    assert len(cfg.orus) == 3
    xs = [(o.x, o.y) for o in cfg.orus]
    assert xs[0] == (0.0, 0.0)
    assert xs[1] == (500.0, 0.0)
    assert xs[2][0] == pytest.approx(250.0)
    assert xs[2][1] == pytest.approx(250.0 * 3 ** 0.5)


def test_offered_loads_exact():
    cfg = default_config()
    assert cfg.traffic["E"].offered_load_bps == 16.384e6
    assert cfg.traffic["U"].offered_load_bps == 3.84e6
    assert cfg.traffic["M"].offered_load_bps == 0.512e6


def test_packet_bits():
    cfg = default_config()
    assert cfg.traffic["E"].packet_bits == 8192
    assert cfg.traffic["U"].packet_bits == 3840
    assert cfg.traffic["M"].packet_bits == 256


def test_qos_defaults():
    cfg = default_config()
    assert cfg.qos["E"].min_rate_bps == 16e6
    assert cfg.qos["U"].max_delay_s == pytest.approx(2e-3)
    assert cfg.qos["M"].min_rate_bps == 0.5e6


def test_invalid_empty_users():
    cfg = dataclasses.replace(default_config(), users_per_slice={s: 0 for s in SLICES})
    codes = [p.split(':')[0] for p in scenario_problems(cfg)]
    assert "EmptyUsers" in codes
    with pytest.raises(InvalidScenario):
        validate_scenario(cfg)


def test_invalid_allocation_sum():
    cfg = dataclasses.replace(default_config(), initial_allocation=(5, 5, 5))
    codes = [p.split(':')[0] for p in scenario_problems(cfg)]
    assert "RbgSumMismatch" in codes


def test_invalid_qos():
    cfg = default_config()
    bad = dict(cfg.qos)
    bad["E"] = dataclasses.replace(bad["E"], min_rate_bps=0.0)
    cfg = dataclasses.replace(cfg, qos=bad)
    codes = [p.split(':')[0] for p in scenario_problems(cfg)]
    assert "NonPositiveQos" in codes


def test_invalid_threshold_grid():
    cfg = default_config()
    bad = dict(cfg.thresholds)
    bad["U"] = dataclasses.replace(bad["U"], tau_min_s=3e-3, tau_max_s=1e-3)
    cfg = dataclasses.replace(cfg, thresholds=bad)
    codes = [p.split(':')[0] for p in scenario_problems(cfg)]
    assert "BadThresholdGrid" in codes


def test_invalid_cadence():
    cfg = dataclasses.replace(default_config(), intra_period_ttis=7)
    codes = [p.split(':')[0] for p in scenario_problems(cfg)]
    assert "CadenceMismatch" in codes


def test_problem_report_lists_everything():
    cfg = dataclasses.replace(default_config(),
                              users_per_slice={s: 0 for s in SLICES},
                              initial_allocation=(1, 1, 1))
    with pytest.raises(InvalidScenario) as err:
        validate_scenario(cfg)
    text = str(err.value)
    assert "EmptyUsers" in text and "RbgSumMismatch" in text


def test_yaml_round_trip(tmp_path):
    cfg = default_config()
    path = tmp_path / "scenario.yaml"
    save_config(cfg, path)
    assert load_config(path) == cfg


def test_yaml_partial_overrides_merge():
    cfg = config_from_dict({"duration_s": 2.0, "seed": 7,
                            "grid": {"total_rbgs": 10},
                            "initial_allocation": [4, 3, 3]})
    base = default_config()
    assert cfg.duration_s == 2.0
    assert cfg.seed == 7
    assert cfg.grid.total_rbgs == 10
    assert cfg.grid.rbs_per_rbg == base.grid.rbs_per_rbg
    assert cfg.initial_allocation == (4, 3, 3)
    assert cfg.qos == base.qos


def test_dict_round_trip_is_stable():
    cfg = default_config()
    d = config_to_dict(cfg)
    assert config_from_dict(d) == cfg
    assert config_to_yaml(config_from_dict(d)) == config_to_yaml(cfg)


def test_n_ttis():
    cfg = default_config()
    assert cfg.n_ttis == 50000
    assert dataclasses.replace(cfg, duration_s=2.0).n_ttis == 2000
