import dataclasses
import json
import os

import numpy as np
import pytest

from slicesim import cli, drl
from slicesim import engine as eng
from slicesim.domain import InvalidScenario, ThresholdRange, default_config


def short_cfg(duration_s=2.0, **kw):
    return dataclasses.replace(default_config(), duration_s=duration_s, **kw)


# --- rng streams ----------------------------------------------------------

def test_rng_streams_deterministic_and_named():
    a = eng.RngStreams(7).stream("fading").standard_normal(8)
    b = eng.RngStreams(7).stream("fading").standard_normal(8)
    assert np.array_equal(a, b)


def test_rng_streams_independent_across_names():
    s = eng.RngStreams(7)
    a = s.stream("fading").standard_normal(8)
    b = s.stream("mobility").standard_normal(8)
    assert not np.array_equal(a, b)


def test_rng_streams_differ_across_seeds():
    a = eng.RngStreams(1).stream("fading").standard_normal(8)
    b = eng.RngStreams(2).stream("fading").standard_normal(8)
    assert not np.array_equal(a, b)


# --- record shape ---------------------------------------------------------

def test_window_and_agent_row_counts():
    cfg = short_cfg()
    rec = eng.run(cfg, "proposed", seed=1)
    # 2000 TTIs / 10 = 200 windows per slice, 199 closed at boundaries
    # plus the terminal close
    assert len(rec.windows) == 200 * 3
    intra_rows = [r for r in rec.agent_rows if r["agent"].startswith("intra")]
    inter_rows = [r for r in rec.agent_rows if r["agent"] == "inter"]
    assert len(intra_rows) == 200 * 3
    assert len(inter_rows) == 2000 // 200
    windows = [r["window"] for r in rec.windows if r["slice"] == "E"]
    assert windows == list(range(200))


def test_first_inter_action_is_initial_allocation():
    cfg = short_cfg(duration_s=0.4)
    sim = eng.Simulation(cfg, "proposed", seed=3)
    rec = sim.run()
    first = [r for r in rec.agent_rows if r["agent"] == "inter"][0]
    assert sim.inter_actions[first["action"]] == tuple(cfg.initial_allocation)
    assert first["reward"] is None


# --- mode semantics -------------------------------------------------------

def test_fixed_allocation_mode_never_moves_the_split():
    cfg = short_cfg(duration_s=1.0, initial_allocation=(6, 5, 3))
    sim = eng.Simulation(cfg, "fixed-allocation", seed=2)
    sim.run()
    assert sim.allocation == {"E": 6, "U": 5, "M": 3}


def test_fixed_threshold_mode_pins_mid_grid_tau():
    cfg = short_cfg(duration_s=1.0)
    sim = eng.Simulation(cfg, "fixed-threshold", seed=2)
    rec = sim.run()
    for s in ("E", "U", "M"):
        grid = sim.tau_grid[s]
        assert sim.tau[s] == pytest.approx(float(grid[len(grid) // 2]))
        actions = {r["action"] for r in rec.agent_rows
                   if r["agent"] == "intra_%s" % s}
        assert actions == {len(grid) // 2}


def test_unknown_mode_rejected():
    with pytest.raises(ValueError):
        eng.Simulation(short_cfg(), "greedy", seed=1)


def test_invalid_scenario_rejected_at_init():
    bad = short_cfg()
    thr = dict(bad.thresholds)
    thr["U"] = ThresholdRange(0.002, 0.002, 20)
    bad = dataclasses.replace(bad, thresholds=thr)
    with pytest.raises(InvalidScenario):
        eng.Simulation(bad, "proposed", seed=1)


# --- determinism and conservation ------------------------------------------

def test_replay_is_byte_identical():
    cfg = short_cfg(duration_s=1.0)
    a = eng.run(cfg, "proposed", seed=11)
    b = eng.run(cfg, "proposed", seed=11)
    assert a.windows_csv() == b.windows_csv()
    assert a.agents_csv() == b.agents_csv()
    ma, mb = a.meta_dict(), b.meta_dict()
    ma.pop("wallclock_s"), mb.pop("wallclock_s")
    assert json.dumps(ma, sort_keys=True) == json.dumps(mb, sort_keys=True)


def test_different_seeds_diverge():
    cfg = short_cfg(duration_s=1.0)
    a = eng.run(cfg, "proposed", seed=11)
    b = eng.run(cfg, "proposed", seed=12)
    assert a.windows_csv() != b.windows_csv()


def test_rb_budget_conserved_over_full_run():
    cfg = short_cfg()
    rec = eng.run(cfg, "proposed", seed=5)
    meta = rec.meta_dict()["conservation"]
    assert meta["rb_violations"] == 0
    assert meta["max_rbgs_per_tti_oru"] <= cfg.grid.total_rbgs


def test_traffic_conserved_per_slice():
    cfg = short_cfg()
    rec = eng.run(cfg, "tddqn", seed=5)
    for s in ("E", "U", "M"):
        t = rec.traffic[s]
        assert t["arrived_bits"] == pytest.approx(
            t["served_bits"] + t["queued_bits"], abs=1e-6)


# --- checkpoints and pretraining -------------------------------------------

def test_save_and_load_agents_continue_epsilon(tmp_path):
    cfg = short_cfg(duration_s=1.0)
    out = str(tmp_path / "ckpt")
    eng.run(cfg, "proposed", seed=4, save_agents=out)
    for name in ("intra_E", "intra_U", "intra_M", "inter"):
        assert os.path.exists(os.path.join(out, "%s.json" % name))
    sim = eng.Simulation(cfg, "proposed", seed=4, load_agents=out)
    lrn = sim.intra_agents["E"]
    assert lrn.invocations == 100
    assert lrn.epsilon() < 1.0


def test_pretrain_zero_seconds_saves_untrained_agents(tmp_path):
    cfg = short_cfg(duration_s=1.0)
    out = str(tmp_path / "fresh")
    eng.pretrain(cfg, 0.0, out, mode="proposed", seed=9)
    ck = drl.load_checkpoint(os.path.join(out, "inter.json"), cfg.inter_agent)
    assert ck.invocations == 0


def test_pretrain_scales_epsilon_horizon(tmp_path):
    cfg = short_cfg(duration_s=1.0)
    out = str(tmp_path / "ep")
    eng.pretrain(cfg, 2 * cfg.duration_s, out, mode="proposed", seed=9)
    ck = drl.load_checkpoint(os.path.join(out, "intra_E.json"), cfg.intra_agent)
    single = eng.Simulation(cfg, "proposed", seed=9).intra_agents["E"]
    assert ck.total_invocations == 2 * single.total_invocations
    assert ck.invocations == 2 * single.total_invocations


# --- artifacts on disk ------------------------------------------------------

def test_run_writes_expected_files(tmp_path):
    cfg = short_cfg(duration_s=0.4)
    out = str(tmp_path / "run")
    eng.run(cfg, "proposed", seed=1, out_dir=out,
            trace_channel=True, trace_grants=True)
    for name in ("windows.csv", "agents.csv", "meta.json",
                 "channel_trace.csv", "grant_trace.csv",
                 "eccdf_rate_E.csv", "eccdf_delay_U.csv", "eccdf_umax_M.csv"):
        assert os.path.exists(os.path.join(out, name)), name


def test_compare_emits_rows_and_deltas(tmp_path):
    cfg = short_cfg(duration_s=0.4)
    out = str(tmp_path / "cmp")
    summary = eng.compare(cfg, ["fixed-allocation", "fixed-threshold"],
                          [1, 2], out_dir=out)
    assert summary["candidate"] == "fixed-allocation"
    assert len(summary["rows"]) == 2 * 2 * 3
    assert "u_hat_sum_rel" in summary["deltas"]["fixed-threshold"]
    with open(os.path.join(out, "runs.csv")) as fh:
        assert len(fh.read().strip().splitlines()) == 1 + 12
    with open(os.path.join(out, "summary.json")) as fh:
        on_disk = json.load(fh)
    assert on_disk["medians"].keys() == summary["medians"].keys()


# --- cli --------------------------------------------------------------------

def test_parse_seeds_ranges_and_lists():
    assert cli.parse_seeds("1..5") == [1, 2, 3, 4, 5]
    assert cli.parse_seeds("1,3,7") == [1, 3, 7]
    assert cli.parse_seeds("2..3, 9") == [2, 3, 9]


def test_cli_print_default_config(capsys):
    assert cli.main(["simulate", "--print-default-config"]) == 0
    out = capsys.readouterr().out
    assert "initial_allocation" in out and "thresholds" in out


def test_cli_simulate_and_compare(tmp_path, capsys):
    from slicesim.domain import config_to_yaml

    cfg_path = str(tmp_path / "cfg.yaml")
    with open(cfg_path, "w") as fh:
        fh.write(config_to_yaml(short_cfg(duration_s=0.4)))
    run_dir = str(tmp_path / "out")
    rc = cli.main(["simulate", "--config", cfg_path, "--mode",
                   "fixed-threshold", "--seed", "1", "--out", run_dir])
    assert rc == 0
    assert os.path.exists(os.path.join(run_dir, "windows.csv"))
    cmp_dir = str(tmp_path / "cmp")
    rc = cli.main(["compare", "--config", cfg_path, "--modes",
                   "fixed-allocation,fixed-threshold", "--seeds", "1",
                   "--out", cmp_dir])
    assert rc == 0
    assert os.path.exists(os.path.join(cmp_dir, "summary.json"))
    assert "u_hat_sum change" in capsys.readouterr().out


def test_cli_rejects_unknown_mode(tmp_path):
    with pytest.raises(SystemExit):
        cli.main(["compare", "--modes", "bogus", "--seeds", "1",
                  "--out", str(tmp_path)])
