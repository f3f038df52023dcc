"""Run engine: ties propagation, traffic, scheduling and the two control
loops into one discrete-TTI simulation.

A single seed fans out into independent named RNG streams (layout, mobility,
fading, per-agent exploration and replay sampling), so agent behavior never
perturbs the channel realization and runs with the same (config, mode, seed)
replay byte-identically.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
import zlib

import numpy as np

from . import agents as ag
from . import channel as ch
from . import drl
from . import metrics as mt
from . import scheduler as sc
from . import traffic as tr
from .domain import (SLICES, ScenarioConfig, allocation_offsets, config_to_yaml,
                     slice_rb_budget, validate_scenario)

RUN_MODES = ("proposed", "tddqn", "fixed-threshold", "fixed-allocation")

AGENT_NAMES = tuple("intra_%s" % s for s in SLICES) + ("inter",)


class RngStreams:
    """Independent generators derived from one seed by stream name."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def stream(self, name: str) -> np.random.Generator:
        tag = zlib.crc32(name.encode("utf-8"))
        return np.random.default_rng(np.random.SeedSequence([self.seed, tag]))


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


class RunRecord:
    """Everything one run emits, before and after serialization."""

    WINDOW_FIELDS = ("window", "slice", "rate_avg", "delay_avg",
                     "delay_penalty", "qos_fraction", "umax", "u_hat", "mu",
                     "delta", "expired", "expired_hat", "completed",
                     "rate_avg_raw_bps", "rate_sum_raw_bps", "delay_avg_raw_s")
    AGENT_FIELDS = ("window", "agent", "epsilon", "action", "reward", "loss")

    def __init__(self, mode: str, seed: int, cfg: ScenarioConfig):
        self.mode = mode
        self.seed = seed
        self.duration_s = cfg.duration_s
        self.n_ttis = cfg.n_ttis
        self.config_digest = hashlib.sha256(
            config_to_yaml(cfg).encode()).hexdigest()
        self.windows: list[dict] = []
        self.agent_rows: list[dict] = []
        self.eccdf: dict[tuple[str, str], list[tuple[float, float]]] = {}
        self.max_rbgs_tti_oru = 0
        self.rb_violations = 0
        self.traffic: dict[str, dict] = {}
        self.wallclock_s = 0.0

    # --- serialization ---------------------------------------------------

    def windows_csv(self) -> str:
        lines = [",".join(self.WINDOW_FIELDS)]
        for row in self.windows:
            lines.append(",".join(_fmt(row[f]) for f in self.WINDOW_FIELDS))
        return "\n".join(lines) + "\n"

    def agents_csv(self) -> str:
        lines = [",".join(self.AGENT_FIELDS)]
        for row in self.agent_rows:
            lines.append(",".join(_fmt(row[f]) for f in self.AGENT_FIELDS))
        return "\n".join(lines) + "\n"

    def eccdf_csv(self, kpi: str, slice_id: str) -> str:
        lines = ["value,eccdf"]
        for v, f in self.eccdf[(kpi, slice_id)]:
            lines.append("%s,%s" % (repr(v), repr(f)))
        return "\n".join(lines) + "\n"

    def meta_dict(self) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "duration_s": self.duration_s,
            "n_ttis": self.n_ttis,
            "config_digest": self.config_digest,
            "wallclock_s": self.wallclock_s,
            "conservation": {
                "max_rbgs_per_tti_oru": self.max_rbgs_tti_oru,
                "rb_violations": self.rb_violations,
            },
            "traffic": self.traffic,
        }

    def write(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "windows.csv"), "w") as fh:
            fh.write(self.windows_csv())
        with open(os.path.join(out_dir, "agents.csv"), "w") as fh:
            fh.write(self.agents_csv())
        for (kpi, s), _ in self.eccdf.items():
            name = "eccdf_%s_%s.csv" % (kpi, s)
            with open(os.path.join(out_dir, name), "w") as fh:
                fh.write(self.eccdf_csv(kpi, s))
        # wall clock lives only here; the data files above are seed-determined
        with open(os.path.join(out_dir, "meta.json"), "w") as fh:
            json.dump(self.meta_dict(), fh, indent=2, sort_keys=True)

    # --- aggregates used by compare() ------------------------------------

    def slice_series(self, slice_id: str, field: str) -> list[float]:
        return [row[field] for row in self.windows if row["slice"] == slice_id]

    def agent_rewards(self, agent: str) -> list[float]:
        return [row["reward"] for row in self.agent_rows
                if row["agent"] == agent and row["reward"] is not None]

    def run_aggregates(self) -> list[dict]:
        """One row per slice with the time-averaged KPIs of this run."""
        out = []
        for s in SLICES:
            u_hat = self.slice_series(s, "u_hat")
            rate = self.slice_series(s, "rate_avg")
            delay = [d for d, c in zip(self.slice_series(s, "delay_avg"),
                                       self.slice_series(s, "completed")) if c > 0]
            qos = self.slice_series(s, "qos_fraction")
            out.append({
                "mode": self.mode,
                "seed": self.seed,
                "slice": s,
                "time_avg_u_hat": float(np.mean(u_hat)),
                "time_avg_rate_avg": float(np.mean(rate)),
                "time_avg_delay_avg": float(np.mean(delay)) if delay else 0.0,
                "min_window_delay_avg": float(np.min(delay)) if delay else 0.0,
                "time_avg_qos_fraction": float(np.mean(qos)),
            })
        return out


class Simulation:
    """One seeded run in one mode."""

    def __init__(self, cfg: ScenarioConfig, mode: str, seed: int | None = None,
                 load_agents: str | None = None,
                 agents: dict[str, drl.DqnLearner] | None = None):
        if mode not in RUN_MODES:
            raise ValueError("unknown mode %r, expected one of %s"
                             % (mode, list(RUN_MODES)))
        self.cfg = validate_scenario(cfg)
        self.mode = mode
        self.seed = cfg.seed if seed is None else int(seed)
        self.streams = RngStreams(self.seed)
        self.record = RunRecord(mode, self.seed, cfg)

        grid = cfg.grid
        self.users = cfg.users
        self.user_slice = {u.id: u.slice for u in self.users}
        self.slice_users = {s: cfg.slice_users(s) for s in SLICES}
        self.buffers = {u.id: tr.UserBuffer() for u in self.users}
        self.buffer_peak = {u.id: 1.0 for u in self.users}

        self.channel = ch.ChannelState(cfg)
        self.rng_layout = self.streams.stream("layout")
        self.rng_mobility = self.streams.stream("mobility")
        self.rng_fading = self.streams.stream("fading")

        self.allocation = {s: cfg.initial_allocation[i]
                           for i, s in enumerate(SLICES)}
        self.tau_grid = {s: ag.threshold_grid(cfg.thresholds[s]) for s in SLICES}
        self.inter_actions = ag.enumerate_allocations(grid.total_rbgs, len(SLICES))
        self.tau = {s: float(self.tau_grid[s][len(self.tau_grid[s]) // 2])
                    for s in SLICES}

        self.intra_learn = mode in ("proposed", "tddqn", "fixed-allocation")
        self.inter_learn = mode in ("proposed", "tddqn", "fixed-threshold")

        n_intra = cfg.n_ttis // cfg.intra_period_ttis
        n_inter = cfg.n_ttis // cfg.inter_period_ttis
        adopted = agents or {}
        self.intra_agents = {}
        for s in SLICES:
            dim = ag.intra_state_dim(len(cfg.orus), len(self.slice_users[s]))
            self.intra_agents[s] = adopted.get("intra_%s" % s) or self._make_learner(
                "intra_%s" % s, [dim] + list(cfg.intra_agent.hidden)
                + [cfg.thresholds[s].levels], cfg.intra_agent, n_intra,
                load_agents)
        self.inter_agent = adopted.get("inter") or self._make_learner(
            "inter", [ag.INTER_STATE_DIM] + list(cfg.inter_agent.hidden)
            + [len(self.inter_actions)], cfg.inter_agent, n_inter, load_agents)
        self.rng_explore = {name: self.streams.stream("explore.%s" % name)
                            for name in AGENT_NAMES}
        self.rng_replay = {name: self.streams.stream("replay.%s" % name)
                           for name in AGENT_NAMES}

        # per-cadence KPI accumulators and utilization histories
        self.intra_acc = {}
        self.inter_acc = {}
        self.intra_series = {s: sc.UtilizationSeries() for s in SLICES}
        self.inter_series = {s: sc.UtilizationSeries() for s in SLICES}
        for s in SLICES:
            budget = slice_rb_budget(s, self.allocation, grid)
            self.intra_acc[s] = mt.SliceAccumulator(s, self.slice_users[s], budget)
            self.inter_acc[s] = mt.SliceAccumulator(s, self.slice_users[s], budget)

        self.prev_intra_state = {s: None for s in SLICES}
        self.prev_intra_action = {s: None for s in SLICES}
        self.prev_inter_state = None
        self.prev_inter_action = None

        self.trace_channel_rows = None
        self.trace_grant_rows = None

    def _make_learner(self, name, widths, params, total, load_dir):
        if load_dir:
            path = os.path.join(load_dir, "%s.json" % name)
            if os.path.exists(path):
                return drl.load_checkpoint(path, params)
        return drl.DqnLearner(widths, params, total,
                              init_rng=self.streams.stream("init.%s" % name),
                              dtype=np.float32)

    # --- boundary handling ------------------------------------------------

    def _build_intra_state(self, s: str) -> np.ndarray:
        cfg = self.cfg
        ids = self.slice_users[s]
        gains = self.channel.gain[ids, :].T  # (orus, slice users)
        bits = []
        for k in ids:
            b = self.buffers[k].queued_bits
            if b > self.buffer_peak[k]:
                self.buffer_peak[k] = b
            bits.append(b)
        peaks = [self.buffer_peak[k] for k in ids]
        return ag.intra_state(gains, bits, peaks, cfg.channel.gain_log_bounds)

    def _backlog_ages(self, slice_id: str, now_s: float) -> dict[int, float]:
        out = {}
        for k in self.slice_users[slice_id]:
            age = self.buffers[k].head_delay(now_s)
            if age is not None:
                out[k] = age
        return out

    def _window_row(self, window: int, stats) -> dict:
        return {
            "window": window, "slice": stats.slice,
            "rate_avg": stats.rate_avg, "delay_avg": stats.delay_avg,
            "delay_penalty": stats.delay_penalty,
            "qos_fraction": stats.qos_fraction, "umax": stats.umax,
            "u_hat": stats.u_hat, "mu": stats.mu, "delta": stats.delta,
            "expired": stats.expired, "expired_hat": stats.expired_hat,
            "completed": stats.completed,
            "rate_avg_raw_bps": stats.rate_avg_raw_bps,
            "rate_sum_raw_bps": stats.rate_sum_raw_bps,
            "delay_avg_raw_s": stats.delay_avg_raw_s,
        }

    def _intra_boundary(self, tti: int) -> None:
        cfg = self.cfg
        first = tti == 0
        now = tti * cfg.grid.tti_s
        window = tti // cfg.intra_period_ttis - 1
        stats_cache = {}
        if not first:
            for s in SLICES:
                stats = self.intra_acc[s].finalize(
                    cfg.qos[s], self.intra_series[s], cfg.grid, cfg.qos_literal,
                    self._backlog_ages(s, now))
                stats_cache[s] = stats
                self.record.windows.append(self._window_row(window, stats))
        for s in SLICES:
            learner = self.intra_agents[s]
            reward = None
            loss = None
            state = self._build_intra_state(s)
            if not first:
                stats = stats_cache[s]
                if self.mode == "tddqn":
                    reward = ag.tddqn_reward(stats.rate_avg, stats.expired_hat,
                                             cfg.weights[s])
                else:
                    reward = ag.intra_reward(stats.u_hat, stats.rate_avg,
                                             stats.expired_hat, cfg.weights[s],
                                             cfg.reward_literal_sign)
            if self.intra_learn:
                if not first:
                    learner.observe(self.prev_intra_state[s],
                                    self.prev_intra_action[s], reward, state)
                    loss = learner.train_once(self.rng_replay["intra_%s" % s])
                action, eps = learner.choose(state,
                                             self.rng_explore["intra_%s" % s])
            else:
                action, eps = len(self.tau_grid[s]) // 2, 0.0
            self.record.agent_rows.append({
                "window": window + 1, "agent": "intra_%s" % s, "epsilon": eps,
                "action": action, "reward": reward, "loss": loss})
            self.prev_intra_state[s] = state
            self.prev_intra_action[s] = action
            self.tau[s] = float(self.tau_grid[s][action])
        for s in SLICES:
            self.intra_acc[s].reset(
                slice_rb_budget(s, self.allocation, cfg.grid))

    def _inter_boundary(self, tti: int) -> None:
        cfg = self.cfg
        first = tti == 0
        epoch = tti // cfg.inter_period_ttis - 1
        learner = self.inter_agent
        reward = None
        loss = None
        if first:
            state = np.zeros(ag.INTER_STATE_DIM)
            action = self.inter_actions.index(tuple(cfg.initial_allocation))
            eps = learner.epsilon()
            learner.invocations += 1
        else:
            now = tti * cfg.grid.tti_s
            stats = {s: self.inter_acc[s].finalize(
                cfg.qos[s], self.inter_series[s], cfg.grid, cfg.qos_literal,
                self._backlog_ages(s, now))
                for s in SLICES}
            state = ag.inter_state(stats)
            reward = ag.inter_reward(stats)
            if self.inter_learn:
                learner.observe(self.prev_inter_state, self.prev_inter_action,
                                reward, state)
                loss = learner.train_once(self.rng_replay["inter"])
                action, eps = learner.choose(state, self.rng_explore["inter"])
                split = self.inter_actions[action]
                self.allocation = {s: split[i] for i, s in enumerate(SLICES)}
            else:
                action, eps = self.prev_inter_action, 0.0
        self.record.agent_rows.append({
            "window": epoch + 1, "agent": "inter", "epsilon": eps,
            "action": action, "reward": reward, "loss": loss})
        self.prev_inter_state = state
        self.prev_inter_action = action
        for s in SLICES:
            self.inter_acc[s].reset(
                slice_rb_budget(s, self.allocation, cfg.grid))
        # users re-associate to the least-pathloss radio unit at every epoch
        ch.reassociate(self.users, cfg.orus, cfg.channel)

    # --- main loop ---------------------------------------------------------

    def run(self) -> RunRecord:
        cfg = self.cfg
        grid = cfg.grid
        t_start = time.perf_counter()
        tti_s = grid.tti_s
        hold_ttis = max(int(round(cfg.channel.heading_hold_s / tti_s)), 1)
        n_orus = len(cfg.orus)
        layers = 1
        subc = grid.subcarriers_per_rb
        rbg_hz = grid.rbg_bandwidth_hz
        serving = {}

        ch.place_users(self.users, cfg.region, self.rng_layout)

        for tti in range(cfg.n_ttis):
            now = tti * tti_s
            redraw = tti % hold_ttis == 0
            if tti > 0:
                ch.step_mobility(self.users, cfg.region, tti_s,
                                 self.rng_mobility, redraw)
            else:
                ch.step_mobility(self.users, cfg.region, 0.0,
                                 self.rng_mobility, True)
            self.channel.refresh(self.users, self.rng_fading)

            if tti % cfg.inter_period_ttis == 0:
                self._inter_boundary(tti)
            if tti % cfg.intra_period_ttis == 0:
                self._intra_boundary(tti)

            serving = {u.id: u.serving_oru for u in self.users}

            # deterministic periodic arrivals become visible this TTI
            for u in self.users:
                for pkt in tr.arrivals_in_tti(cfg.traffic[u.slice], tti, tti_s):
                    self.buffers[u.id].enqueue(pkt)

            rx = self.channel.rx_w
            noise = self.channel.noise_w
            totals = rx.sum(axis=1)

            all_grants = {}
            used = {s: {m: 0 for m in range(n_orus)} for s in SLICES}
            for s in SLICES:
                ids = [k for k in self.slice_users[s] if len(self.buffers[k])]
                if not ids or self.allocation[s] == 0:
                    all_grants[s] = {}
                    continue
                # a popped head costs >=1 RBG, so budget+1 packets suffice
                depth = self.allocation[s] + 1
                queues = {k: self.buffers[k].snapshot(depth) for k in ids}
                mod = {}
                bits = {}
                for k in ids:
                    m = serving[k]
                    # MCS picked on the clean-slot SINR: other radio units
                    # only collide on the low slot indices they actually use,
                    # and the realized per-slot drain already charges that;
                    # the model has no decode failure, so overshooting the
                    # order costs nothing while undershooting strands symbols
                    gamma = rx[k, m] / noise
                    o = sc.modulation_order(gamma, cfg.channel.mcs_sinr_thresholds,
                                            cfg.channel.mcs_orders)
                    mod[k] = o
                    bits[k] = sc.rbg_capacity_bits(gamma, o, grid, layers)
                budgets = {m: self.allocation[s] for m in range(n_orus)}
                grants = sc.schedule_slice(
                    s, queues, serving, self.tau[s], now, budgets, bits, mod,
                    cfg.defer_under_threshold)
                all_grants[s] = grants
                for g in grants.values():
                    used[s][g.oru] += g.n_rbgs

            # RB conservation across slices at each radio unit
            for m in range(n_orus):
                total_rbgs = sum(used[s][m] for s in SLICES)
                if total_rbgs > self.record.max_rbgs_tti_oru:
                    self.record.max_rbgs_tti_oru = total_rbgs
                if total_rbgs > grid.total_rbgs:
                    self.record.rb_violations += 1

            for s in SLICES:
                grants = all_grants[s]
                rates = {}
                for g in grants.values():
                    k, m = g.user, g.oru
                    row = rx[k]
                    cap = g.mod_order * grid.symbols_per_tti * subc \
                        * grid.rbs_per_rbg * g.layers
                    rate = 0.0
                    drain_bits = 0.0
                    for j in g.rbg_slots:
                        interf = 0.0
                        for m2 in range(n_orus):
                            if m2 != m and used[s][m2] > j:
                                interf += row[m2]
                        gamma = row[m] / (interf + noise)
                        shannon = rbg_hz * math.log2(1.0 + gamma)
                        rate += shannon
                        drain_bits += min(shannon * tti_s, cap)
                    rates[k] = rate
                    completed = self.buffers[k].drain(drain_bits, now, tti_s)
                    d_max = cfg.qos[s].max_delay_s
                    proc = cfg.processing_delay_s.get(s, 0.0)
                    for pkt in completed:
                        delay = pkt.delay_s + proc
                        expired = delay >= d_max
                        self.intra_acc[s].add_completion(k, delay, expired)
                        self.inter_acc[s].add_completion(k, delay, expired)
                    if self.trace_grant_rows is not None:
                        self.trace_grant_rows.append(
                            (tti, s, k, m, g.n_rbs(grid), g.mod_order,
                             drain_bits))
                u_t = sc.utilization(grants.values(), grid)
                self.intra_acc[s].add_tti(rates, u_t)
                self.inter_acc[s].add_tti(rates, u_t)

            if self.trace_channel_rows is not None:
                for u in self.users:
                    k = u.id
                    sig = rx[k, serving[k]]
                    gamma = sig / (totals[k] - sig + noise)
                    gain_db = 10.0 * math.log10(self.channel.gain[k, serving[k]])
                    self.trace_channel_rows.append(
                        (tti, k, serving[k], gain_db,
                         10.0 * math.log10(gamma)))

        # close the final window of both cadences (stats only, no training)
        last_window = cfg.n_ttis // cfg.intra_period_ttis - 1
        end_s = cfg.n_ttis * tti_s
        for s in SLICES:
            ages = self._backlog_ages(s, end_s)
            stats = self.intra_acc[s].finalize(
                cfg.qos[s], self.intra_series[s], cfg.grid, cfg.qos_literal,
                ages)
            self.record.windows.append(self._window_row(last_window, stats))
            self.inter_acc[s].finalize(cfg.qos[s], self.inter_series[s],
                                       cfg.grid, cfg.qos_literal, ages)

        self._finish_record()
        self.record.wallclock_s = time.perf_counter() - t_start
        return self.record

    def _finish_record(self) -> None:
        rec = self.record
        for s in SLICES:
            rec.eccdf[("rate", s)] = mt.eccdf(rec.slice_series(s, "rate_sum_raw_bps"))
            rec.eccdf[("delay", s)] = mt.eccdf(rec.slice_series(s, "delay_avg_raw_s"))
            rec.eccdf[("umax", s)] = mt.eccdf(rec.slice_series(s, "umax"))
        for s in SLICES:
            arrived_b = served_b = queued_b = 0.0
            arrived_p = completed_p = 0
            for k in self.slice_users[s]:
                buf = self.buffers[k]
                arrived_b += buf.arrived_bits
                served_b += buf.served_bits
                queued_b += buf.queued_bits
                arrived_p += buf.arrived_packets
                completed_p += buf.completed_packets
            rec.traffic[s] = {
                "arrived_bits": arrived_b, "served_bits": served_b,
                "queued_bits": queued_b, "arrived_packets": arrived_p,
                "completed_packets": completed_p,
            }

    def save_agents(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        for s in SLICES:
            drl.save_checkpoint(self.intra_agents[s],
                                os.path.join(out_dir, "intra_%s.json" % s))
        drl.save_checkpoint(self.inter_agent,
                            os.path.join(out_dir, "inter.json"))


def run(cfg: ScenarioConfig, mode: str, seed: int | None = None,
        out_dir: str | None = None, load_agents: str | None = None,
        save_agents: str | None = None, trace_channel: bool = False,
        trace_grants: bool = False) -> RunRecord:
    """Execute one run and optionally write its outputs."""
    sim = Simulation(cfg, mode, seed, load_agents)
    if trace_channel:
        sim.trace_channel_rows = []
    if trace_grants:
        sim.trace_grant_rows = []
    record = sim.run()
    if save_agents:
        sim.save_agents(save_agents)
    if out_dir:
        record.write(out_dir)
        if trace_channel:
            _write_trace(os.path.join(out_dir, "channel_trace.csv"),
                         ("tti", "user", "oru", "gain_db", "sinr_db"),
                         sim.trace_channel_rows)
        if trace_grants:
            _write_trace(os.path.join(out_dir, "grant_trace.csv"),
                         ("tti", "slice", "user", "oru", "rbs", "mod_order",
                          "bits"), sim.trace_grant_rows)
    return record


def _write_trace(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def pretrain(cfg: ScenarioConfig, seconds: float, save_dir: str,
             mode: str = "proposed", seed: int | None = None) -> RunRecord:
    """Train agents for at least the given sim duration and checkpoint them.

    Training is episodic: queues and channel restart every cfg.duration_s
    with a fresh seed while the agents (networks, replay buffers, epsilon
    progress) persist.  Restarts keep the learners exposed to the regime
    where allocation choices still matter instead of a single ever-growing
    backlog, and epsilon decays over the whole schedule.
    """
    base_seed = cfg.seed if seed is None else int(seed)
    episodes = int(math.ceil(float(seconds) / cfg.duration_s))
    sim = Simulation(cfg, mode, seed=base_seed)
    record = sim.record
    if episodes > 0:
        agents = {"intra_%s" % s: sim.intra_agents[s] for s in SLICES}
        agents["inter"] = sim.inter_agent
        for learner in agents.values():
            learner.total_invocations *= episodes
        record = sim.run()
        for ep in range(1, episodes):
            sim = Simulation(cfg, mode, seed=base_seed + ep, agents=agents)
            record = sim.run()
    sim.save_agents(save_dir)
    return record


def compare(cfg: ScenarioConfig, modes, seeds, out_dir: str | None = None,
            load_agents=None) -> dict:
    """Run a mode x seed grid and summarize per-slice medians and deltas.

    The first mode is the candidate; relative changes are reported against
    every other mode.  Per-run aggregates go to runs.csv so the medians and
    deltas can be recomputed from the emitted rows.  load_agents may be one
    checkpoint directory for every mode or a {mode: directory} mapping.
    """
    modes = list(modes)
    seeds = [int(x) for x in seeds]
    rows = []
    for mode in modes:
        ckpt = load_agents.get(mode) if isinstance(load_agents, dict) \
            else load_agents
        for seed in seeds:
            rec = run(cfg, mode, seed=seed, load_agents=ckpt)
            rows.extend(rec.run_aggregates())

    metrics = ("time_avg_u_hat", "time_avg_rate_avg", "time_avg_delay_avg",
               "min_window_delay_avg", "time_avg_qos_fraction")
    medians: dict[str, dict] = {}
    for mode in modes:
        medians[mode] = {}
        for s in SLICES:
            vals = {m: float(np.median([r[m] for r in rows
                                        if r["mode"] == mode and r["slice"] == s]))
                    for m in metrics}
            medians[mode][s] = vals
        per_seed_sums = [sum(r["time_avg_u_hat"] for r in rows
                             if r["mode"] == mode and r["seed"] == seed)
                         for seed in seeds]
        medians[mode]["u_hat_sum"] = float(np.median(per_seed_sums))

    candidate = modes[0]
    deltas = {}
    for base in modes[1:]:
        d: dict = {"u_hat_sum_rel": _rel(medians[candidate]["u_hat_sum"],
                                         medians[base]["u_hat_sum"])}
        for s in SLICES:
            d[s] = {m: medians[candidate][s][m] - medians[base][s][m]
                    for m in metrics}
            d[s]["u_hat_rel"] = _rel(medians[candidate][s]["time_avg_u_hat"],
                                     medians[base][s]["time_avg_u_hat"])
        deltas[base] = d

    summary = {"modes": modes, "seeds": seeds, "candidate": candidate,
               "medians": medians, "deltas": deltas}
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        fields = ("mode", "seed", "slice") + metrics
        with open(os.path.join(out_dir, "runs.csv"), "w") as fh:
            fh.write(",".join(fields) + "\n")
            for r in rows:
                fh.write(",".join(_fmt(r[f]) for f in fields) + "\n")
        with open(os.path.join(out_dir, "summary.json"), "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
    summary["rows"] = rows
    return summary


def _rel(a: float, b: float) -> float:
    return (a - b) / b if b != 0.0 else 0.0
