"""Command line front end.

    slicesim simulate --config cfg.yaml --mode proposed --seed 1 --out out/
    slicesim compare --config cfg.yaml --modes proposed,tddqn --seeds 1..5 --out out/
"""

from __future__ import annotations

import argparse
import sys

from . import engine
from .domain import config_to_yaml, default_config, load_config


def parse_seeds(text: str) -> list[int]:
    """Accept '1..5' ranges (inclusive) and comma lists like '1,2,7'."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def load_or_default(path: str | None):
    return load_config(path) if path else default_config()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="slicesim",
                                     description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one seeded simulation")
    sim.add_argument("--config", help="YAML scenario file (defaults apply)")
    sim.add_argument("--mode", default="proposed", choices=engine.RUN_MODES)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--out", help="output directory for CSV/JSON products")
    sim.add_argument("--duration", type=float, default=None,
                     help="override simulated seconds")
    sim.add_argument("--save-agents", help="directory for agent checkpoints")
    sim.add_argument("--load-agents", help="directory with agent checkpoints")
    sim.add_argument("--trace-channel", action="store_true",
                     help="emit per-TTI channel trace")
    sim.add_argument("--trace-grants", action="store_true",
                     help="emit per-TTI grant trace")
    sim.add_argument("--qos-literal", action="store_true",
                     help="use the uncorrected delay-side QoS comparison")
    sim.add_argument("--reward-literal-sign", action="store_true",
                     help="utilization reward term enters with + sign")
    sim.add_argument("--print-default-config", action="store_true",
                     help="print the full default config and exit")

    cmp_p = sub.add_parser("compare", help="run a mode x seed grid")
    cmp_p.add_argument("--config")
    cmp_p.add_argument("--modes", required=True,
                       help="comma separated run modes, candidate first")
    cmp_p.add_argument("--seeds", required=True, help="e.g. 1..5 or 1,2,7")
    cmp_p.add_argument("--out", required=True)
    cmp_p.add_argument("--load-agents")

    args = parser.parse_args(argv)

    if args.command == "simulate":
        if args.print_default_config:
            sys.stdout.write(config_to_yaml(default_config()))
            return 0
        cfg = load_or_default(args.config)
        if args.duration is not None:
            cfg.duration_s = args.duration
        if args.qos_literal:
            cfg.qos_literal = True
        if args.reward_literal_sign:
            cfg.reward_literal_sign = True
        record = engine.run(cfg, args.mode, seed=args.seed, out_dir=args.out,
                            load_agents=args.load_agents,
                            save_agents=args.save_agents,
                            trace_channel=args.trace_channel,
                            trace_grants=args.trace_grants)
        print("mode=%s seed=%d ttis=%d wallclock=%.1fs"
              % (record.mode, record.seed, record.n_ttis, record.wallclock_s))
        return 0

    if args.command == "compare":
        cfg = load_or_default(args.config)
        modes = [m.strip() for m in args.modes.split(",") if m.strip()]
        for m in modes:
            if m not in engine.RUN_MODES:
                parser.error("unknown mode %r" % m)
        seeds = parse_seeds(args.seeds)
        summary = engine.compare(cfg, modes, seeds, out_dir=args.out,
                                 load_agents=args.load_agents)
        for base, d in summary["deltas"].items():
            print("%s vs %s: u_hat_sum change %+.1f%%"
                  % (summary["candidate"], base, 100.0 * d["u_hat_sum_rel"]))
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
