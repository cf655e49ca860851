"""Command-line interface: power-flow snapshots, training, evaluation, and the
three-case comparison."""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import ExperimentConfig, load_config
from .ddpg import DdpgAgent, load_agent, train
from .environment import VoltageControlEnv
from .harness import MODES, evaluate_case, report, write_records
from .inverter import apply_var_priority
from .network import build_admittance, load_network
from .power_flow import build_injections, solve
from .scenario import load_profiles, training_stream


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="voltgrid",
        description="Distribution-feeder voltage regulation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_pf = sub.add_parser("powerflow", help="solve one operating snapshot")
    p_pf.add_argument("--config", required=True, help="experiment YAML file")
    p_pf.add_argument("--load-scale", type=float, default=1.0,
                      help="multiplier applied to every base load")
    p_pf.add_argument("--pv", type=float, default=0.0,
                      help="PV availability as a fraction of each DC rating")

    p_train = sub.add_parser("train", help="train the coordinating agent")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--seed", type=int, required=True,
                         help="master seed (explicit on purpose)")
    p_train.add_argument("--episodes", type=int, default=None,
                         help="override training.episodes from the config")
    p_train.add_argument("--checkpoint-dir", default=None)
    p_train.add_argument("--log", default=None, help="episode log (JSON lines)")

    def add_eval_args(p):
        p.add_argument("--config", required=True)
        p.add_argument("--checkpoint", default=None,
                       help="agent checkpoint (required for ddpg)")
        p.add_argument("--start-hour", type=int, default=None)
        p.add_argument("--hours", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--records", default=None, help="per-hour CSV output")
        p.add_argument("--allow-nonconverged", action="store_true",
                       help="exit 0 even if some hours failed to converge")

    p_eval = sub.add_parser("evaluate", help="evaluate one dispatch mode")
    p_eval.add_argument("--mode", choices=MODES, required=True)
    add_eval_args(p_eval)

    p_cmp = sub.add_parser("compare",
                           help="run baseline, voltvar, and ddpg side by side")
    add_eval_args(p_cmp)
    p_cmp.add_argument("--table", default=None, help="also write the table here")

    args = parser.parse_args(argv)
    config = load_config(args.config)

    if args.command == "powerflow":
        return _cmd_powerflow(args, config)
    if args.command == "train":
        return _cmd_train(args, config)
    if args.command == "evaluate":
        return _cmd_evaluate(args, config, [args.mode])
    return _cmd_evaluate(args, config, list(MODES))


def _cmd_powerflow(args, config: ExperimentConfig) -> int:
    network = load_network(config.network)
    y = build_admittance(network)
    states = [
        apply_var_priority(spec, args.pv * spec.dc_rating, 0.0)
        for spec in network.inverters
    ]
    inj = build_injections(network, args.load_scale, states)
    sol = solve(network, y, inj, config.solver)
    print(f"network: {network.name} ({network.n_buses} buses, "
          f"{len(network.lines)} lines, mva_base {network.mva_base})")
    print(f"converged: {sol.converged} in {sol.iterations} iterations "
          f"(max mismatch {sol.max_mismatch:.3e})")
    print(f"{'bus':>5} {'kind':<6} {'vm (pu)':>10} {'va (deg)':>10}")
    for bus in network.buses:
        print(f"{bus.id:>5} {bus.kind:<6} {sol.vm[bus.id]:>10.5f} "
              f"{math.degrees(sol.va[bus.id]):>10.4f}")
    print(f"slack injection: {sol.slack_p:.6f} + j{sol.slack_q:.6f} pu")
    print(f"total series losses: {sol.total_loss_p:.6f} pu "
          f"({sol.total_loss_p * network.mva_base * 1000:.1f} kW)")
    return 0 if sol.converged else 1


def _cmd_train(args, config: ExperimentConfig) -> int:
    network = load_network(config.network)
    env = VoltageControlEnv(
        network, solver_options=config.solver, reward_config=config.reward
    )
    rng = np.random.default_rng(args.seed)
    agent = DdpgAgent(env.state_dim, env.action_dim, config.agent, rng)
    profiles = None
    exclude: range = range(0)
    if config.training.profile_fraction > 0:
        profiles = load_profiles(config.profiles)
        # never train on the hours reserved for evaluation
        exclude = range(
            config.evaluation.start_hour,
            config.evaluation.start_hour + config.evaluation.hours,
        )
    stream = training_stream(
        network,
        rng,
        weights=config.training.category_weights,
        profiles=profiles,
        profile_fraction=config.training.profile_fraction,
        envelope_fraction=config.training.envelope_fraction,
        exclude_hours=exclude,
    )
    episodes = args.episodes if args.episodes is not None else config.training.episodes
    log = train(
        agent, env, stream, rng, episodes,
        checkpoint_dir=args.checkpoint_dir,
        checkpoint_every=config.training.checkpoint_every,
    )
    if args.log:
        log.write_jsonl(args.log)
    rewards = log.mean_rewards()
    finite = rewards[np.isfinite(rewards)]
    print(f"trained {len(log.episodes)} episodes "
          f"(mean reward first 10: {np.mean(finite[:10]):.1f}, "
          f"last 10: {np.mean(finite[-10:]):.1f})")
    if args.checkpoint_dir:
        print(f"checkpoints in {args.checkpoint_dir}")
    return 0


def _cmd_evaluate(args, config: ExperimentConfig, modes: list[str]) -> int:
    network = load_network(config.network)
    profiles = load_profiles(config.profiles)
    y = build_admittance(network)
    agent = None
    if "ddpg" in modes:
        if not args.checkpoint:
            print("error: --checkpoint is required for ddpg evaluation",
                  file=sys.stderr)
            return 2
        agent = load_agent(args.checkpoint)
    start = (args.start_hour if args.start_hour is not None
             else config.evaluation.start_hour)
    hours = args.hours if args.hours is not None else config.evaluation.hours
    workers = args.workers if args.workers is not None else config.evaluation.workers

    all_metrics = []
    all_records = []
    for mode in modes:
        metrics, records = evaluate_case(
            mode, network, profiles,
            start_hour=start, hours=hours,
            agent=agent if mode == "ddpg" else None,
            y=y,
            solver_options=config.solver,
            reward_config=config.reward,
            droop_curve=config.droop,
            workers=workers,
        )
        all_metrics.append(metrics)
        all_records.extend(records)

    table = report(all_metrics)
    print(table)
    if getattr(args, "table", None):
        Path(args.table).write_text(table + "\n")
    if args.records:
        write_records(all_records, args.records)
        print(f"per-hour records: {args.records}")

    nonconverged = sum(m.nonconverged_hours for m in all_metrics)
    if nonconverged and not args.allow_nonconverged:
        print(f"error: {nonconverged} non-converged hours", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
