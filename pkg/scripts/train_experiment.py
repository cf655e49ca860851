"""Desk-scale training experiment: train on case13, evaluate the 500-hour slice."""
from __future__ import annotations

import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from voltgrid import (
    DdpgAgent,
    DdpgConfig,
    VoltageControlEnv,
    load_network,
    load_profiles,
    train,
)
from voltgrid.harness import evaluate_case
from voltgrid.network import bundled_path
from voltgrid.scenario import training_stream

START, HOURS = 4200, 500


def run(tag, seed, episodes, profile_fraction=0.25, **cfg_kwargs):
    net = load_network(bundled_path("case13.yaml"))
    profiles = load_profiles(bundled_path("profiles_year.csv"))
    cfg = DdpgConfig(**cfg_kwargs)
    env = VoltageControlEnv(net)
    rng = np.random.default_rng(seed)
    agent = DdpgAgent(env.state_dim, env.action_dim, cfg, rng)
    stream = training_stream(
        net, rng, profiles=profiles, profile_fraction=profile_fraction,
        exclude_hours=range(START, START + HOURS),
    )
    t0 = time.time()
    log = train(agent, env, stream, rng, episodes=episodes)
    t_train = time.time() - t0
    rewards = log.mean_rewards()
    steps = sum(e.iterations for e in log.episodes)

    results = {}
    for mode in ("baseline", "voltvar", "ddpg"):
        metrics, _ = evaluate_case(
            mode, net, profiles, start_hour=START, hours=HOURS,
            agent=agent if mode == "ddpg" else None,
        )
        results[mode] = metrics
    b, v, d = results["baseline"], results["voltvar"], results["ddpg"]
    crit_a = (b.undervoltage_count + b.overvoltage_count) > 0
    crit_b = (v.undervoltage_count + v.overvoltage_count) == 0 and \
             (d.undervoltage_count + d.overvoltage_count) == 0
    ratio = d.curtailment_kwh / v.curtailment_kwh if v.curtailment_kwh else float("inf")
    crit_c = ratio <= 0.6
    extra_d = d.losses_kwh - b.losses_kwh
    extra_v = v.losses_kwh - b.losses_kwh
    crit_d = extra_d <= extra_v
    first = np.nanmean(rewards[:50])
    last = np.nanmean(rewards[-50:])
    print(f"[{tag}] seed={seed} episodes={episodes} steps={steps} "
          f"train={t_train/60:.1f}min", flush=True)
    print(f"  rewards: first50={first:.0f} last50={last:.0f} max_ep={np.nanmax(rewards):.0f}", flush=True)
    print(f"  baseline: uv={b.undervoltage_count} ov={b.overvoltage_count} "
          f"loss={b.losses_kwh:.0f} vm=({b.min_vm:.4f},{b.max_vm:.4f})", flush=True)
    print(f"  voltvar : uv={v.undervoltage_count} ov={v.overvoltage_count} "
          f"curt={v.curtailment_kwh:.1f} loss={v.losses_kwh:.0f}", flush=True)
    print(f"  ddpg    : uv={d.undervoltage_count} ov={d.overvoltage_count} "
          f"curt={d.curtailment_kwh:.1f} loss={d.losses_kwh:.0f} "
          f"vm=({d.min_vm:.4f},{d.max_vm:.4f}) nonconv={d.nonconverged_hours}", flush=True)
    print(f"  criteria: a={crit_a} b={crit_b} c={crit_c} (ratio={ratio:.3f}) "
          f"d={crit_d} (extra {extra_d:.1f} vs {extra_v:.1f})", flush=True)
    return agent, log, results


if __name__ == "__main__":
    which = sys.argv[1] if len(sys.argv) > 1 else "all"
    if which in ("all", "g05"):
        run("g05", seed=1, episodes=400, gamma=0.5, noise_sigma_decay=0.99)
    if which in ("all", "g02"):
        run("g02", seed=1, episodes=400, gamma=0.2, noise_sigma_decay=0.99)
    if which in ("all", "g099"):
        run("g099", seed=1, episodes=400, gamma=0.99, noise_sigma_decay=0.99)
