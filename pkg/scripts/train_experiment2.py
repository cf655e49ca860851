"""Robustness experiment: checkpoint selection on a validation slice, multi-seed."""
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
    load_agent,
    load_network,
    load_profiles,
    train,
)
from voltgrid.harness import evaluate_case
from voltgrid.network import bundled_path
from voltgrid.scenario import training_stream

VAL_START, VAL_HOURS = 3600, 500
EVAL_START, EVAL_HOURS = 4200, 500


def violations(m):
    return m.undervoltage_count + m.overvoltage_count


def stress_grid_violations(net, agent, n=9):
    import numpy as np
    from voltgrid import Scenario
    env = VoltageControlEnv(net)
    dc = np.array([s.dc_rating for s in net.inverters])
    bad = 0
    for load in np.linspace(0.2, 1.0, n):
        for pv in np.linspace(0.0, 1.0, n):
            sc = Scenario(load_scale=np.full(len(net.loads), load), pv_avail=pv * dc, tag="g")
            s0 = env.reset(sc)
            _, _, sol = env.step(agent.act(s0))
            if sol is None or not sol.converged:
                bad += 1
            elif sol.vm.max() > 1.05 or sol.vm.min() < 0.95:
                bad += 1
    return bad


def select_checkpoint(net, profiles, ckpt_dir, episodes, every):
    base, _ = evaluate_case("baseline", net, profiles, start_hour=VAL_START, hours=VAL_HOURS)
    candidates = []
    for ep in range(every, episodes + 1, every):
        path = Path(ckpt_dir) / f"agent_ep{ep:05d}.npz"
        if path.exists():
            candidates.append(path)
    ranked = []
    for path in candidates[len(candidates) // 2 - 1:]:
        agent = load_agent(path)
        m, _ = evaluate_case(
            "ddpg", net, profiles, start_hour=VAL_START, hours=VAL_HOURS,
            agent=agent,
        )
        waste = m.curtailment_kwh + (m.losses_kwh - base.losses_kwh)
        ranked.append((violations(m) + m.nonconverged_hours, waste, str(path)))
    ranked.sort()
    return ranked


def run(tag, seed, episodes=500, **cfg_kwargs):
    net = load_network(bundled_path("case13.yaml"))
    profiles = load_profiles(bundled_path("profiles_year.csv"))
    cfg = DdpgConfig(**cfg_kwargs)
    env = VoltageControlEnv(net)
    rng = np.random.default_rng(seed)
    agent = DdpgAgent(env.state_dim, env.action_dim, cfg, rng)
    stream = training_stream(
        net, rng,
        weights={"evening": 1.0, "midday_peak": 1.5, "normal": 1.0},
        profiles=profiles, profile_fraction=0.25, envelope_fraction=0.2,
        exclude_hours=range(VAL_START, EVAL_START + EVAL_HOURS),
    )
    ckpt_dir = Path(f"/tmp/vg_ckpt_{tag}_{seed}")
    t0 = time.time()
    log = train(agent, env, stream, rng, episodes=episodes,
                checkpoint_dir=ckpt_dir, checkpoint_every=50)
    t_train = time.time() - t0
    ranked = select_checkpoint(net, profiles, ckpt_dir, episodes, 50)
    best = load_agent(ranked[0][2])
    results = {}
    for mode in ("baseline", "voltvar", "ddpg"):
        m, _ = evaluate_case(mode, net, profiles, start_hour=EVAL_START,
                             hours=EVAL_HOURS, agent=best if mode == "ddpg" else None)
        results[mode] = m
    b, v, d = results["baseline"], results["voltvar"], results["ddpg"]
    ratio = d.curtailment_kwh / v.curtailment_kwh
    rewards = log.mean_rewards()
    print(f"[{tag} seed={seed}] train={t_train/60:.1f}min steps={sum(e.iterations for e in log.episodes)} "
          f"first50={np.nanmean(rewards[:50]):.0f} last50={np.nanmean(rewards[-50:]):.0f}", flush=True)
    print(f"  validation ranking: {[(r[0], round(r[1],1), r[2][-14:]) for r in ranked]}", flush=True)
    print(f"  eval ddpg: uv={d.undervoltage_count} ov={d.overvoltage_count} "
          f"curt={d.curtailment_kwh:.1f} ratio={ratio:.3f} "
          f"extra_loss={d.losses_kwh - b.losses_kwh:.1f} vs vv={v.losses_kwh - b.losses_kwh:.1f} "
          f"vm=({d.min_vm:.4f},{d.max_vm:.4f})", flush=True)
    ok = (violations(b) > 0 and violations(v) == 0 and violations(d) == 0
          and ratio <= 0.6 and (d.losses_kwh - b.losses_kwh) <= (v.losses_kwh - b.losses_kwh))
    print(f"  ALL CRITERIA: {ok}", flush=True)


if __name__ == "__main__":
    seeds = [int(s) for s in sys.argv[1:]] or [1]
    for seed in seeds:
        run("b128", seed, episodes=500, gamma=0.2, noise_sigma_decay=0.985,
            actor_lr=2e-4, batch_size=128)
