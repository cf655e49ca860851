"""Deterministic actor-critic agent with replay, soft targets, and OU exploration.

The critic regresses bootstrapped targets computed with the slowly-tracking
target networks; the actor ascends the critic's action gradient through the
chain rule. Training is single-threaded over the agent state and fully
deterministic under a seeded generator.
"""
from __future__ import annotations

import json
import logging
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .environment import ScenarioError, VoltageControlEnv
from .neural import Adam, Layer, Mlp, Normalizer, make_mlp
from .scenario import Scenario

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1


class TrainingError(RuntimeError):
    """Training produced a non-finite quantity and cannot continue."""


@dataclass(frozen=True)
class DdpgConfig:
    gamma: float = 0.99
    tau: float = 0.001
    buffer_capacity: int = 100_000
    batch_size: int = 64
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    hidden: tuple[int, ...] = (64, 64)
    actor_final_scale: float = 3e-3
    ou_theta: float = 0.15
    ou_sigma: float = 0.2
    ou_dt: float = 1.0
    noise_sigma_decay: float = 1.0  # per-episode multiplier on the OU sigma
    min_iters_before_check: int = 200
    reward_window: int = 5
    reward_epsilon: float = 5.0
    max_iters: int = 1000
    max_nonconverged_fraction: float = 0.5

    def __post_init__(self) -> None:
        # tau=0 (frozen targets) is allowed; it is useful for isolating the
        # bootstrap path in tests.
        if not 0 <= self.tau <= 1:
            raise ValueError(f"tau must be in [0, 1], got {self.tau}")
        if not 0 <= self.gamma <= 1:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")


class ReplayBuffer:
    """Fixed-capacity FIFO transition store with uniform minibatch sampling."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._s = np.zeros((capacity, state_dim))
        self._a = np.zeros((capacity, action_dim))
        self._r = np.zeros(capacity)
        self._s2 = np.zeros((capacity, state_dim))
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def add(self, s: np.ndarray, a: np.ndarray, r: float, s2: np.ndarray) -> None:
        i = self._next
        self._s[i] = s
        self._a[i] = a
        self._r[i] = r
        self._s2[i] = s2
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(
        self, batch_size: int, rng: np.random.Generator
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, self._size, size=batch_size)
        return self._s[idx], self._a[idx], self._r[idx], self._s2[idx]

    def contents(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Stored transitions, oldest first."""
        if self._size < self.capacity:
            order = np.arange(self._size)
        else:
            order = np.roll(np.arange(self.capacity), -self._next)
        return self._s[order], self._a[order], self._r[order], self._s2[order]


class OuNoise:
    """Mean-reverting (Ornstein-Uhlenbeck) noise; temporally correlated
    exploration for control problems with inertia."""

    def __init__(
        self,
        dim: int,
        theta: float = 0.15,
        sigma: float = 0.2,
        mu: float = 0.0,
        dt: float = 1.0,
    ):
        self.dim = dim
        self.theta = theta
        self.sigma = sigma
        self.mu = mu
        self.dt = dt
        self.x = np.full(dim, mu, dtype=float)

    def reset(self) -> None:
        self.x = np.full(self.dim, self.mu, dtype=float)

    def step(self, rng: np.random.Generator) -> np.ndarray:
        xi = rng.standard_normal(self.dim)
        self.x = (
            self.x
            + self.theta * (self.mu - self.x) * self.dt
            + self.sigma * math.sqrt(self.dt) * xi
        )
        return self.x.copy()


class TerminationTracker:
    """Episode stop rule: reward plateau after a minimum number of steps,
    or an iteration cap."""

    def __init__(
        self,
        min_iters_before_check: int = 200,
        window: int = 5,
        epsilon: float = 5.0,
        max_iters: int = 1000,
    ):
        self.min_iters = min_iters_before_check
        self.window = window
        self.epsilon = epsilon
        self.max_iters = max_iters
        self.iteration = 0
        self._recent: deque[float] = deque(maxlen=window + 1)

    def record(self, reward_value: float) -> None:
        self.iteration += 1
        self._recent.append(reward_value)

    def should_terminate(self) -> tuple[bool, str]:
        if self.iteration >= self.max_iters:
            return True, "max_iterations"
        if self.iteration >= self.min_iters and len(self._recent) == self.window + 1:
            r = list(self._recent)
            deltas = [abs(b - a) for a, b in zip(r, r[1:])]
            if all(d < self.epsilon for d in deltas):
                return True, "reward_converged"
        return False, ""


class DdpgAgent:
    def __init__(
        self,
        state_dim: int,
        action_dim: int,
        config: DdpgConfig,
        rng: np.random.Generator,
    ):
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.config = config
        dims_a = (state_dim, *config.hidden, action_dim)
        dims_c = (state_dim + action_dim, *config.hidden, 1)
        acts_a = ("relu",) * len(config.hidden) + ("tanh",)
        acts_c = ("relu",) * len(config.hidden) + ("identity",)
        self.actor = make_mlp(dims_a, acts_a, rng, final_scale=config.actor_final_scale)
        self.critic = make_mlp(dims_c, acts_c, rng)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.normalizer = Normalizer(state_dim)
        self.actor_opt = Adam(self.actor, lr=config.actor_lr)
        self.critic_opt = Adam(self.critic, lr=config.critic_lr)

    def observe(self, state: np.ndarray) -> None:
        """Fold a visited state into the input-normalization statistics."""
        self.normalizer.update(state[None, :])

    def act(
        self,
        state: np.ndarray,
        explore: bool = False,
        noise: Optional[OuNoise] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> np.ndarray:
        a = self.actor.forward(self.normalizer.normalize(state))
        if explore:
            if noise is None or rng is None:
                raise ValueError("exploration requires a noise process and rng")
            a = a + noise.step(rng)
        return np.clip(a, -1.0, 1.0)

    def bootstrap_targets(self, r: np.ndarray, s2: np.ndarray) -> np.ndarray:
        """Bellman targets computed with the target networks only."""
        s2n = self.normalizer.normalize(s2)
        a2 = self.actor_target.forward(s2n)
        q2 = self.critic_target.forward(np.hstack([s2n, a2]))
        return r[:, None] + self.config.gamma * q2

    def critic_loss_gradients(
        self, batch: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    ) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
        """Mean squared Bellman error and its gradients w.r.t. the critic."""
        s, a, r, s2 = batch
        if len(s) == 0:
            raise ValueError("empty batch")
        y = self.bootstrap_targets(r, s2)
        q, cache = self.critic.forward_cached(
            np.hstack([self.normalizer.normalize(s), a])
        )
        err = q - y
        loss = float(np.mean(err**2))
        grads, _ = self.critic.backward(cache, 2.0 * err / len(s))
        return loss, grads

    def critic_update(
        self, batch: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    ) -> float:
        """One Adam step on the mean squared Bellman error; returns the
        pre-update loss."""
        loss, grads = self.critic_loss_gradients(batch)
        if not math.isfinite(loss):
            raise TrainingError(f"critic loss is not finite: {loss}")
        self.critic_opt.step(grads)
        return loss

    def policy_gradients(
        self, states: np.ndarray
    ) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
        """Mean critic value of the policy's actions and its gradients w.r.t.
        the actor, chained through the live critic's action sensitivity."""
        if len(states) == 0:
            raise ValueError("empty batch")
        sn = self.normalizer.normalize(states)
        a_pi, cache_a = self.actor.forward_cached(sn)
        q, cache_c = self.critic.forward_cached(np.hstack([sn, a_pi]))
        mean_q = float(np.mean(q))
        _, d_input = self.critic.backward(cache_c, np.full_like(q, 1.0 / len(states)))
        d_action = d_input[:, self.state_dim :]
        grads, _ = self.actor.backward(cache_a, d_action)
        return mean_q, grads

    def actor_update(
        self, batch: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    ) -> float:
        """Ascend the critic's action-value along the policy; returns the
        pre-update mean value."""
        mean_q, grads = self.policy_gradients(batch[0])
        if not math.isfinite(mean_q):
            raise TrainingError(f"actor objective is not finite: {mean_q}")
        self.actor_opt.step([(-dw, -db) for dw, db in grads])
        return mean_q

    def soft_update(self) -> None:
        tau = self.config.tau
        for live, target in (
            (self.actor, self.actor_target),
            (self.critic, self.critic_target),
        ):
            for lp, tp in zip(live.parameters(), target.parameters()):
                tp *= 1.0 - tau
                tp += tau * lp


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    iterations: int
    mean_reward: float
    termination: str
    nonconverged_steps: int = 0


@dataclass
class TrainingLog:
    episodes: list[EpisodeRecord] = field(default_factory=list)

    def mean_rewards(self) -> np.ndarray:
        return np.array([e.mean_reward for e in self.episodes])

    def write_jsonl(self, path: Union[str, Path]) -> None:
        with Path(path).open("w") as fh:
            for rec in self.episodes:
                fh.write(json.dumps(asdict(rec)) + "\n")


def train(
    agent: DdpgAgent,
    env: VoltageControlEnv,
    scenarios: Iterable[Scenario],
    rng: np.random.Generator,
    episodes: int,
    *,
    buffer: Optional[ReplayBuffer] = None,
    checkpoint_dir: Optional[Union[str, Path]] = None,
    checkpoint_every: int = 100,
) -> TrainingLog:
    """Run the episode loop: explore, store, update, soft-track.

    Each episode fixes one scenario from the stream, resets the exploration
    noise, and iterates act/step/store/update until the termination rule
    fires. Episodes whose baseline flow fails are skipped; episodes whose
    exploratory flows fail too often are aborted. Logs one record per episode
    (mean of iteration rewards) and optionally checkpoints periodically.
    """
    cfg = agent.config
    if buffer is None:
        buffer = ReplayBuffer(cfg.buffer_capacity, agent.state_dim, agent.action_dim)
    noise = OuNoise(
        agent.action_dim, theta=cfg.ou_theta, sigma=cfg.ou_sigma, dt=cfg.ou_dt
    )
    log = TrainingLog()
    scenario_iter = iter(scenarios)
    checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None
    if checkpoint_dir is not None:
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    for episode in range(episodes):
        try:
            scenario = next(scenario_iter)
        except StopIteration:
            logger.warning("scenario stream exhausted after %d episodes", episode)
            break
        try:
            state = env.reset(scenario)
        except ScenarioError as exc:
            logger.warning("skipping episode %d: %s", episode, exc)
            log.episodes.append(
                EpisodeRecord(episode, 0, math.nan, "scenario_rejected")
            )
            continue

        noise.reset()
        noise.sigma = cfg.ou_sigma * cfg.noise_sigma_decay**episode
        tracker = TerminationTracker(
            min_iters_before_check=cfg.min_iters_before_check,
            window=cfg.reward_window,
            epsilon=cfg.reward_epsilon,
            max_iters=cfg.max_iters,
        )
        rewards: list[float] = []
        nonconverged = 0
        reason = ""
        while True:
            agent.observe(state)
            action = agent.act(state, explore=True, noise=noise, rng=rng)
            next_state, breakdown, solution = env.step(action)
            if solution is None or not solution.converged:
                nonconverged += 1
            buffer.add(state, action, breakdown.r, next_state)
            if len(buffer) >= cfg.batch_size:
                batch = buffer.sample(cfg.batch_size, rng)
                agent.critic_update(batch)
                agent.actor_update(batch)
                agent.soft_update()
            rewards.append(breakdown.r)
            tracker.record(breakdown.r)
            state = next_state
            done, reason = tracker.should_terminate()
            if (
                not done
                and tracker.iteration >= 20
                and nonconverged > cfg.max_nonconverged_fraction * tracker.iteration
            ):
                done, reason = True, "aborted_nonconverged"
            if done:
                break

        log.episodes.append(
            EpisodeRecord(
                episode=episode,
                iterations=tracker.iteration,
                mean_reward=float(np.mean(rewards)),
                termination=reason,
                nonconverged_steps=nonconverged,
            )
        )
        if checkpoint_dir is not None and (episode + 1) % checkpoint_every == 0:
            save_agent(agent, checkpoint_dir / f"agent_ep{episode + 1:05d}.npz")
    if checkpoint_dir is not None:
        save_agent(agent, checkpoint_dir / "agent_final.npz")
    return log


def _pack_mlp(prefix: str, net: Mlp, arrays: dict) -> list[str]:
    activations = []
    for i, layer in enumerate(net.layers):
        arrays[f"{prefix}_w{i}"] = layer.w
        arrays[f"{prefix}_b{i}"] = layer.b
        activations.append(layer.activation)
    return activations


def _unpack_mlp(prefix: str, activations: Sequence[str], data) -> Mlp:
    layers = []
    for i, act in enumerate(activations):
        layers.append(Layer(w=data[f"{prefix}_w{i}"], b=data[f"{prefix}_b{i}"], activation=act))
    return Mlp(layers)


def save_agent(agent: DdpgAgent, path: Union[str, Path]) -> None:
    """Write a binary checkpoint: parameters, targets, normalizer statistics,
    and optimizer moments. load_agent() round-trips it bit-exactly."""
    arrays: dict[str, np.ndarray] = {}
    meta = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "state_dim": agent.state_dim,
        "action_dim": agent.action_dim,
        "config": asdict(agent.config),
        "activations": {
            "actor": _pack_mlp("actor", agent.actor, arrays),
            "critic": _pack_mlp("critic", agent.critic, arrays),
            "actor_target": _pack_mlp("actor_target", agent.actor_target, arrays),
            "critic_target": _pack_mlp("critic_target", agent.critic_target, arrays),
        },
    }
    arrays["norm_mean"] = agent.normalizer.mean
    arrays["norm_var"] = agent.normalizer.var
    arrays["norm_count"] = np.array(agent.normalizer.count)
    for name, opt in (("actor", agent.actor_opt), ("critic", agent.critic_opt)):
        arrays[f"adam_{name}_t"] = np.array(opt.t)
        for i, (m, v) in enumerate(zip(opt.m, opt.v)):
            arrays[f"adam_{name}_m{i}"] = m
            arrays[f"adam_{name}_v{i}"] = v
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    np.savez(path, **arrays)


def load_agent(path: Union[str, Path]) -> DdpgAgent:
    with np.load(Path(path)) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta["format_version"] != CHECKPOINT_FORMAT_VERSION:
            raise ValueError(
                f"unsupported checkpoint format {meta['format_version']}"
            )
        config_raw = dict(meta["config"])
        config_raw["hidden"] = tuple(config_raw["hidden"])
        config = DdpgConfig(**config_raw)
        agent = DdpgAgent.__new__(DdpgAgent)
        agent.state_dim = meta["state_dim"]
        agent.action_dim = meta["action_dim"]
        agent.config = config
        acts = meta["activations"]
        agent.actor = _unpack_mlp("actor", acts["actor"], data)
        agent.critic = _unpack_mlp("critic", acts["critic"], data)
        agent.actor_target = _unpack_mlp("actor_target", acts["actor_target"], data)
        agent.critic_target = _unpack_mlp("critic_target", acts["critic_target"], data)
        agent.normalizer = Normalizer(agent.state_dim)
        agent.normalizer.mean = data["norm_mean"]
        agent.normalizer.var = data["norm_var"]
        agent.normalizer.count = int(data["norm_count"])
        agent.actor_opt = Adam(agent.actor, lr=config.actor_lr)
        agent.critic_opt = Adam(agent.critic, lr=config.critic_lr)
        for name, opt in (("actor", agent.actor_opt), ("critic", agent.critic_opt)):
            opt.t = int(data[f"adam_{name}_t"])
            opt.m = [data[f"adam_{name}_m{i}"] for i in range(len(opt.m))]
            opt.v = [data[f"adam_{name}_v{i}"] for i in range(len(opt.v))]
    return agent
