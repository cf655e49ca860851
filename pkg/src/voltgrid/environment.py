"""The voltage-regulation environment: state assembly, action dispatch, reward.

One environment instance wraps one immutable network. An episode fixes an
operating scenario; each step maps the agent's normalized reactive commands
onto the inverters, re-solves the power flow for the same scenario, and
scores the resulting voltage profile and reactive utilization.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .inverter import InverterSpec, InverterState, apply_var_priority
from .network import AdmittanceMatrix, NetworkModel, build_admittance
from .power_flow import (
    PowerFlowError,
    PowerFlowSolution,
    SolverOptions,
    build_injections,
    solve,
)
from .scenario import Scenario

ZONE_NORMAL = "normal"
ZONE_1 = "zone1"
ZONE_2 = "zone2"


class ScenarioError(RuntimeError):
    """The scenario is unusable (its baseline power flow does not converge)."""


@dataclass(frozen=True)
class RewardConfig:
    """Voltage-zone boundaries and reward constants.

    ``c`` scales the per-inverter reactive-utilization reward; it needs
    retuning for grids of a different size. Zone boundaries follow ANSI
    service-voltage limits.
    """

    c: float = 200.0
    zone1_penalty: float = 400.0
    zone2_penalty: float = 600.0
    normal_lo: float = 0.95
    normal_hi: float = 1.05
    zone1_lo: float = 0.90
    zone1_hi: float = 1.10


@dataclass(frozen=True)
class RewardBreakdown:
    r_v_total: float
    r_q: float
    r: float
    per_bus_zone: tuple[str, ...]


def classify_zone(vm: float, config: RewardConfig = RewardConfig()) -> str:
    """Assign a voltage magnitude to its operating zone.

    Boundary values belong to the milder zone (0.95 and 1.05 are normal,
    0.90 and 1.10 are zone 1), which keeps the reward upper-semicontinuous.
    """
    if vm < 0:
        raise ValueError(f"voltage magnitude must be >= 0, got {vm}")
    if config.normal_lo <= vm <= config.normal_hi:
        return ZONE_NORMAL
    if config.zone1_lo <= vm <= config.zone1_hi:
        return ZONE_1
    return ZONE_2


def sentinel_reward(n_buses: int, config: RewardConfig = RewardConfig()) -> RewardBreakdown:
    """Worst-case reward used when a power flow fails to converge."""
    r_v = -config.zone2_penalty * n_buses
    return RewardBreakdown(
        r_v_total=r_v, r_q=0.0, r=r_v, per_bus_zone=(ZONE_2,) * n_buses
    )


def reward(
    solution: PowerFlowSolution,
    specs: Sequence[InverterSpec],
    states: Sequence[InverterState],
    config: RewardConfig = RewardConfig(),
) -> RewardBreakdown:
    """Score one operating point: zone penalties plus reactive-utilization reward.

    Every bus contributes 0 / -zone1_penalty / -zone2_penalty by its voltage
    zone (the slack bus is included; its term is always zero in practice).
    Each inverter contributes c * (1 - |Q|/S). A non-converged solution gets
    the worst-case sentinel.
    """
    if not solution.converged:
        return sentinel_reward(len(solution.vm), config)
    zones = tuple(classify_zone(float(v), config) for v in solution.vm)
    penalty = {
        ZONE_NORMAL: 0.0,
        ZONE_1: -config.zone1_penalty,
        ZONE_2: -config.zone2_penalty,
    }
    r_v_total = sum(penalty[z] for z in zones)
    r_q = sum(
        config.c * (1.0 - abs(state.q_cmd) / spec.s_rating)
        for spec, state in zip(specs, states)
    )
    return RewardBreakdown(
        r_v_total=r_v_total, r_q=r_q, r=r_v_total + r_q, per_bus_zone=zones
    )


@dataclass(frozen=True)
class StateLayout:
    """Slice map of the flat state vector; fixed for a given network.

    Layout: bus voltage magnitudes, then (p_out, q_cmd) per inverter, then
    (p, q) per load, all per unit. Inverter entries are realized outputs, the
    quantities a measurement system would report.
    """

    n_buses: int
    n_inverters: int
    n_loads: int

    @property
    def dim(self) -> int:
        return self.n_buses + 2 * self.n_inverters + 2 * self.n_loads

    @property
    def vm(self) -> slice:
        return slice(0, self.n_buses)

    @property
    def pv(self) -> slice:
        return slice(self.n_buses, self.n_buses + 2 * self.n_inverters)

    @property
    def loads(self) -> slice:
        return slice(self.n_buses + 2 * self.n_inverters, self.dim)


class VoltageControlEnv:
    """One-scenario-per-episode environment over a fixed feeder.

    Within an episode the mapping from action to (state, reward) is
    memoryless: the scenario's loads and PV availability stay fixed and each
    action fully replaces the previous reactive dispatch.
    """

    def __init__(
        self,
        network: NetworkModel,
        y: Optional[AdmittanceMatrix] = None,
        solver_options: Optional[SolverOptions] = None,
        reward_config: Optional[RewardConfig] = None,
    ):
        self.network = network
        self.y = y if y is not None else build_admittance(network)
        self.solver_options = solver_options or SolverOptions()
        self.reward_config = reward_config or RewardConfig()
        self.layout = StateLayout(
            n_buses=network.n_buses,
            n_inverters=len(network.inverters),
            n_loads=len(network.loads),
        )
        self._scenario: Optional[Scenario] = None
        self._reset_state: Optional[np.ndarray] = None

    @property
    def state_dim(self) -> int:
        return self.layout.dim

    @property
    def action_dim(self) -> int:
        return self.layout.n_inverters

    def reset(self, scenario: Scenario) -> np.ndarray:
        """Start an episode: solve the unity-power-factor flow for the scenario."""
        if len(scenario.load_scale) != self.layout.n_loads:
            raise ValueError(
                f"scenario has {len(scenario.load_scale)} load multipliers, "
                f"network has {self.layout.n_loads} loads"
            )
        if len(scenario.pv_avail) != self.layout.n_inverters:
            raise ValueError(
                f"scenario has {len(scenario.pv_avail)} PV entries, "
                f"network has {self.layout.n_inverters} inverters"
            )
        states = self.dispatch(np.zeros(self.action_dim), scenario)
        inj = build_injections(self.network, scenario.load_scale, states)
        solution = solve(self.network, self.y, inj, self.solver_options)
        if not solution.converged:
            raise ScenarioError(
                f"baseline power flow for scenario {scenario.tag!r} did not "
                f"converge (max mismatch {solution.max_mismatch:.3e} after "
                f"{solution.iterations} iterations)"
            )
        self._scenario = scenario
        self._reset_state = self._assemble_state(solution, states, scenario)
        return self._reset_state.copy()

    def step(
        self, action: np.ndarray
    ) -> tuple[np.ndarray, RewardBreakdown, Optional[PowerFlowSolution]]:
        """Dispatch an action on the episode's scenario and score the result.

        On a failed power flow the sentinel reward is returned together with
        the episode's initial state: no valid measurement snapshot exists for
        the attempted operating point.
        """
        if self._scenario is None or self._reset_state is None:
            raise RuntimeError("step() before reset()")
        scenario = self._scenario
        states = self.dispatch(np.asarray(action, dtype=float), scenario)
        inj = build_injections(self.network, scenario.load_scale, states)
        try:
            solution = solve(self.network, self.y, inj, self.solver_options)
        except PowerFlowError:
            solution = None
        if solution is None or not solution.converged:
            breakdown = sentinel_reward(self.layout.n_buses, self.reward_config)
            return self._reset_state.copy(), breakdown, solution
        breakdown = reward(solution, self.network.inverters, states, self.reward_config)
        state = self._assemble_state(solution, states, scenario)
        return state, breakdown, solution

    def dispatch(
        self, action: np.ndarray, scenario: Optional[Scenario] = None
    ) -> tuple[InverterState, ...]:
        """Map a normalized action onto inverter operating points (clamp to
        the unit box, scale by each rating, apply VAR priority)."""
        if scenario is None:
            if self._scenario is None:
                raise RuntimeError("dispatch() without a scenario before reset()")
            scenario = self._scenario
        a = np.clip(np.asarray(action, dtype=float), -1.0, 1.0)
        return tuple(
            apply_var_priority(
                spec, float(scenario.pv_avail[i]), float(a[i]) * spec.s_rating
            )
            for i, spec in enumerate(self.network.inverters)
        )

    def _assemble_state(
        self,
        solution: PowerFlowSolution,
        states: Sequence[InverterState],
        scenario: Scenario,
    ) -> np.ndarray:
        out = np.empty(self.layout.dim)
        out[self.layout.vm] = solution.vm
        pv = np.empty(2 * self.layout.n_inverters)
        pv[0::2] = [s.p_out for s in states]
        pv[1::2] = [s.q_cmd for s in states]
        out[self.layout.pv] = pv
        loads = np.empty(2 * self.layout.n_loads)
        load_specs = self.network.loads
        loads[0::2] = [
            spec.p_base * scenario.load_scale[i]
            for i, (_, spec) in enumerate(load_specs)
        ]
        loads[1::2] = [
            spec.q_base * scenario.load_scale[i]
            for i, (_, spec) in enumerate(load_specs)
        ]
        out[self.layout.loads] = loads
        return out
