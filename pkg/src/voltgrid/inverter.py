"""Smart-inverter capability limits, VAR-priority curtailment, and Volt-Var droop control."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np

if TYPE_CHECKING:
    from .network import AdmittanceMatrix, NetworkModel
    from .power_flow import PowerFlowSolution, SolverOptions
    from .scenario import Scenario

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class InverterSpec:
    """A PV smart inverter attached to one bus.

    ``s_rating`` is the AC apparent-power rating and ``dc_rating`` the peak
    DC-side real power, both in per unit on the system MVA base. DC oversizing
    (dc_rating > s_rating) is typical.
    """

    bus: int
    s_rating: float
    dc_rating: float

    def __post_init__(self) -> None:
        if self.s_rating <= 0:
            raise ValueError(f"inverter at bus {self.bus}: s_rating must be > 0")
        if self.dc_rating <= 0:
            raise ValueError(f"inverter at bus {self.bus}: dc_rating must be > 0")


@dataclass(frozen=True)
class InverterState:
    """Operating point of one inverter: availability, command, and realized output."""

    p_avail: float
    q_cmd: float
    p_out: float
    curtailed: float


@dataclass(frozen=True)
class DroopCurve:
    """Piecewise-linear Volt-Var characteristic.

    Full injection (+q_max, as a fraction of the inverter rating) below ``v1``,
    linear taper to zero at ``v2``, deadband on [v2, v3], linear taper to full
    absorption (-q_max) at ``v4``, saturated beyond. Defaults follow the
    California Rule 21 shape.
    """

    v1: float = 0.92
    v2: float = 0.98
    v3: float = 1.02
    v4: float = 1.08
    q_max: float = 1.0

    def __post_init__(self) -> None:
        if not (self.v1 < self.v2 <= self.v3 < self.v4):
            raise ValueError(
                f"droop breakpoints must satisfy v1 < v2 <= v3 < v4, "
                f"got {self.v1}, {self.v2}, {self.v3}, {self.v4}"
            )
        if not 0 < self.q_max <= 1:
            raise ValueError(f"q_max must be in (0, 1], got {self.q_max}")


def apply_var_priority(spec: InverterSpec, p_avail: float, q_cmd: float) -> InverterState:
    """Realize a reactive command under VAR priority.

    The reactive command is honored exactly; real output is limited to the
    remaining headroom on the apparent-power circle, curtailing available PV
    power if necessary. Commands beyond the rating indicate a dispatch bug
    upstream: they are clamped to the rating and logged.
    """
    if p_avail < 0:
        raise ValueError(f"p_avail must be >= 0, got {p_avail}")
    if abs(q_cmd) > spec.s_rating:
        logger.warning(
            "reactive command %.6f exceeds rating %.6f at bus %d; clamping",
            q_cmd, spec.s_rating, spec.bus,
        )
        q_cmd = math.copysign(spec.s_rating, q_cmd)
    headroom = math.sqrt(max(spec.s_rating**2 - q_cmd**2, 0.0))
    p_out = min(p_avail, headroom)
    return InverterState(p_avail=p_avail, q_cmd=q_cmd, p_out=p_out, curtailed=p_avail - p_out)


def droop_q(curve: DroopCurve, spec: InverterSpec, v_local: float, p_avail: float) -> float:
    """Reactive output prescribed by the droop curve at the local voltage.

    Saturates at +/- q_max * s_rating outside [v1, v4]. Reactive capability is
    available regardless of irradiance; ``p_avail`` is part of the dispatch
    interface but does not limit the droop response here (VAR priority).
    """
    qm = curve.q_max * spec.s_rating
    xp = (curve.v1, curve.v2, curve.v3, curve.v4)
    fp = (qm, 0.0, 0.0, -qm)
    return float(np.interp(v_local, xp, fp))


@dataclass(frozen=True)
class DroopEquilibrium:
    """Fixed point of alternating power-flow solves and local droop responses."""

    solution: "PowerFlowSolution"
    states: tuple[InverterState, ...]
    converged: bool
    iterations: int
    residual: float


def solve_droop_equilibrium(
    network: "NetworkModel",
    y: "AdmittanceMatrix",
    scenario: "Scenario",
    curve: Optional[DroopCurve] = None,
    *,
    damping: float = 0.5,
    tol: float = 1e-6,
    max_iter: int = 100,
    solver_options: Optional["SolverOptions"] = None,
) -> DroopEquilibrium:
    """Drive every inverter's autonomous Volt-Var response to a fixed point.

    Iterates {solve flow -> read local voltages -> update each reactive output
    toward its droop target with a damped relaxation -> re-apply VAR priority}
    until no inverter's droop target differs from its output by more than
    ``tol``. ``damping`` seeds the relaxation; from the second iteration on,
    each inverter's factor is refined from a secant estimate of its local
    droop/feeder loop gain (clipped to [0.05, 1]), which keeps stiff feeders
    from limit-cycling without slowing compliant ones. Returns the last
    iterate flagged non-converged if the loop does not settle within
    ``max_iter`` iterations (or if any flow fails).
    """
    from .power_flow import build_injections, solve

    if curve is None:
        curve = DroopCurve()
    curves = [
        override if override is not None else curve
        for override in network.droop_overrides
    ]
    specs = network.inverters
    m = len(specs)
    q = np.zeros(m)
    relax = np.full(m, damping)
    q_prev: Optional[np.ndarray] = None
    targets_prev: Optional[np.ndarray] = None
    states: tuple[InverterState, ...] = ()
    residual = math.inf
    solution = None
    iterations = 0

    for iterations in range(1, max_iter + 1):
        states = tuple(
            apply_var_priority(spec, float(scenario.pv_avail[i]), float(q[i]))
            for i, spec in enumerate(specs)
        )
        inj = build_injections(network, scenario.load_scale, states)
        solution = solve(network, y, inj, solver_options)
        if not solution.converged:
            return DroopEquilibrium(solution, states, False, iterations, residual)
        targets = np.array([
            droop_q(curves[i], spec, solution.vm[spec.bus], float(scenario.pv_avail[i]))
            for i, spec in enumerate(specs)
        ])
        residual = float(np.max(np.abs(targets - q))) if m else 0.0
        if residual <= tol:
            return DroopEquilibrium(solution, states, True, iterations, residual)
        if q_prev is not None:
            dq = q - q_prev
            dt = targets - targets_prev
            with np.errstate(divide="ignore", invalid="ignore"):
                slope = np.where(np.abs(dq) > 1e-12, dt / dq, 0.0)
            relax = np.clip(1.0 / (1.0 - np.minimum(slope, 0.0)), 0.05, 1.0)
        q_prev = q.copy()
        targets_prev = targets.copy()
        q = q + relax * (targets - q)

    assert solution is not None
    return DroopEquilibrium(solution, states, False, iterations, residual)
