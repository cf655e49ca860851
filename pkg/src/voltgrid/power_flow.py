"""Newton-Raphson AC power flow on the polar nodal equations.

The solver treats every non-slack bus as a PQ bus (loads and inverter
injections are constant power), holds the slack voltage fixed, and iterates a
full dense Jacobian from a flat start. Feeders at this scale never justify
sparse machinery.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .inverter import InverterState
from .network import AdmittanceMatrix, NetworkModel


class PowerFlowError(RuntimeError):
    """Numerical failure inside the solver (e.g. singular Jacobian)."""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


@dataclass(frozen=True)
class SolverOptions:
    tolerance: float = 1e-8
    max_iter: int = 50
    slack_vm: float = 1.0
    slack_va: float = 0.0


@dataclass(frozen=True)
class InjectionVector:
    """Net per-bus injections (generation minus load), per unit.

    Slack-bus entries are ignored by the solver; the slack balances the
    system.
    """

    p: np.ndarray
    q: np.ndarray

    def __post_init__(self) -> None:
        if self.p.shape != self.q.shape or self.p.ndim != 1:
            raise ValueError("p and q must be 1-D arrays of equal length")


@dataclass(frozen=True)
class PowerFlowSolution:
    vm: np.ndarray
    va: np.ndarray
    slack_p: float
    slack_q: float
    total_loss_p: float
    converged: bool
    iterations: int
    max_mismatch: float


def build_injections(
    network: NetworkModel,
    load_scale: np.ndarray | float,
    states: Sequence[InverterState],
) -> InjectionVector:
    """Net bus injections for scaled loads plus realized inverter outputs."""
    loads = network.loads
    scale = np.broadcast_to(np.asarray(load_scale, dtype=float), (len(loads),))
    if len(states) != len(network.inverters):
        raise ValueError(
            f"expected {len(network.inverters)} inverter states, got {len(states)}"
        )
    p = np.zeros(network.n_buses)
    q = np.zeros(network.n_buses)
    for (bus, load), s in zip(loads, scale):
        p[bus] -= load.p_base * s
        q[bus] -= load.q_base * s
    for spec, state in zip(network.inverters, states):
        p[spec.bus] += state.p_out
        q[spec.bus] += state.q_cmd
    return InjectionVector(p=p, q=q)


def calculated_power(y: AdmittanceMatrix, vm: np.ndarray, va: np.ndarray):
    """Nodal P and Q implied by a voltage profile."""
    v = vm * np.exp(1j * va)
    s = v * np.conj(y.ybus @ v)
    return s.real, s.imag


def mismatch(
    y: AdmittanceMatrix, inj: InjectionVector, vm: np.ndarray, va: np.ndarray
) -> np.ndarray:
    """Residuals of the nodal power balance at every non-slack bus."""
    p_calc, q_calc = calculated_power(y, vm, va)
    return np.concatenate([(p_calc - inj.p)[1:], (q_calc - inj.q)[1:]])


def solve(
    network: NetworkModel,
    y: AdmittanceMatrix,
    inj: InjectionVector,
    opts: Optional[SolverOptions] = None,
) -> PowerFlowSolution:
    """Solve the power flow; returns diagnostics instead of raising on
    non-convergence. A singular Jacobian raises :class:`PowerFlowError`."""
    if opts is None:
        opts = SolverOptions()
    n = network.n_buses
    if inj.p.shape != (n,):
        raise ValueError(f"injection length {inj.p.shape[0]} != {n} buses")

    g, b = y.g, y.b
    g_diag, b_diag = np.diag(g), np.diag(b)
    pq = np.arange(1, n)

    vm = np.full(n, opts.slack_vm, dtype=float)
    va = np.full(n, opts.slack_va, dtype=float)

    iterations = 0
    converged = False
    max_mis = math.inf
    while True:
        p_calc, q_calc = calculated_power(y, vm, va)
        f = np.concatenate([(p_calc - inj.p)[pq], (q_calc - inj.q)[pq]])
        max_mis = float(np.max(np.abs(f))) if f.size else 0.0
        if not np.isfinite(max_mis) or np.any(vm <= 0):
            break
        if max_mis <= opts.tolerance:
            converged = True
            break
        if iterations >= opts.max_iter:
            break

        th = va[:, None] - va[None, :]
        vv = vm[:, None] * vm[None, :]
        a = vv * (g * np.cos(th) + b * np.sin(th))
        c = vv * (g * np.sin(th) - b * np.cos(th))
        h = c.copy()
        np.fill_diagonal(h, -q_calc - b_diag * vm**2)
        nn = a / vm[None, :]
        np.fill_diagonal(nn, p_calc / vm + g_diag * vm)
        m = -a
        np.fill_diagonal(m, p_calc - g_diag * vm**2)
        ll = c / vm[None, :]
        np.fill_diagonal(ll, q_calc / vm - b_diag * vm)

        jac = np.block([
            [h[np.ix_(pq, pq)], nn[np.ix_(pq, pq)]],
            [m[np.ix_(pq, pq)], ll[np.ix_(pq, pq)]],
        ])
        try:
            dx = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError as exc:
            raise PowerFlowError(f"singular Jacobian: {exc}", iterations) from exc
        k = len(pq)
        va[pq] += dx[:k]
        vm[pq] += dx[k:]
        iterations += 1

    p_calc, q_calc = calculated_power(y, vm, va)
    total_loss = float(np.sum(p_calc)) if np.all(np.isfinite(p_calc)) else math.nan
    vm = vm.copy()
    va = va.copy()
    vm.setflags(write=False)
    va.setflags(write=False)
    return PowerFlowSolution(
        vm=vm,
        va=va,
        slack_p=float(p_calc[0]),
        slack_q=float(q_calc[0]),
        total_loss_p=total_loss,
        converged=converged,
        iterations=iterations,
        max_mismatch=max_mis,
    )


def compute_losses(
    network: NetworkModel, y: AdmittanceMatrix, solution: PowerFlowSolution
) -> float:
    """Total series I^2 R loss over all branches of a converged solution."""
    if not solution.converged:
        raise ValueError("losses are only defined for a converged solution")
    v = solution.vm * np.exp(1j * solution.va)
    total = 0.0
    for line in network.lines:
        y_series = 1.0 / complex(line.r, line.x)
        i_series = (v[line.from_bus] - v[line.to_bus]) * y_series
        total += float(abs(i_series) ** 2 * line.r)
    return total
