import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from voltgrid import (
    InjectionVector,
    Line,
    LoadSpec,
    SolverOptions,
    build_admittance,
    build_injections,
    build_network,
    compute_losses,
    solve,
)
from voltgrid.power_flow import mismatch

from conftest import unity_pf_injections
from oracles import gauss_seidel_solve, two_bus_reactive_line_voltage

# Pinned from the Gauss-Seidel oracle at tol 1e-10: case5, full load, PV
# output 0.3 pu at unity power factor.
GOLDEN_CASE5_LOSS = 0.00269279966


def zero_injections(n):
    return InjectionVector(p=np.zeros(n), q=np.zeros(n))


class TestSolve:
    def test_no_load_flat_solution(self, case5):
        y = build_admittance(case5)
        sol = solve(case5, y, zero_injections(5))
        assert sol.converged
        assert np.allclose(sol.vm, 1.0, atol=1e-14)
        assert np.allclose(sol.va, 0.0, atol=1e-14)
        assert sol.total_loss_p == pytest.approx(0.0, abs=1e-14)

    def test_slack_voltage_held_exactly(self, case5):
        y = build_admittance(case5)
        opts = SolverOptions(slack_vm=1.02, slack_va=0.01)
        inj, _ = unity_pf_injections(case5, 1.0, [0.2])
        sol = solve(case5, y, inj, opts)
        assert sol.converged
        assert sol.vm[0] == 1.02
        assert sol.va[0] == 0.01

    def test_two_bus_against_analytic_solution(self, case2):
        y = build_admittance(case2)
        inj = build_injections(case2, 1.0, [])
        sol = solve(case2, y, inj)
        v1 = two_bus_reactive_line_voltage(p_load=0.5, q_load=0.0, x=0.1)
        assert sol.converged
        assert sol.vm[1] == pytest.approx(abs(v1), abs=1e-10)
        assert sol.va[1] == pytest.approx(np.angle(v1), abs=1e-10)
        # lossless line: the slack delivers exactly the load
        assert sol.slack_p == pytest.approx(0.5, abs=1e-8)

    def test_power_balance_all_fixtures(self, all_fixtures):
        for net in all_fixtures.values():
            y = build_admittance(net)
            inj, _ = unity_pf_injections(
                net, 1.0, [0.5 * s.dc_rating for s in net.inverters]
            )
            sol = solve(net, y, inj)
            assert sol.converged
            generation = sol.slack_p + np.sum(inj.p[1:])
            assert generation == pytest.approx(sol.total_loss_p, abs=1e-8)

    def test_residuals_below_tolerance(self, all_fixtures):
        for net in all_fixtures.values():
            y = build_admittance(net)
            inj, _ = unity_pf_injections(
                net, 0.8, [0.7 * s.dc_rating for s in net.inverters]
            )
            sol = solve(net, y, inj)
            assert sol.converged
            res = mismatch(y, inj, sol.vm, sol.va)
            assert np.max(np.abs(res)) <= SolverOptions().tolerance

    def test_agrees_with_gauss_seidel(self, all_fixtures):
        for name, net in all_fixtures.items():
            y = build_admittance(net)
            inj, _ = unity_pf_injections(
                net, 1.0, [0.3 * s.dc_rating for s in net.inverters]
            )
            sol = solve(net, y, inj)
            vm_gs, va_gs, ok, _ = gauss_seidel_solve(y.ybus, inj.p, inj.q, tol=1e-10)
            assert sol.converged and ok, name
            assert np.max(np.abs(sol.vm - vm_gs)) < 1e-6, name

    def test_nonconvergence_is_reported_not_raised(self, case5):
        y = build_admittance(case5)
        crazy = InjectionVector(p=np.array([0.0, 0, 0, -60.0, 0]), q=np.zeros(5))
        sol = solve(case5, y, crazy, SolverOptions(max_iter=40))
        assert not sol.converged
        assert sol.iterations <= 40
        assert not np.isfinite(sol.max_mismatch) or sol.max_mismatch > 1e-8

    def test_dimension_mismatch_rejected(self, case5):
        y = build_admittance(case5)
        with pytest.raises(ValueError):
            solve(case5, y, zero_injections(4))

    def test_solution_arrays_read_only(self, case5):
        y = build_admittance(case5)
        sol = solve(case5, y, zero_injections(5))
        with pytest.raises(ValueError):
            sol.vm[0] = 2.0


class TestComputeLosses:
    def test_no_load_zero(self, case5):
        y = build_admittance(case5)
        sol = solve(case5, y, zero_injections(5))
        assert compute_losses(case5, y, sol) == pytest.approx(0.0, abs=1e-14)

    def test_two_bus_loss_is_slack_minus_load(self, case2):
        y = build_admittance(case2)
        sol = solve(case2, y, build_injections(case2, 1.0, []))
        assert compute_losses(case2, y, sol) == pytest.approx(
            sol.slack_p - 0.5, abs=1e-8
        )

    def test_golden_case5_value(self, case5):
        y = build_admittance(case5)
        inj, _ = unity_pf_injections(case5, 1.0, [0.3])
        sol = solve(case5, y, inj)
        assert compute_losses(case5, y, sol) == pytest.approx(
            GOLDEN_CASE5_LOSS, abs=1e-9
        )

    def test_branch_sum_matches_injection_sum(self, all_fixtures):
        for net in all_fixtures.values():
            y = build_admittance(net)
            inj, _ = unity_pf_injections(
                net, 1.0, [0.6 * s.dc_rating for s in net.inverters]
            )
            sol = solve(net, y, inj)
            assert compute_losses(net, y, sol) == pytest.approx(
                sol.total_loss_p, abs=1e-8
            )

    def test_nonconverged_input_rejected(self, case5):
        y = build_admittance(case5)
        crazy = InjectionVector(p=np.array([0.0, 0, 0, -60.0, 0]), q=np.zeros(5))
        sol = solve(case5, y, crazy, SolverOptions(max_iter=15))
        assert not sol.converged
        with pytest.raises(ValueError):
            compute_losses(case5, y, sol)


class TestMonotoneSanity:
    @given(
        base_p=st.floats(0.05, 0.4),
        extra=st.floats(0.01, 0.3),
        x_over_r=st.floats(1.0, 4.0),
    )
    @settings(max_examples=40, deadline=None)
    def test_more_leaf_load_never_raises_leaf_voltage(self, base_p, extra, x_over_r):
        r = 0.02
        net = build_network(
            "chain4",
            1.0,
            ["slack", "pq", "pq", "pq"],
            4.8,
            [Line(i, i + 1, r, r * x_over_r) for i in range(3)],
            loads={3: LoadSpec(1.0)},
        )
        y = build_admittance(net)
        lo = solve(net, y, build_injections(net, base_p, []))
        hi = solve(net, y, build_injections(net, base_p + extra, []))
        assert lo.converged and hi.converged
        assert hi.vm[3] <= lo.vm[3] + 1e-12
