import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from voltgrid import (
    Bus,
    InverterSpec,
    Line,
    LoadSpec,
    NetworkModel,
    ParameterError,
    SchemaError,
    TopologyError,
    build_admittance,
    build_network,
    load_network,
)
from voltgrid.network import (
    impedance_from_pu,
    impedance_to_pu,
    power_from_pu,
    power_to_pu,
)


def two_bus(r=0.0, x=0.1):
    return build_network(
        name="two",
        mva_base=1.0,
        bus_kinds=["slack", "pq"],
        base_kv=4.8,
        lines=[Line(0, 1, r, x)],
        loads={1: LoadSpec(0.5)},
    )


class TestBuildAdmittance:
    def test_two_bus_reactive_line(self):
        y = build_admittance(two_bus(r=0.0, x=0.1))
        # y_series = 1/(j0.1) = -j10
        assert np.allclose(y.g, np.zeros((2, 2)))
        assert np.allclose(y.b, [[-10.0, 10.0], [10.0, -10.0]])

    def test_no_lines_is_a_topology_error(self):
        broken = NetworkModel(
            name="broken",
            mva_base=1.0,
            buses=(Bus(0, "slack", 4.8), Bus(1, "pq", 4.8)),
            lines=(),
        )
        with pytest.raises(TopologyError):
            build_admittance(broken)

    def test_three_bus_chain_row_sums(self):
        net = build_network(
            name="chain3",
            mva_base=1.0,
            bus_kinds=["slack", "pq", "pq"],
            base_kv=4.8,
            lines=[Line(0, 1, 0.01, 0.1), Line(1, 2, 0.01, 0.1)],
        )
        y = build_admittance(net)
        ybus = y.ybus
        assert ybus[0, 1] == ybus[1, 0] == ybus[1, 2] == ybus[2, 1]
        # with zero shunt elements each row of the complex matrix sums to 0
        assert np.max(np.abs(ybus.sum(axis=1))) < 1e-12

    def test_symmetric_and_sparsity_matches_edges(self, all_fixtures):
        for net in all_fixtures.values():
            y = build_admittance(net)
            assert np.array_equal(y.g, y.g.T)
            assert np.array_equal(y.b, y.b.T)
            connected = {(l.from_bus, l.to_bus) for l in net.lines}
            connected |= {(t, f) for f, t in connected}
            n = net.n_buses
            for k in range(n):
                for j in range(k + 1, n):
                    off_diag = complex(y.g[k, j], y.b[k, j])
                    if (k, j) in connected:
                        assert off_diag != 0
                    else:
                        assert off_diag == 0

    def test_zero_impedance_line_rejected(self):
        with pytest.raises(ParameterError):
            Line(0, 1, 0.0, 0.0)


class TestPerUnit:
    @given(
        z=st.floats(1e-3, 1e3),
        kv=st.floats(0.2, 230.0),
        mva=st.floats(0.1, 100.0),
    )
    def test_impedance_round_trip(self, z, kv, mva):
        back = impedance_from_pu(impedance_to_pu(z, kv, mva), kv, mva)
        assert back == pytest.approx(z, rel=1e-12)

    @given(kw=st.floats(0.1, 1e5), mva=st.floats(0.1, 100.0))
    def test_power_round_trip(self, kw, mva):
        assert power_from_pu(power_to_pu(kw, mva), mva) == pytest.approx(kw, rel=1e-12)

    def test_physical_units_conversion(self, tmp_path):
        # z_base = 4.8^2 / 2.0 = 11.52 ohm; 1.152 ohm -> 0.1 pu
        text = """
name: phys
units: physical
mva_base: 2.0
buses:
  - {id: 0, kind: slack, base_kv: 4.8}
  - {id: 1, kind: pq, base_kv: 4.8}
lines:
  - {from: 0, to: 1, r_ohm: 0.0, x_ohm: 1.152}
loads:
  - {bus: 1, p_kw: 1000.0, q_kvar: 500.0}
pvs:
  - {bus: 1, s_mva: 1.0, dc_mw: 1.2}
"""
        path = tmp_path / "phys.yaml"
        path.write_text(text)
        net = load_network(path)
        assert net.lines[0].x == pytest.approx(0.1, rel=1e-12)
        assert net.loads[0][1].p_base == pytest.approx(0.5, rel=1e-12)
        assert net.loads[0][1].q_base == pytest.approx(0.25, rel=1e-12)
        assert net.inverters[0].s_rating == pytest.approx(0.5, rel=1e-12)
        assert net.inverters[0].dc_rating == pytest.approx(0.6, rel=1e-12)


class TestRadiality:
    @given(st.data())
    @settings(max_examples=30, deadline=None)
    def test_random_tree_plus_edge_is_rejected(self, data):
        n = data.draw(st.integers(3, 12))
        # random tree: attach each bus to a random earlier bus
        parents = [data.draw(st.integers(0, k - 1)) for k in range(1, n)]
        lines = [Line(p, k + 1, 0.01, 0.05) for k, p in enumerate(parents)]
        build_network("tree", 1.0, ["slack"] + ["pq"] * (n - 1), 4.8, lines)

        extra_from = data.draw(st.integers(0, n - 1))
        extra_to = data.draw(
            st.integers(0, n - 1).filter(lambda t: t != extra_from)
        )
        with pytest.raises(TopologyError):
            build_network(
                "cyclic",
                1.0,
                ["slack"] + ["pq"] * (n - 1),
                4.8,
                lines + [Line(extra_from, extra_to, 0.01, 0.05)],
            )

    def test_disconnected_rejected(self):
        with pytest.raises(TopologyError):
            build_network(
                "disc",
                1.0,
                ["slack", "pq", "pq", "pq"],
                4.8,
                [Line(0, 1, 0.01, 0.05), Line(2, 3, 0.01, 0.05), Line(1, 0, 0.02, 0.05)],
            )


class TestLoadNetwork:
    def test_case37_counts(self, case37):
        assert case37.n_buses == 37
        assert len(case37.lines) == 36
        assert len(case37.loads) == 25
        assert len(case37.inverters) == 5

    def test_case37_table_quantities(self, case37):
        total_p = sum(l.p_base for _, l in case37.loads) * case37.mva_base
        total_q = sum(l.q_base for _, l in case37.loads) * case37.mva_base
        peak_mva = np.hypot(total_p, total_q)
        assert peak_mva == pytest.approx(2.74, abs=0.01)
        assert sum(s.dc_rating for s in case37.inverters) * case37.mva_base == pytest.approx(6.0)
        assert sum(s.s_rating for s in case37.inverters) * case37.mva_base == pytest.approx(5.0)

    def test_case5_counts(self, case5):
        assert case5.n_buses == 5
        assert len(case5.lines) == 4

    def test_two_slack_buses_rejected(self, tmp_path):
        text = """
name: bad
units: per_unit
mva_base: 1.0
buses:
  - {id: 0, kind: slack, base_kv: 4.8}
  - {id: 1, kind: slack, base_kv: 4.8}
lines:
  - {from: 0, to: 1, r: 0.01, x: 0.05}
"""
        path = tmp_path / "bad.yaml"
        path.write_text(text)
        with pytest.raises(SchemaError):
            load_network(path)

    def test_duplicate_bus_id_rejected(self, tmp_path):
        text = """
name: bad
units: per_unit
mva_base: 1.0
buses:
  - {id: 0, kind: slack, base_kv: 4.8}
  - {id: 0, kind: pq, base_kv: 4.8}
lines:
  - {from: 0, to: 1, r: 0.01, x: 0.05}
"""
        path = tmp_path / "bad.yaml"
        path.write_text(text)
        with pytest.raises(SchemaError):
            load_network(path)

    def test_missing_field_rejected(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("buses:\n  - {id: 0}\nlines: [{from: 0, to: 0}]\n")
        with pytest.raises(SchemaError):
            load_network(path)

    def test_immutability(self, case5):
        with pytest.raises(AttributeError):
            case5.buses[0].kind = "pq"  # type: ignore[misc]
        with pytest.raises(AttributeError):
            case5.mva_base = 2.0  # type: ignore[misc]


class TestAttachments:
    def test_bus_back_references(self, case5):
        for idx, spec in enumerate(case5.inverters):
            assert case5.buses[spec.bus].pv == idx
        for bus_id, load in case5.loads:
            assert case5.buses[bus_id].load is load

    def test_per_inverter_droop_override_parsed(self, tmp_path):
        text = """
name: droopy
units: per_unit
mva_base: 1.0
buses:
  - {id: 0, kind: slack, base_kv: 4.8}
  - {id: 1, kind: pq, base_kv: 4.8}
  - {id: 2, kind: pq, base_kv: 4.8}
lines:
  - {from: 0, to: 1, r: 0.01, x: 0.05}
  - {from: 1, to: 2, r: 0.01, x: 0.05}
pvs:
  - {bus: 1, s_rating: 0.5, dc_rating: 0.6,
     droop: {v1: 0.9, v2: 0.97, v3: 1.03, v4: 1.1, q_max: 0.7}}
  - {bus: 2, s_rating: 0.5, dc_rating: 0.6}
"""
        path = tmp_path / "droopy.yaml"
        path.write_text(text)
        net = load_network(path)
        assert net.droop_overrides[0] is not None
        assert net.droop_overrides[0].q_max == 0.7
        assert net.droop_overrides[1] is None

    def test_bad_droop_override_rejected(self, tmp_path):
        text = """
name: bad
units: per_unit
mva_base: 1.0
buses:
  - {id: 0, kind: slack, base_kv: 4.8}
  - {id: 1, kind: pq, base_kv: 4.8}
lines:
  - {from: 0, to: 1, r: 0.01, x: 0.05}
pvs:
  - {bus: 1, s_rating: 0.5, dc_rating: 0.6, droop: {v1: 1.1, v2: 0.9}}
"""
        path = tmp_path / "bad.yaml"
        path.write_text(text)
        with pytest.raises(SchemaError):
            load_network(path)

    def test_inverter_on_slack_rejected(self):
        with pytest.raises(SchemaError):
            build_network(
                "bad",
                1.0,
                ["slack", "pq"],
                4.8,
                [Line(0, 1, 0.01, 0.05)],
                inverters=[InverterSpec(bus=0, s_rating=1.0, dc_rating=1.2)],
            )
