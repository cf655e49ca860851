"""Generate the bundled 13-bus and 37-bus fixture files and the synthetic year.

Development tool; the committed YAML/CSV outputs are the deliverables.
"""
from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from voltgrid import (
    apply_var_priority,
    build_admittance,
    build_injections,
    generate_synthetic_year,
    load_network,
    solve,
    write_profiles,
)

DATA = Path(__file__).resolve().parents[1] / "src" / "voltgrid" / "data"

# Positive-sequence impedances for the standard underground cable
# configurations, ohm per mile.
CONFIGS = {
    721: (0.2926, 0.1973),
    722: (0.4751, 0.2973),
    723: (1.2936, 0.6713),
    724: (2.0952, 0.7758),
}

# from, to, length (ft), config
SEGMENTS = [
    (799, 701, 1850, 721),
    (701, 702, 960, 722),
    (702, 705, 400, 724),
    (702, 713, 360, 723),
    (702, 703, 1320, 722),
    (703, 727, 240, 724),
    (703, 730, 600, 723),
    (704, 714, 80, 724),
    (704, 720, 800, 723),
    (705, 742, 320, 724),
    (705, 712, 240, 724),
    (706, 725, 280, 724),
    (707, 724, 760, 724),
    (707, 722, 120, 724),
    (708, 733, 320, 723),
    (708, 732, 320, 724),
    (709, 731, 600, 723),
    (709, 708, 320, 723),
    (710, 735, 200, 724),
    (710, 736, 1280, 724),
    (711, 741, 400, 723),
    (711, 740, 200, 724),
    (713, 704, 520, 723),
    (714, 718, 520, 724),
    (720, 707, 920, 724),
    (720, 706, 600, 723),
    (727, 744, 280, 723),
    (730, 709, 200, 723),
    (733, 734, 560, 723),
    (734, 737, 640, 723),
    (734, 710, 520, 724),
    (737, 738, 400, 723),
    (738, 711, 400, 723),
    (744, 728, 200, 724),
    (744, 729, 280, 724),
]

# node: (kW, kvar), balanced single-phase equivalents of the spot loads
LOADS_37 = {
    701: (630, 315), 712: (85, 40), 713: (85, 40), 714: (38, 18),
    718: (85, 40), 720: (85, 40), 722: (161, 80), 724: (42, 21),
    725: (42, 21), 727: (42, 21), 728: (126, 63), 729: (42, 21),
    730: (85, 40), 731: (85, 40), 732: (42, 21), 733: (85, 40),
    734: (42, 21), 735: (85, 40), 736: (42, 21), 737: (140, 70),
    738: (126, 62), 740: (85, 40), 741: (42, 21), 742: (93, 44),
    744: (42, 21),
}

PV_NODES_37 = [712, 722, 728, 735, 741]  # 1.2 MW DC / 1.0 MVA AC each

MVA_BASE_37 = 2.74
KV_37 = 4.8


def write_case37():
    nodes = sorted({n for seg in SEGMENTS for n in seg[:2]})
    nodes.remove(799)
    order = [799] + nodes + [775]
    index = {n: i for i, n in enumerate(order)}

    lines = []
    for f, t, length, cfg in SEGMENTS:
        r_mi, x_mi = CONFIGS[cfg]
        r = r_mi * length / 5280.0
        x = x_mi * length / 5280.0
        lines.append((index[f], index[t], r, x, f"{f}-{t} {length} ft cfg {cfg}"))
    # 500 kVA 4.8/0.48 kV transformer as an equivalent impedance referred to
    # the 4.8 kV side: z = (0.0009 + j0.0181) * (4.8^2 / 0.5) ohm.
    z_base_500 = KV_37**2 / 0.5
    lines.append(
        (index[709], index[775], 0.0009 * z_base_500, 0.0181 * z_base_500,
         "709-775 500 kVA transformer equivalent")
    )

    out = []
    out.append("# Modified 37-node test feeder, balanced positive-sequence equivalent.")
    out.append("# Line impedances are in ohms referred to the from-bus voltage base;")
    out.append("# loads in kW/kvar; inverter ratings in MVA (AC) and MW (DC).")
    out.append("# Five 1.2 MW PV plants with 1.0 MVA smart inverters are added at")
    out.append("# buses spread across the laterals.")
    out.append("name: case37")
    out.append("units: physical")
    out.append(f"mva_base: {MVA_BASE_37}")
    out.append("buses:")
    for n in order:
        kind = "slack" if n == 799 else "pq"
        kv = 0.48 if n == 775 else KV_37
        out.append(f"  - {{id: {index[n]}, kind: {kind}, base_kv: {kv}}}  # node {n}")
    out.append("lines:")
    for f, t, r, x, comment in lines:
        out.append(f"  - {{from: {f}, to: {t}, r_ohm: {r:.6f}, x_ohm: {x:.6f}}}  # {comment}")
    out.append("loads:")
    for n, (kw, kvar) in sorted(LOADS_37.items()):
        out.append(f"  - {{bus: {index[n]}, p_kw: {kw}, q_kvar: {kvar}}}  # node {n}")
    out.append("pvs:")
    for n in PV_NODES_37:
        out.append(f"  - {{bus: {index[n]}, s_mva: 1.0, dc_mw: 1.2}}  # node {n}")
    (DATA / "case37.yaml").write_text("\n".join(out) + "\n")
    return order


CASE13 = """# Thirteen-bus violation-prone test feeder with three PV smart inverters.
#
#   0 (slack) -- 1 -- 2 -- 3
#                     |    +-- 4 -- 5 -- 6  (PV)
#                     |    +-- 7 -- 8 -- 9  (PV)
#                     +-- 10 -- 11 -- 12    (PV)
#
# Sized so that high-PV/low-load hours push the lateral ends above 1.05 p.u.
# at unity power factor while peak-load evenings stay above 0.95 p.u.
# Quantities are given directly in per unit on the declared MVA base.
name: case13
units: per_unit
mva_base: 1.0
buses:
  - {{id: 0, kind: slack, base_kv: 4.8}}
  - {{id: 1, kind: pq, base_kv: 4.8}}
  - {{id: 2, kind: pq, base_kv: 4.8}}
  - {{id: 3, kind: pq, base_kv: 4.8}}
  - {{id: 4, kind: pq, base_kv: 4.8}}
  - {{id: 5, kind: pq, base_kv: 4.8}}
  - {{id: 6, kind: pq, base_kv: 4.8}}
  - {{id: 7, kind: pq, base_kv: 4.8}}
  - {{id: 8, kind: pq, base_kv: 4.8}}
  - {{id: 9, kind: pq, base_kv: 4.8}}
  - {{id: 10, kind: pq, base_kv: 4.8}}
  - {{id: 11, kind: pq, base_kv: 4.8}}
  - {{id: 12, kind: pq, base_kv: 4.8}}
lines:
  - {{from: 0, to: 1, r: {t_r}, x: {t_x}}}
  - {{from: 1, to: 2, r: {t_r}, x: {t_x}}}
  - {{from: 2, to: 3, r: {t_r}, x: {t_x}}}
  - {{from: 3, to: 4, r: {l_r}, x: {l_x}}}
  - {{from: 4, to: 5, r: {l_r}, x: {l_x}}}
  - {{from: 5, to: 6, r: {l_r}, x: {l_x}}}
  - {{from: 3, to: 7, r: {l_r}, x: {l_x}}}
  - {{from: 7, to: 8, r: {l_r}, x: {l_x}}}
  - {{from: 8, to: 9, r: {l_r}, x: {l_x}}}
  - {{from: 2, to: 10, r: {c_r}, x: {c_x}}}
  - {{from: 10, to: 11, r: {c_r}, x: {c_x}}}
  - {{from: 11, to: 12, r: {c_r}, x: {c_x}}}
loads:
  - {{bus: 1, p: 0.16, q: 0.04}}
  - {{bus: 2, p: 0.16, q: 0.04}}
  - {{bus: 3, p: 0.14, q: 0.035}}
  - {{bus: 4, p: 0.08, q: 0.02}}
  - {{bus: 5, p: 0.06, q: 0.015}}
  - {{bus: 7, p: 0.08, q: 0.02}}
  - {{bus: 8, p: 0.06, q: 0.015}}
  - {{bus: 10, p: 0.09, q: 0.022}}
  - {{bus: 11, p: 0.09, q: 0.022}}
pvs:
  # 20% DC oversizing relative to the AC rating.
  - {{bus: 6, s_rating: 0.667, dc_rating: 0.8}}
  - {{bus: 9, s_rating: 0.667, dc_rating: 0.8}}
  - {{bus: 12, s_rating: 0.667, dc_rating: 0.8}}
"""


def write_case13(t_r, t_x, l_r, l_x, c_r, c_x):
    (DATA / "case13.yaml").write_text(
        CASE13.format(t_r=t_r, t_x=t_x, l_r=l_r, l_x=l_x, c_r=c_r, c_x=c_x)
    )


def probe(name, load_scale, pv_frac):
    net = load_network(DATA / f"{name}.yaml")
    y = build_admittance(net)
    states = [
        apply_var_priority(spec, pv_frac * spec.dc_rating, 0.0)
        for spec in net.inverters
    ]
    inj = build_injections(net, load_scale, states)
    sol = solve(net, y, inj)
    return sol


def main():
    write_case37()
    write_case13(0.008, 0.016, 0.010, 0.020, 0.012, 0.024)

    for name in ("case13", "case37"):
        print(f"== {name} ==")
        for label, ls, pv in (
            ("peak load, no pv", 1.0, 0.0),
            ("low load, full pv", 0.2, 1.0),
            ("mid load, mid pv", 0.6, 0.5),
            ("low load, 0.85 pv", 0.3, 0.85),
        ):
            sol = probe(name, ls, pv)
            print(
                f"  {label:22s} converged={sol.converged} iters={sol.iterations} "
                f"vm[min,max]=({sol.vm.min():.4f}, {sol.vm.max():.4f}) "
                f"loss={sol.total_loss_p:.5f}"
            )

    profiles = generate_synthetic_year()
    write_profiles(profiles, DATA / "profiles_year.csv")
    print("profiles: load [%.3f, %.3f], pv [%.3f, %.3f]" % (
        profiles.load_profile.min(), profiles.load_profile.max(),
        profiles.pv_profile.min(), profiles.pv_profile.max(),
    ))


if __name__ == "__main__":
    main()
