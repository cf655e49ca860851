"""Radial distribution network model and bus admittance matrix construction.

The network is a balanced positive-sequence single-phase equivalent: a tree of
buses rooted at the slack (substation) bus, with series R/X lines, constant-PQ
loads, and PV smart inverters. All electrical quantities are stored in per
unit on the network's MVA base.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np
import yaml

from .inverter import DroopCurve, InverterSpec


class NetworkError(ValueError):
    """Base class for network construction problems."""


class SchemaError(NetworkError):
    """The network file does not match the documented schema."""


class TopologyError(NetworkError):
    """The edge set is not a connected tree over all buses."""


class ParameterError(NetworkError):
    """An electrical parameter is out of range (e.g. zero-impedance line)."""


@dataclass(frozen=True)
class LoadSpec:
    """Constant-power demand at nominal conditions, per unit."""

    p_base: float
    q_base: float = 0.0

    def __post_init__(self) -> None:
        if self.p_base < 0:
            raise ParameterError(f"load p_base must be >= 0, got {self.p_base}")


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str  # "slack" or "pq"
    base_kv: float
    load: Optional[LoadSpec] = None
    pv: Optional[int] = None  # index into NetworkModel.inverters

    def __post_init__(self) -> None:
        if self.kind not in ("slack", "pq"):
            raise SchemaError(f"bus {self.id}: unknown kind {self.kind!r}")
        if self.base_kv <= 0:
            raise ParameterError(f"bus {self.id}: base_kv must be > 0")


@dataclass(frozen=True)
class Line:
    """Series branch between two buses; impedances in per unit.

    ``b_shunt`` is the total line-charging susceptance, split equally between
    the two ends. Short overhead/underground distribution lines rarely need
    it, so it defaults to zero.
    """

    from_bus: int
    to_bus: int
    r: float
    x: float
    b_shunt: float = 0.0

    def __post_init__(self) -> None:
        if self.from_bus == self.to_bus:
            raise TopologyError(f"line {self.from_bus}-{self.to_bus} is a self-loop")
        if self.r < 0:
            raise ParameterError(f"line {self.from_bus}-{self.to_bus}: r must be >= 0")
        if self.r == 0 and self.x == 0:
            raise ParameterError(
                f"line {self.from_bus}-{self.to_bus} has zero impedance"
            )


@dataclass(frozen=True)
class NetworkModel:
    """Immutable feeder description; safe to share across threads."""

    name: str
    mva_base: float
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    inverters: tuple[InverterSpec, ...] = ()
    droop_overrides: tuple[Optional[DroopCurve], ...] = ()

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def loads(self) -> tuple[tuple[int, LoadSpec], ...]:
        """(bus id, load) pairs in bus order; the canonical load indexing."""
        return tuple((b.id, b.load) for b in self.buses if b.load is not None)

    @property
    def pv_buses(self) -> tuple[int, ...]:
        return tuple(spec.bus for spec in self.inverters)

    def validate(self) -> None:
        if self.mva_base <= 0:
            raise ParameterError(f"mva_base must be > 0, got {self.mva_base}")
        n = self.n_buses
        ids = [b.id for b in self.buses]
        if ids != list(range(n)):
            raise SchemaError(f"bus ids must be contiguous 0..{n - 1}, got {ids}")
        slack_ids = [b.id for b in self.buses if b.kind == "slack"]
        if len(slack_ids) != 1:
            raise SchemaError(f"exactly one slack bus required, found {slack_ids}")
        if slack_ids[0] != 0:
            raise SchemaError(f"slack bus must have id 0, found {slack_ids[0]}")
        for line in self.lines:
            if not (0 <= line.from_bus < n and 0 <= line.to_bus < n):
                raise TopologyError(
                    f"line {line.from_bus}-{line.to_bus} references a missing bus"
                )
        self._check_radial()
        if len(self.droop_overrides) not in (0, len(self.inverters)):
            raise SchemaError("droop_overrides must align with inverters")
        seen_pv_buses = set()
        for idx, spec in enumerate(self.inverters):
            if not 0 <= spec.bus < n:
                raise SchemaError(f"inverter {idx} references missing bus {spec.bus}")
            if spec.bus == 0:
                raise SchemaError("inverters cannot attach to the slack bus")
            if spec.bus in seen_pv_buses:
                raise SchemaError(f"duplicate inverter at bus {spec.bus}")
            seen_pv_buses.add(spec.bus)
            if self.buses[spec.bus].pv != idx:
                raise SchemaError(
                    f"bus {spec.bus} does not back-reference inverter {idx}"
                )

    def _check_radial(self) -> None:
        n = self.n_buses
        if len(self.lines) != n - 1:
            raise TopologyError(
                f"radial feeder with {n} buses needs {n - 1} lines, "
                f"got {len(self.lines)}"
            )
        adjacency: list[list[int]] = [[] for _ in range(n)]
        for line in self.lines:
            adjacency[line.from_bus].append(line.to_bus)
            adjacency[line.to_bus].append(line.from_bus)
        seen = [False] * n
        stack = [0]
        seen[0] = True
        while stack:
            k = stack.pop()
            for j in adjacency[k]:
                if not seen[j]:
                    seen[j] = True
                    stack.append(j)
        if not all(seen):
            missing = [i for i, s in enumerate(seen) if not s]
            raise TopologyError(f"buses {missing} are not connected to the slack")


@dataclass(frozen=True)
class AdmittanceMatrix:
    """Real and imaginary parts of the bus admittance matrix, per unit."""

    g: np.ndarray
    b: np.ndarray

    @property
    def ybus(self) -> np.ndarray:
        return self.g + 1j * self.b


def build_admittance(network: NetworkModel) -> AdmittanceMatrix:
    """Assemble the bus admittance matrix from the line list.

    Off-diagonals carry the negated series admittance of the connecting line;
    diagonals accumulate incident series admittances plus half the line
    charging at each end.
    """
    network.validate()
    n = network.n_buses
    ybus = np.zeros((n, n), dtype=complex)
    for line in network.lines:
        y_series = 1.0 / complex(line.r, line.x)
        f, t = line.from_bus, line.to_bus
        ybus[f, t] -= y_series
        ybus[t, f] -= y_series
        ybus[f, f] += y_series + 0.5j * line.b_shunt
        ybus[t, t] += y_series + 0.5j * line.b_shunt
    return AdmittanceMatrix(g=ybus.real.copy(), b=ybus.imag.copy())


def z_base_ohm(base_kv: float, mva_base: float) -> float:
    return base_kv**2 / mva_base


def impedance_to_pu(z_ohm: float, base_kv: float, mva_base: float) -> float:
    return z_ohm / z_base_ohm(base_kv, mva_base)


def impedance_from_pu(z_pu: float, base_kv: float, mva_base: float) -> float:
    return z_pu * z_base_ohm(base_kv, mva_base)


def power_to_pu(kw: float, mva_base: float) -> float:
    return kw / (1000.0 * mva_base)


def power_from_pu(p_pu: float, mva_base: float) -> float:
    return p_pu * 1000.0 * mva_base


def build_network(
    name: str,
    mva_base: float,
    bus_kinds: Sequence[str],
    base_kv: Union[float, Sequence[float]],
    lines: Sequence[Line],
    loads: Mapping[int, LoadSpec] = (),
    inverters: Sequence[InverterSpec] = (),
    droop_overrides: Optional[Sequence[Optional[DroopCurve]]] = None,
) -> NetworkModel:
    """Wire up bus attachments and validate; the one constructor fixtures use."""
    n = len(bus_kinds)
    kvs = [float(base_kv)] * n if np.isscalar(base_kv) else [float(v) for v in base_kv]
    if len(kvs) != n:
        raise SchemaError("base_kv must be scalar or one value per bus")
    pv_at_bus = {spec.bus: idx for idx, spec in enumerate(inverters)}
    if len(pv_at_bus) != len(inverters):
        raise SchemaError("duplicate inverter bus")
    loads = dict(loads)
    for b in loads:
        if not 0 <= b < n:
            raise SchemaError(f"load references missing bus {b}")
    buses = tuple(
        Bus(
            id=i,
            kind=bus_kinds[i],
            base_kv=kvs[i],
            load=loads.get(i),
            pv=pv_at_bus.get(i),
        )
        for i in range(n)
    )
    overrides = (
        tuple(droop_overrides)
        if droop_overrides is not None
        else (None,) * len(inverters)
    )
    network = NetworkModel(
        name=name,
        mva_base=mva_base,
        buses=buses,
        lines=tuple(lines),
        inverters=tuple(inverters),
        droop_overrides=overrides,
    )
    network.validate()
    return network


def load_network(path: Union[str, Path]) -> NetworkModel:
    """Parse and validate a feeder description file.

    The file is YAML with sections ``buses``, ``lines``, ``loads``, ``pvs``
    plus ``name``, ``mva_base`` and a ``units`` flag. With ``units: per_unit``
    all electrical quantities are given directly in per unit; with
    ``units: physical`` lines are in ohms (referred to the from-bus voltage
    base), loads in kW/kvar, and inverter ratings in MVA/MW. See the bundled
    fixtures under ``voltgrid/data`` for commented examples.
    """
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise SchemaError(f"{path}: not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: top level must be a mapping")

    units = raw.get("units", "per_unit")
    if units not in ("per_unit", "physical"):
        raise SchemaError(f"{path}: units must be per_unit or physical, got {units!r}")
    try:
        mva_base = float(raw.get("mva_base", 2.74))
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: mva_base must be a number") from exc
    name = str(raw.get("name", path.stem))

    buses_raw = _require_list(raw, "buses", path)
    lines_raw = _require_list(raw, "lines", path)
    loads_raw = raw.get("loads", []) or []
    pvs_raw = raw.get("pvs", []) or []

    kinds: dict[int, str] = {}
    kvs: dict[int, float] = {}
    for entry in buses_raw:
        bid = _require_int(entry, "id", "buses", path)
        if bid in kinds:
            raise SchemaError(f"{path}: duplicate bus id {bid}")
        kinds[bid] = str(entry.get("kind", "pq"))
        kvs[bid] = _require_float(entry, "base_kv", "buses", path)
    n = len(kinds)
    if sorted(kinds) != list(range(n)):
        raise SchemaError(f"{path}: bus ids must be contiguous 0..{n - 1}")
    slack_count = sum(1 for k in kinds.values() if k == "slack")
    if slack_count != 1:
        raise SchemaError(f"{path}: exactly one slack bus required, found {slack_count}")

    lines = []
    for entry in lines_raw:
        f = _require_int(entry, "from", "lines", path)
        t = _require_int(entry, "to", "lines", path)
        if f not in kinds or t not in kinds:
            raise SchemaError(f"{path}: line {f}-{t} references a missing bus")
        if units == "per_unit":
            r = _require_float(entry, "r", "lines", path)
            x = _require_float(entry, "x", "lines", path)
            b = float(entry.get("b_shunt", 0.0))
        else:
            zb = z_base_ohm(kvs[f], mva_base)
            r = _require_float(entry, "r_ohm", "lines", path) / zb
            x = _require_float(entry, "x_ohm", "lines", path) / zb
            b = float(entry.get("b_us", 0.0)) * 1e-6 * zb
        lines.append(Line(from_bus=f, to_bus=t, r=r, x=x, b_shunt=b))

    loads: dict[int, LoadSpec] = {}
    for entry in loads_raw:
        bid = _require_int(entry, "bus", "loads", path)
        if bid not in kinds:
            raise SchemaError(f"{path}: load references missing bus {bid}")
        if bid in loads:
            raise SchemaError(f"{path}: duplicate load at bus {bid}")
        if units == "per_unit":
            p = _require_float(entry, "p", "loads", path)
            q = float(entry.get("q", 0.0))
        else:
            p = power_to_pu(_require_float(entry, "p_kw", "loads", path), mva_base)
            q = power_to_pu(float(entry.get("q_kvar", 0.0)), mva_base)
        loads[bid] = LoadSpec(p_base=p, q_base=q)

    inverters = []
    overrides: list[Optional[DroopCurve]] = []
    for entry in pvs_raw:
        bid = _require_int(entry, "bus", "pvs", path)
        if units == "per_unit":
            s = _require_float(entry, "s_rating", "pvs", path)
            dc = _require_float(entry, "dc_rating", "pvs", path)
        else:
            s = _require_float(entry, "s_mva", "pvs", path) / mva_base
            dc = _require_float(entry, "dc_mw", "pvs", path) / mva_base
        inverters.append(InverterSpec(bus=bid, s_rating=s, dc_rating=dc))
        droop_raw = entry.get("droop")
        if droop_raw is None:
            overrides.append(None)
        else:
            try:
                overrides.append(DroopCurve(**droop_raw))
            except (TypeError, ValueError) as exc:
                raise SchemaError(f"{path}: bad droop curve at bus {bid}: {exc}") from exc

    bus_kinds = [kinds[i] for i in range(n)]
    base_kv = [kvs[i] for i in range(n)]
    return build_network(
        name=name,
        mva_base=mva_base,
        bus_kinds=bus_kinds,
        base_kv=base_kv,
        lines=lines,
        loads=loads,
        inverters=inverters,
        droop_overrides=overrides,
    )


def bundled_path(name: str) -> Path:
    """Path of a data file shipped with the package (fixture feeders, profiles)."""
    return Path(__file__).parent / "data" / name


def _require_list(raw: dict, key: str, path: Path) -> list:
    value = raw.get(key)
    if not isinstance(value, list) or not value:
        raise SchemaError(f"{path}: section {key!r} must be a non-empty list")
    return value


def _require_int(entry: dict, key: str, section: str, path: Path) -> int:
    value = _require(entry, key, section, path)
    if not isinstance(value, int) or isinstance(value, bool):
        raise SchemaError(f"{path}: {section} field {key!r} must be an integer")
    return value


def _require_float(entry: dict, key: str, section: str, path: Path) -> float:
    value = _require(entry, key, section, path)
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: {section} field {key!r} must be a number") from exc


def _require(entry: dict, key: str, section: str, path: Path):
    if not isinstance(entry, dict) or key not in entry:
        raise SchemaError(f"{path}: every {section} entry needs field {key!r}")
    return entry[key]
