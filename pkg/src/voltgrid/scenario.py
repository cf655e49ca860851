"""Operating scenarios: sampled training categories and yearly hourly profiles."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .network import NetworkModel

HOURS_PER_YEAR = 8760

CATEGORIES = ("evening", "midday_peak", "normal")

# (load multiplier range, PV availability range as a fraction of the DC rating)
_CATEGORY_RANGES = {
    "evening": ((0.8, 1.0), (0.0, 0.0)),
    "midday_peak": ((0.2, 0.5), (0.8, 1.0)),
    "normal": ((0.4, 0.8), (0.3, 0.7)),
}


class ProfileError(ValueError):
    """A profile file does not match the documented format."""


@dataclass(frozen=True)
class Scenario:
    """One operating snapshot: per-load multipliers and per-inverter PV power.

    Constructors keep pv_avail within each inverter's DC rating."""

    load_scale: np.ndarray
    pv_avail: np.ndarray
    tag: str = ""

    def __post_init__(self) -> None:
        if np.any(np.asarray(self.load_scale) < 0):
            raise ValueError("load multipliers must be >= 0")
        if np.any(np.asarray(self.pv_avail) < 0):
            raise ValueError("PV availability must be >= 0")


def sample_training_scenario(
    network: NetworkModel, category: str, rng: np.random.Generator
) -> Scenario:
    """Draw a random scenario from one of the named operating categories.

    Evening hours are high-load with no PV; rare midday peaks are low-load
    with near-full PV; normal daytime is moderate in both. Multipliers are
    drawn independently per load and per inverter within the category range.
    """
    if category not in _CATEGORY_RANGES:
        raise ValueError(f"unknown category {category!r}, expected one of {CATEGORIES}")
    (lo_l, hi_l), (lo_p, hi_p) = _CATEGORY_RANGES[category]
    n_loads = len(network.loads)
    load_scale = rng.uniform(lo_l, hi_l, size=n_loads)
    dc = np.array([spec.dc_rating for spec in network.inverters])
    if lo_p == hi_p == 0.0:
        pv_avail = np.zeros(len(dc))
    else:
        pv_avail = rng.uniform(lo_p, hi_p, size=len(dc)) * dc
    return Scenario(load_scale=load_scale, pv_avail=pv_avail, tag=category)


@dataclass(frozen=True)
class ProfileSet:
    """Normalized hourly load and PV availability shapes for one year."""

    load_profile: np.ndarray
    pv_profile: np.ndarray

    def __post_init__(self) -> None:
        for name, arr in (("load", self.load_profile), ("pv", self.pv_profile)):
            if arr.shape != (HOURS_PER_YEAR,):
                raise ProfileError(
                    f"{name} profile must have {HOURS_PER_YEAR} rows, got {arr.shape[0]}"
                )
            if np.any(arr < 0) or np.any(arr > 1):
                raise ProfileError(f"{name} profile values must lie in [0, 1]")


def load_profiles(path: Union[str, Path]) -> ProfileSet:
    """Read an hourly profile file: CSV with header hour,load_norm,pv_norm."""
    path = Path(path)
    load_vals: list[float] = []
    pv_vals: list[float] = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        expected = {"hour", "load_norm", "pv_norm"}
        if reader.fieldnames is None or not expected.issubset(reader.fieldnames):
            raise ProfileError(
                f"{path}: header must contain columns {sorted(expected)}"
            )
        for row in reader:
            try:
                load_vals.append(float(row["load_norm"]))
                pv_vals.append(float(row["pv_norm"]))
            except (TypeError, ValueError) as exc:
                raise ProfileError(f"{path}: non-numeric row {row}") from exc
    if len(load_vals) != HOURS_PER_YEAR:
        raise ProfileError(
            f"{path}: expected {HOURS_PER_YEAR} data rows, got {len(load_vals)}"
        )
    return ProfileSet(
        load_profile=np.array(load_vals), pv_profile=np.array(pv_vals)
    )


def write_profiles(profiles: ProfileSet, path: Union[str, Path]) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["hour", "load_norm", "pv_norm"])
        for h in range(HOURS_PER_YEAR):
            writer.writerow(
                [h, f"{profiles.load_profile[h]:.6f}", f"{profiles.pv_profile[h]:.6f}"]
            )


def scenario_at(profiles: ProfileSet, network: NetworkModel, hour: int) -> Scenario:
    """The scenario for one profile hour: uniform load scaling, PV scaled per DC rating."""
    if not 0 <= hour < HOURS_PER_YEAR:
        raise ValueError(f"hour must be in [0, {HOURS_PER_YEAR}), got {hour}")
    n_loads = len(network.loads)
    dc = np.array([spec.dc_rating for spec in network.inverters])
    return Scenario(
        load_scale=np.full(n_loads, profiles.load_profile[hour]),
        pv_avail=profiles.pv_profile[hour] * dc,
        tag=f"hour{hour}",
    )


def sample_envelope_scenario(
    network: NetworkModel,
    rng: np.random.Generator,
    load_range: tuple[float, float] = (0.2, 1.0),
    pv_range: tuple[float, float] = (0.0, 1.0),
) -> Scenario:
    """Uniform draw over the whole operating box (load x PV availability).

    The named categories leave gaps (e.g. high load together with high PV);
    envelope draws give the learner coverage of every reachable corner."""
    n_loads = len(network.loads)
    dc = np.array([spec.dc_rating for spec in network.inverters])
    return Scenario(
        load_scale=rng.uniform(*load_range, size=n_loads),
        pv_avail=rng.uniform(*pv_range, size=len(dc)) * dc,
        tag="envelope",
    )


def training_stream(
    network: NetworkModel,
    rng: np.random.Generator,
    weights: Union[dict, None] = None,
    profiles: Union["ProfileSet", None] = None,
    profile_fraction: float = 0.0,
    envelope_fraction: float = 0.0,
    exclude_hours: Union[range, tuple, set] = (),
):
    """Endless stream of training scenarios.

    Draws from the three operating categories with the given mixture weights
    (uniform by default). A configurable fraction of draws is replaced by
    uniform operating-envelope samples, and another fraction by replays of a
    uniformly random profile hour outside ``exclude_hours``; both cover
    operating points the named categories do not span.
    """
    if weights is None:
        weights = {c: 1.0 for c in CATEGORIES}
    names = list(CATEGORIES)
    p = np.array([float(weights.get(c, 0.0)) for c in names])
    if p.sum() <= 0:
        raise ValueError("category weights must not all be zero")
    p = p / p.sum()
    if profile_fraction > 0 and profiles is None:
        raise ValueError("profile_fraction > 0 requires a profile set")
    excluded = set(exclude_hours)
    allowed = [h for h in range(HOURS_PER_YEAR) if h not in excluded]
    while True:
        roll = rng.uniform()
        if roll < envelope_fraction:
            yield sample_envelope_scenario(network, rng)
        elif profiles is not None and roll < envelope_fraction + profile_fraction:
            hour = allowed[rng.integers(0, len(allowed))]
            yield scenario_at(profiles, network, hour)
        else:
            category = names[rng.choice(len(names), p=p)]
            yield sample_training_scenario(network, category, rng)


_LOAD_SHAPE = np.array([
    0.38, 0.36, 0.35, 0.35, 0.36, 0.40, 0.50, 0.60, 0.64, 0.60, 0.55, 0.52,
    0.50, 0.49, 0.50, 0.54, 0.62, 0.78, 0.90, 0.95, 0.90, 0.75, 0.55, 0.44,
])


def generate_synthetic_year(seed: int = 20240811) -> ProfileSet:
    """A synthetic-but-realistic year of normalized load and PV shapes.

    Load is a double-peaked daily shape with weekend, seasonal and random
    variation; PV is a seasonal clear-sky bell with per-day clearness and
    hourly cloud jitter.
    """
    rng = np.random.default_rng(seed)
    load = np.empty(HOURS_PER_YEAR)
    pv = np.empty(HOURS_PER_YEAR)
    for day in range(365):
        doy = day % 365
        season = 0.5 * (1.0 + math.cos(2.0 * math.pi * (doy - 172) / 365.0))
        weekend = day % 7 >= 5
        day_factor = (1.0 - 0.06 * weekend) * (0.97 + 0.05 * season)
        clearness = min(max(rng.normal(0.85, 0.15), 0.15), 1.0)
        half_width = 4.5 + 1.5 * season
        for hod in range(24):
            h = day * 24 + hod
            load_jitter = rng.normal(1.0, 0.03)
            load[h] = _LOAD_SHAPE[hod] * day_factor * load_jitter
            elev = math.cos((hod - 12.5) / half_width * math.pi / 2.0)
            clear_sky = max(elev, 0.0) ** 1.2 if abs(hod - 12.5) < half_width else 0.0
            pv_jitter = rng.normal(1.0, 0.05)
            amp = 0.65 + 0.35 * season
            pv[h] = amp * clear_sky * clearness * pv_jitter
    return ProfileSet(
        load_profile=np.clip(load, 0.0, 1.0), pv_profile=np.clip(pv, 0.0, 1.0)
    )
