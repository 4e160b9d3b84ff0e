"""Utilities for building fleets from the cases in my JSON files, plus shared test helpers."""

import json
from dataclasses import replace
from enum import Enum, nonmember
from pathlib import Path
from typing import Required, TypedDict

import numpy as np

from tclbattery.fleet import Fleet
from tclbattery.tcl import TclParams, TclState

PHYSICAL = TclParams(id=0, thermal_capacitance=2.0, thermal_resistance=2.0, rated_power=5.6,
                     cop=2.5, setpoint=22.5, deadband_halfwidth=2.5)


class UnitJSON(TypedDict):
    C: float
    R: float
    P: float
    cop: float
    setpoint: float
    deadband: float


class FleetCaseJSON(TypedDict, total=False):
    """Expectation for a JSON object to be built into a fleet."""
    name: Required[str]
    ambient_temp: Required[float]
    units: Required[list[UnitJSON]]
    # every unit in `units` is repeated this many times
    count: int
    desc: str
    expected: dict[str, float]


class CaseDataset(TypedDict):
    name: str
    desc: str
    data: list[FleetCaseJSON]


class CaseLoader(Enum):
    BATTERY = "battery_cases.json"

    _DATA_FILE_PREFIX = nonmember(Path(__file__).parent / "data")

    def load(self) -> CaseDataset:
        # noinspection PyUnresolvedReferences
        filepath = CaseLoader._DATA_FILE_PREFIX.joinpath(self.value)
        with open(filepath, mode="rt") as f:
            return json.load(f)


class SignalFile(Enum):
    MINIMAL = "minimal.csv"
    HEADER = "header.csv"
    NON_MONOTONE = "non_monotone.csv"
    NON_NUMERIC = "non_numeric.csv"
    EMPTY = "empty.csv"
    NUMERIC_FIRST_FIELD = "numeric_first_field.csv"
    RAGGED = "ragged.csv"

    _DATA_FILE_PREFIX = nonmember(Path(__file__).parent / "data" / "signals")

    @property
    def path(self) -> Path:
        # noinspection PyUnresolvedReferences
        return SignalFile._DATA_FILE_PREFIX.joinpath(self.value)


def fleet_from_case(case: FleetCaseJSON) -> Fleet:
    params = []
    for unit in case["units"] * case.get("count", 1):
        params.append(TclParams(id=len(params), thermal_capacitance=unit["C"],
                                thermal_resistance=unit["R"], rated_power=unit["P"],
                                cop=unit["cop"], setpoint=unit["setpoint"],
                                deadband_halfwidth=unit["deadband"]))
    states = [TclState.initial(p, p.setpoint, False) for p in params]
    return Fleet.from_units(params, states, case["ambient_temp"])


def homogeneous_fleet(n, *, params=PHYSICAL, temperature=None, on=False, ambient_temp=32.0,
                      steps_since_switch=None):
    """`n` copies of `params` (ids 0 to n - 1) in the same state."""
    temperature = params.setpoint if temperature is None else temperature
    units = [replace(params, id=i) for i in range(n)]
    states = [TclState.initial(p, temperature, on, steps_since_switch) for p in units]
    return Fleet.from_units(units, states, ambient_temp)


def random_fleet(rng, n, *, ambient_temp=32.0):
    """Small fleet with every parameter and state drawn from `rng`."""
    units, states = [], []
    for i in range(n):
        p = TclParams(id=i,
                      thermal_capacitance=rng.uniform(1.0, 3.0),
                      thermal_resistance=rng.uniform(1.0, 3.0),
                      rated_power=rng.uniform(3.0, 8.0),
                      cop=rng.uniform(2.0, 3.0),
                      setpoint=rng.uniform(21.0, 24.0),
                      deadband_halfwidth=rng.uniform(1.0, 3.0),
                      lockout_steps=int(rng.integers(0, 3)))
        units.append(p)
        states.append(TclState.initial(p, rng.uniform(p.lower_bound, p.upper_bound),
                                       bool(rng.random() < 0.5),
                                       int(rng.integers(0, 5))))
    return Fleet.from_units(units, states, ambient_temp)


def drift_bound(fleet, step_hours):
    """Largest distance a unit can overshoot its band in one noise-free step, per unit."""
    g = np.exp(-step_hours / (fleet.thermal_resistance * fleet.thermal_capacitance))
    targets = (fleet.ambient_temp,
               fleet.ambient_temp - fleet.thermal_resistance * fleet.rated_power * fleet.cop)
    gaps = [np.abs(t - edge) for t in targets for edge in (fleet.lower_bound, fleet.upper_bound)]
    return (1 - g) * np.max(gaps, axis=0) + 1e-9


def clipped_sine(duration_seconds, *, amplitude=1.5, period_seconds=3600.0, sample_seconds=2.0):
    """Pairs ``(t, clip(amplitude * sin(2 pi t / period), -1, 1))`` covering `duration_seconds`."""
    times = np.arange(0.0, duration_seconds + sample_seconds, sample_seconds)
    values = np.clip(amplitude * np.sin(2 * np.pi * times / period_seconds), -1.0, 1.0)
    return times, values


def write_clipped_sine(path, duration_seconds, **kwargs):
    times, values = clipped_sine(duration_seconds, **kwargs)
    with open(path, mode="wt") as f:
        f.write("t,r\n")
        for t, v in zip(times, values):
            f.write(f"{t:.9g},{v:.9g}\n")
    return path
