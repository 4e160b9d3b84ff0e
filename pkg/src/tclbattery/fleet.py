"""Populations of TCLs and their aggregate power.

The fleet keeps its parameters and states as parallel numpy arrays so the whole population
can be stepped at once; :py:attr:`Fleet.params` and :py:attr:`Fleet.states` expose the same
data as per-unit :py:class:`~tclbattery.tcl.TclParams` and :py:class:`~tclbattery.tcl.TclState`.
"""

import logging
from collections.abc import Iterable
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from functools import cached_property

import numpy as np
import pandas as pd

from tclbattery.errors import InvalidParameterError, ProtocolError
from tclbattery.tcl import TclEvent, TclParams, TclState

logger = logging.getLogger(__name__)


class InitMode(Enum):
    """How initial temperatures are chosen when sampling a fleet."""
    SETPOINT = "setpoint"
    UNIFORM = "uniform-in-band"


@dataclass(frozen=True)
class PopulationSpec:
    """Recipe for sampling a heterogeneous fleet.

    Attributes
    ----------
    count : int
        Number of TCLs.
    base_params : TclParams
        Template every sampled unit deviates from; its ``id`` is ignored.
    heterogeneity : float, default=0.0
        Maximum relative deviation of sampled parameters from the template, in [0, 1).
    seed : int, default=0
    init_mode : InitMode, default=InitMode.SETPOINT
    ambient_temp : float, default=32.0
        Ambient temperature in °C at the start; sets the initial duty cycle.
    sample_all_params : bool, default=False
        Also sample set-point, dead-band and coefficient of performance
        (by default only capacitance, resistance and rated power vary).

    Raises
    ------
    InvalidParameterError
        If `count` is less than 1 or `heterogeneity` is outside [0, 1).
    """
    count: int
    base_params: TclParams
    heterogeneity: float = 0.0
    seed: int = 0
    init_mode: InitMode = InitMode.SETPOINT
    ambient_temp: float = 32.0
    sample_all_params: bool = False

    def __post_init__(self):
        if self.count < 1:
            raise InvalidParameterError(f"count must be at least 1, got {self.count}.")
        if not 0 <= self.heterogeneity < 1:
            raise InvalidParameterError(f"heterogeneity must lie in [0, 1), "
                                        f"got {self.heterogeneity}.")


_PARAM_FIELDS = ("thermal_capacitance", "thermal_resistance", "rated_power",
                 "cop", "setpoint", "deadband_halfwidth", "lockout_steps")
_STATE_FIELDS = ("temperature", "on", "steps_since_switch", "available", "switch_distance")


@dataclass(frozen=True, eq=False)
class Fleet:
    """A population of TCLs sharing one ambient temperature.

    Every array has one entry per unit, aligned with :py:attr:`ids`.
    Instances are treated as values: operations return new fleets and never write into
    the arrays of an existing one.

    Notes
    -----
    The array names match the :py:class:`~tclbattery.tcl.TclParams` and
    :py:class:`~tclbattery.tcl.TclState` field names so conversion in both directions is
    a loop over field names rather than a hand-maintained mapping.
    """
    ids: np.ndarray
    thermal_capacitance: np.ndarray
    thermal_resistance: np.ndarray
    rated_power: np.ndarray
    cop: np.ndarray
    setpoint: np.ndarray
    deadband_halfwidth: np.ndarray
    lockout_steps: np.ndarray
    temperature: np.ndarray
    on: np.ndarray
    steps_since_switch: np.ndarray
    available: np.ndarray
    switch_distance: np.ndarray
    ambient_temp: float = field(default=32.0)

    @classmethod
    def from_units(cls, params, states, ambient_temp):
        """Assemble a fleet from per-unit parameters and states.

        Raises
        ------
        ValueError
            If `params` and `states` differ in length.
        ProtocolError
            If two units share an id.
        """
        params, states = list(params), list(states)
        if len(params) != len(states):
            raise ValueError(f"{len(params)} parameter sets but {len(states)} states.")
        arrays = {"ids": np.array([p.id for p in params], dtype=np.int64)}
        for name in _PARAM_FIELDS:
            arrays[name] = np.array([getattr(p, name) for p in params],
                                    dtype=np.int64 if name == "lockout_steps" else float)
        for name in _STATE_FIELDS:
            dtype = {"on": bool, "available": bool, "steps_since_switch": np.int64}.get(name, float)
            arrays[name] = np.array([getattr(s, name) for s in states], dtype=dtype)
        fleet = cls(**arrays, ambient_temp=float(ambient_temp))
        if len(fleet.index) != len(fleet):
            raise ProtocolError("Fleet contains duplicate TCL ids.")
        return fleet

    def __len__(self):
        return len(self.ids)

    def __repr__(self):
        return f"{type(self).__name__}(<{len(self)} TCLs>, ambient_temp={self.ambient_temp})"

    @property
    def params(self):
        """List of :py:class:`~tclbattery.tcl.TclParams`, one per unit."""
        columns = [self.ids.tolist()] + [getattr(self, name).tolist() for name in _PARAM_FIELDS]
        return [TclParams(*row) for row in zip(*columns)]

    @property
    def states(self):
        """List of :py:class:`~tclbattery.tcl.TclState`, one per unit."""
        columns = [getattr(self, name).tolist() for name in _STATE_FIELDS]
        return [TclState(*row) for row in zip(*columns)]

    @cached_property
    def index(self):
        """Mapping from TCL id to array position."""
        return {unit_id: i for i, unit_id in enumerate(self.ids.tolist())}

    def index_of(self, unit_id):
        try:
            return self.index[unit_id]
        except KeyError:
            raise ProtocolError(f"No TCL with id {unit_id} in the fleet.") from None

    @property
    def lower_bound(self):
        return self.setpoint - self.deadband_halfwidth

    @property
    def upper_bound(self):
        return self.setpoint + self.deadband_halfwidth

    def availability(self, temperature=None, steps_since_switch=None):
        """Vectorized :py:func:`tclbattery.tcl.availability`, by default on the current state."""
        temperature = self.temperature if temperature is None else temperature
        steps = self.steps_since_switch if steps_since_switch is None else steps_since_switch
        return ((steps > self.lockout_steps)
                & (self.lower_bound <= temperature) & (temperature <= self.upper_bound))

    def distances(self, temperature, on):
        """Vectorized :py:func:`tclbattery.tcl.switch_distance`."""
        gap = np.where(on, temperature - self.lower_bound, self.upper_bound - temperature)
        return gap / self.deadband_halfwidth

    def steady_state_powers(self, ambient_temp=None):
        """Vectorized :py:func:`steady_state_power` for every unit."""
        ambient = self.ambient_temp if ambient_temp is None else ambient_temp
        raw = (ambient - self.setpoint) / (self.cop * self.thermal_resistance)
        return np.clip(raw, 0.0, self.rated_power)

    def with_ambient(self, ambient_temp):
        if ambient_temp == self.ambient_temp:
            return self
        return replace(self, ambient_temp=float(ambient_temp))

    def take(self, indices):
        """Sub-fleet of the units at the given array positions, in that order."""
        return replace(self, **{f.name: getattr(self, f.name)[indices]
                                for f in fields(self) if f.name != "ambient_temp"})

    @classmethod
    def concat(cls, fleets):
        """Join fleets end to end; the first fleet's ambient temperature is kept."""
        fleets = list(fleets)
        arrays = {f.name: np.concatenate([getattr(fl, f.name) for fl in fleets])
                  for f in fields(cls) if f.name != "ambient_temp"}
        return cls(**arrays, ambient_temp=fleets[0].ambient_temp)

    def with_units(self, params, states):
        """Enroll additional units.

        Raises
        ------
        ProtocolError
            If an enrolled id is already in the fleet.
        """
        joined = Fleet.concat([self, Fleet.from_units(params, states, self.ambient_temp)])
        if len(joined.index) != len(joined):
            raise ProtocolError("Enrolled TCL ids collide with the fleet.")
        return joined

    def without_units(self, ids):
        """Remove the units with the given ids."""
        drop = [self.index_of(unit_id) for unit_id in ids]
        keep = np.ones(len(self), dtype=bool)
        keep[drop] = False
        return self.take(np.flatnonzero(keep))


def _draw(rng, value, heterogeneity, n):
    # ±heterogeneity is the ±3σ band; tails are truncated onto it
    sample = rng.normal(value, value * heterogeneity / 3, n)
    return np.clip(sample, value * (1 - heterogeneity), value * (1 + heterogeneity))


def sample_fleet(spec: PopulationSpec) -> Fleet:
    """Sample a heterogeneous fleet from a population spec.

    Capacitance, resistance and rated power of every unit are drawn independently from
    normal distributions centered on the template with the ±`heterogeneity` band as ±3σ,
    then truncated onto that band. Other parameters stay at the template unless
    ``spec.sample_all_params`` is set.

    Initial temperatures follow ``spec.init_mode``; each unit starts on with probability
    equal to its steady duty cycle so the fleet starts close to its baseline power.
    All units start with their lockout elapsed.

    The result is a pure function of `spec`.
    """
    base, h, n = spec.base_params, spec.heterogeneity, spec.count
    rng = np.random.default_rng(spec.seed)

    arrays = {
        "ids": np.arange(n, dtype=np.int64),
        "thermal_capacitance": _draw(rng, base.thermal_capacitance, h, n),
        "thermal_resistance": _draw(rng, base.thermal_resistance, h, n),
        "rated_power": _draw(rng, base.rated_power, h, n),
    }
    for name in ("cop", "setpoint", "deadband_halfwidth"):
        value = getattr(base, name)
        arrays[name] = _draw(rng, value, h, n) if spec.sample_all_params else np.full(n, value)
    lockout = np.full(n, base.lockout_steps, dtype=np.int64)

    lower = arrays["setpoint"] - arrays["deadband_halfwidth"]
    upper = arrays["setpoint"] + arrays["deadband_halfwidth"]
    match spec.init_mode:
        case InitMode.SETPOINT:
            temperature = arrays["setpoint"].copy()
        case InitMode.UNIFORM:
            temperature = rng.uniform(lower, upper)

    duty = np.clip((spec.ambient_temp - arrays["setpoint"])
                   / (arrays["cop"] * arrays["thermal_resistance"]),
                   0.0, arrays["rated_power"]) / arrays["rated_power"]
    on = rng.random(n) < duty

    fleet = Fleet(**arrays,
                  lockout_steps=lockout,
                  temperature=temperature,
                  on=on,
                  steps_since_switch=lockout + 1,
                  available=np.zeros(n, dtype=bool),
                  switch_distance=np.zeros(n),
                  ambient_temp=float(spec.ambient_temp))
    fleet = replace(fleet,
                    available=fleet.availability(),
                    switch_distance=fleet.distances(temperature, on))
    logger.info("Sampled %d TCLs (heterogeneity %.2f, seed %d); %d start on.",
                n, h, spec.seed, int(on.sum()))
    return fleet


def steady_state_power(params: TclParams, ambient: float) -> float:
    """Average power the unit draws when held at its set-point, clamped to [0, rated power].

    :math:`P_o = (\\theta_a - \\theta_{ref}) / (\\eta R)`
    """
    raw = (ambient - params.setpoint) / (params.cop * params.thermal_resistance)
    return min(max(raw, 0.0), params.rated_power)


def baseline_power(fleet: Fleet) -> float:
    """Sum of steady-state powers over the fleet at its current ambient temperature."""
    return float(fleet.steady_state_powers().sum())


def aggregate_power(fleet: Fleet) -> float:
    """Sum of rated powers of the units that are on."""
    return float(fleet.rated_power[fleet.on].sum())


def power_deviation(fleet: Fleet) -> float:
    """Aggregate power minus baseline power."""
    return aggregate_power(fleet) - baseline_power(fleet)


def apply_commands(fleet: Fleet,
                   commands: Iterable[tuple[int, bool]]) -> tuple[Fleet, list[tuple[int, TclEvent]]]:
    """Deliver forced states to the fleet.

    A command is honored only by a unit that is available (lockout elapsed, inside the band)
    and currently in the other state; the rules match :py:func:`tclbattery.tcl.tcl_step`.

    Parameters
    ----------
    fleet : Fleet
    commands : Iterable[tuple[int, bool]]
        Pairs of TCL id and forced status.

    Returns
    -------
    (Fleet, list[tuple[int, TclEvent]])
        The fleet with forced states adopted, and one event per command.
        Availability and switch distance are refreshed by :py:func:`advance`, not here.

    Raises
    ------
    ProtocolError
        If a command names an unknown id or two commands name the same id.
    """
    on = fleet.on.copy()
    steps = fleet.steps_since_switch.copy()
    available = fleet.availability()
    events, seen = [], set()

    for unit_id, forced in commands:
        if unit_id in seen:
            raise ProtocolError(f"Two commands for TCL {unit_id} in one step.")
        seen.add(unit_id)
        i, forced = fleet.index_of(unit_id), bool(forced)
        if not available[i]:
            locked = fleet.steps_since_switch[i] <= fleet.lockout_steps[i]
            event = TclEvent.IGNORED_LOCKOUT if locked else TclEvent.IGNORED_OUT_OF_BAND
        elif forced == on[i]:
            event = TclEvent.REDUNDANT
        else:
            on[i], steps[i] = forced, 0
            event = TclEvent.forced(forced)
        events.append((unit_id, event))

    return replace(fleet, on=on, steps_since_switch=steps), events


def advance(fleet: Fleet, step_hours: float, noise: np.ndarray | None = None, *,
            decay: np.ndarray | None = None) -> tuple[Fleet, list[tuple[int, TclEvent]]]:
    """Advance every unit by one step: temperature, hysteresis, availability, distance.

    Parameters
    ----------
    fleet : Fleet
        Fleet with any forced states already adopted (see :py:func:`apply_commands`).
    step_hours : float
    noise : np.ndarray | None, default=None
        Per-unit temperature disturbance in °C.
    decay : np.ndarray | None, keyword, default=None
        Precomputed per-unit decay factors :math:`e^{-h/(RC)}`; computed here if omitted.

    Returns
    -------
    (Fleet, list[tuple[int, TclEvent]])
        The advanced fleet and one natural-transition event per unit that switched.

    Raises
    ------
    InvalidParameterError
        If `step_hours` is not positive.
    """
    if not step_hours > 0:
        raise InvalidParameterError(f"step_hours must be positive, got {step_hours}.")

    if decay is None:
        decay = np.exp(-step_hours / (fleet.thermal_resistance * fleet.thermal_capacitance))
    g = decay
    gain = fleet.thermal_resistance * fleet.rated_power * fleet.cop
    drive = fleet.ambient_temp - np.where(fleet.on, gain, 0.0)
    temperature = g * fleet.temperature + (1 - g) * drive
    if noise is not None:
        temperature = temperature + noise

    upper, lower = fleet.upper_bound, fleet.lower_bound
    next_on = np.where(temperature > upper, True,
                       np.where(temperature < lower, False, fleet.on))
    switched = next_on != fleet.on
    steps = np.where(switched, 0, fleet.steps_since_switch + 1)

    events = [(int(fleet.ids[i]), TclEvent.natural(bool(next_on[i])))
              for i in np.flatnonzero(switched)]
    advanced = replace(fleet,
                       temperature=temperature,
                       on=next_on,
                       steps_since_switch=steps,
                       available=fleet.availability(temperature, steps),
                       switch_distance=fleet.distances(temperature, next_on))
    return advanced, events


def snapshot_frame(fleet):
    """One row per unit with its parameters and state, for debugging and fixtures."""
    frame = pd.DataFrame({"id": fleet.ids})
    for name in _PARAM_FIELDS + _STATE_FIELDS:
        column = getattr(fleet, name)
        frame[name] = column.astype(np.int64) if column.dtype == bool else column
    return frame


def write_snapshot(fleet, path):
    snapshot_frame(fleet).to_csv(path, index=False, float_format="%.9g")
