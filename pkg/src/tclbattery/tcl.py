"""Model of a single thermostatically controlled load (TCL).

A TCL is a cooling load (an air conditioner) whose temperature follows a first-order
difference equation and which switches on and off at the edges of a dead-band around its
set-point. Between the edges, the central control may force it on or off, provided the
short-cycling lockout has elapsed.
"""

import math
from dataclasses import dataclass, replace
from enum import Enum

from tclbattery.errors import InvalidParameterError


@dataclass(frozen=True, slots=True)
class TclParams:
    """Static thermal and electrical parameters of one TCL.

    Attributes
    ----------
    id : int
        Unique identifier of the unit, registered with the central control at enrollment.
    thermal_capacitance : float
        Thermal capacitance in kWh/°C.
    thermal_resistance : float
        Thermal resistance in °C/kW.
    rated_power : float
        Electrical power drawn while on, in kW (positive for cooling loads).
    cop : float
        Coefficient of performance (dimensionless).
    setpoint : float
        Temperature set-point in °C.
    deadband_halfwidth : float
        Half-width of the dead-band in °C; the band is ``setpoint ± deadband_halfwidth``.
    lockout_steps : int
        Minimum number of steps between transitions before a forced transition is honored.

    Raises
    ------
    InvalidParameterError
        If any physical parameter is not positive or `lockout_steps` is negative.
    """
    id: int
    thermal_capacitance: float
    thermal_resistance: float
    rated_power: float
    cop: float
    setpoint: float
    deadband_halfwidth: float
    lockout_steps: int = 0

    _POSITIVE = ("thermal_capacitance", "thermal_resistance", "rated_power",
                 "cop", "deadband_halfwidth")

    def __post_init__(self):
        for name in TclParams._POSITIVE:
            # `not x > 0` also rejects NaN
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"TCL {self.id}: {name} must be positive, "
                                            f"got {getattr(self, name)}.")
        if self.lockout_steps < 0:
            raise InvalidParameterError(f"TCL {self.id}: lockout_steps must be non-negative, "
                                        f"got {self.lockout_steps}.")

    @property
    def lower_bound(self):
        """Lower edge of the dead-band, where a running unit switches off."""
        return self.setpoint - self.deadband_halfwidth

    @property
    def upper_bound(self):
        """Upper edge of the dead-band, where an idle unit switches on."""
        return self.setpoint + self.deadband_halfwidth

    @property
    def time_constant(self):
        """Thermal time constant *RC* in hours."""
        return self.thermal_resistance * self.thermal_capacitance

    @property
    def thermal_gain(self):
        """Temperature gain *R·P·η* of the running unit in °C."""
        return self.thermal_resistance * self.rated_power * self.cop


@dataclass(frozen=True, slots=True)
class TclState:
    """Evolving state of one TCL.

    Attributes
    ----------
    temperature : float
        Indoor temperature in °C.
    on : bool
        Operational status.
    steps_since_switch : int
        Steps elapsed since the last transition (forced or natural).
    available : bool
        Whether the central control may force this unit (see :py:func:`availability`).
    switch_distance : float
        Normalized distance to the natural switching boundary (see :py:func:`switch_distance`).
    """
    temperature: float
    on: bool
    steps_since_switch: int
    available: bool = False
    switch_distance: float = 0.0

    @classmethod
    def initial(cls, params, temperature, on, steps_since_switch=None):
        """Build a consistent state with availability and distance derived from the rest.

        `steps_since_switch` defaults to one past the lockout so the unit starts controllable.
        """
        if steps_since_switch is None:
            steps_since_switch = params.lockout_steps + 1
        state = cls(temperature, bool(on), steps_since_switch,
                    switch_distance=switch_distance(temperature, on, params))
        return replace(state, available=availability(state, params))


@dataclass(frozen=True, slots=True)
class StepEnvironment:
    """Conditions a TCL sees during one step.

    Attributes
    ----------
    ambient_temp : float
        Ambient temperature in °C.
    step_hours : float
        Sampling time in hours.
    noise : float, default=0.0
        Additive temperature disturbance in °C for this step.
    """
    ambient_temp: float
    step_hours: float
    noise: float = 0.0

    def __post_init__(self):
        if not self.step_hours > 0:
            raise InvalidParameterError(f"step_hours must be positive, got {self.step_hours}.")


class TclEvent(Enum):
    """Things that can happen to a TCL during one step, as written to the diagnostics file."""
    FORCED_ON = "forced_on"
    FORCED_OFF = "forced_off"
    NATURAL_ON = "natural_on"
    NATURAL_OFF = "natural_off"
    IGNORED_LOCKOUT = "ignored_lockout"
    IGNORED_OUT_OF_BAND = "ignored_out_of_band"
    REDUNDANT = "redundant"
    DROPPED = "dropped"

    @classmethod
    def forced(cls, on):
        return cls.FORCED_ON if on else cls.FORCED_OFF

    @classmethod
    def natural(cls, on):
        return cls.NATURAL_ON if on else cls.NATURAL_OFF

    @property
    def is_transition(self):
        return self in _TRANSITIONS


_TRANSITIONS = frozenset({TclEvent.FORCED_ON, TclEvent.FORCED_OFF,
                          TclEvent.NATURAL_ON, TclEvent.NATURAL_OFF})


def decay_factor(params: TclParams, step_hours: float) -> float:
    """Fraction of the previous temperature that persists after one step.

    Returns :math:`g = e^{-h / RC}`, strictly between 0 and 1.

    Raises
    ------
    InvalidParameterError
        If `step_hours` or the time constant is not positive.
    """
    if not step_hours > 0:
        raise InvalidParameterError(f"step_hours must be positive, got {step_hours}.")
    if not params.time_constant > 0:
        raise InvalidParameterError(f"TCL {params.id}: time constant must be positive.")
    return math.exp(-step_hours / params.time_constant)


def thermal_step(state: TclState, params: TclParams, env: StepEnvironment) -> float:
    """Temperature after one step with the unit held in ``state.on``.

    :math:`\\theta' = g\\theta + (1 - g)(\\theta_a - \\delta\\theta_g) + \\epsilon`
    with :math:`\\theta_g = RP\\eta`.
    """
    g = decay_factor(params, env.step_hours)
    drive = env.ambient_temp - (params.thermal_gain if state.on else 0.0)
    return g * state.temperature + (1 - g) * drive + env.noise


def hysteresis_transition(next_temp: float, current_on: bool, params: TclParams) -> bool:
    """Natural on/off status after a step that reaches `next_temp`."""
    if next_temp > params.upper_bound:
        return True
    if next_temp < params.lower_bound:
        return False
    return current_on


def availability(state: TclState, params: TclParams) -> bool:
    """Whether the central control may force the unit.

    True exactly when the lockout has elapsed and the temperature lies in the closed dead-band.
    Reads ``steps_since_switch`` and ``temperature`` only; the stored ``available`` flag is ignored.
    """
    return (state.steps_since_switch > params.lockout_steps
            and params.lower_bound <= state.temperature <= params.upper_bound)


def switch_distance(temperature: float, on: bool, params: TclParams) -> float:
    """Distance to the boundary where the unit would switch by itself, in dead-band half-widths.

    A running unit is measured against the lower edge, an idle unit against the upper edge,
    so the value is 0 at the boundary and lies in [0, 2] inside the band.

    Notes
    -----
    Units close to their own switching boundary are about to change state anyway;
    forcing them first costs the least extra cycling, which is why the controller sorts by this value.
    """
    if on:
        return (temperature - params.lower_bound) / params.deadband_halfwidth
    return (params.upper_bound - temperature) / params.deadband_halfwidth


def _forced_outcome(state, params, forced):
    if not availability(state, params):
        if state.steps_since_switch <= params.lockout_steps:
            return TclEvent.IGNORED_LOCKOUT
        return TclEvent.IGNORED_OUT_OF_BAND
    if bool(forced) == state.on:
        return TclEvent.REDUNDANT
    return TclEvent.forced(forced)


def tcl_step(state: TclState, params: TclParams, env: StepEnvironment, forced: bool | None = None,
             *, events: list[TclEvent] | None = None) -> TclState:
    """Advance a TCL by one step, applying a forced state from the central control if allowed.

    Parameters
    ----------
    state : TclState
        State at the start of the step.
    params : TclParams
    env : StepEnvironment
    forced : bool | None, default=None
        Forced operational status received from the central control, if any.
    events : list[TclEvent] | None, keyword, default=None
        If given, every :py:class:`TclEvent` produced by this step is appended to it.

    Returns
    -------
    TclState
        State at the end of the step, with availability and switch distance recomputed.

    Notes
    -----
    The step runs in this order:

    1. A forced state is adopted only if the unit is available (lockout elapsed, inside the band);
       adoption resets the step counter.
       Otherwise the command is dropped and reported as ``IGNORED_LOCKOUT`` or
       ``IGNORED_OUT_OF_BAND``; it is never queued.
    2. The step counter is incremented.
    3. The temperature advances with the (possibly forced) status.
    4. Outside the band the hysteresis rule decides the next status; a natural transition
       resets the step counter.
    5. Availability and switch distance are recomputed from the new temperature and status.

    A forced state equal to the current status is reported as ``REDUNDANT`` and changes nothing.
    """
    on, steps = state.on, state.steps_since_switch

    if forced is not None:
        outcome = _forced_outcome(state, params, forced)
        if outcome.is_transition:
            on, steps = bool(forced), 0
        if events is not None:
            events.append(outcome)

    steps += 1
    temperature = thermal_step(replace(state, on=on), params, env)

    next_on = on
    if not params.lower_bound <= temperature <= params.upper_bound:
        next_on = hysteresis_transition(temperature, on, params)
        if next_on != on:
            steps = 0
            if events is not None:
                events.append(TclEvent.natural(next_on))

    next_state = TclState(temperature, next_on, steps,
                          switch_distance=switch_distance(temperature, next_on, params))
    return replace(next_state, available=availability(next_state, params))
