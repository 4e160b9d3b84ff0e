"""The fleet seen as a virtual battery.

Static parameters describe the battery the whole fleet could be; dynamic limits shrink them
to the units that are currently available to the central control.

Sign convention: a positive regulation signal asks the fleet to consume more than its
baseline, which charges the battery (cools the units below their set-points).
"""

from dataclasses import dataclass

import numpy as np

from tclbattery.errors import InvalidParameterError
from tclbattery.fleet import Fleet


@dataclass(frozen=True)
class BatteryParams:
    """Static virtual-battery parameters of a fleet.

    Attributes
    ----------
    capacity : float
        Energy capacity in kWh.
    ramp_up : float
        Maximum power increase above baseline in kW.
    ramp_down : float
        Maximum power decrease below baseline in kW.
    dissipation : float
        Self-discharge rate in 1/h.
    alpha : float
        Reference rate in 1/h against which unit heterogeneity is penalized;
        equal to `dissipation`.
    """
    capacity: float
    ramp_up: float
    ramp_down: float
    dissipation: float
    alpha: float

    def __post_init__(self):
        if self.capacity < 0 or self.ramp_up < 0 or self.ramp_down < 0:
            raise InvalidParameterError(f"Battery capacity and ramp limits must be non-negative: "
                                        f"{self}.")
        if not self.dissipation > 0:
            raise InvalidParameterError(f"Dissipation must be positive, got {self.dissipation}.")


@dataclass(frozen=True)
class DynamicLimits:
    """Battery parameters restricted to the currently available units at step `step_index`."""
    capacity: float
    ramp_up: float
    ramp_down: float
    step_index: int = 0


@dataclass(frozen=True)
class SocSample:
    """State of charge in kWh at step `step_index`."""
    value: float
    step_index: int = 0


def dissipation_rate(fleet: Fleet) -> float:
    """Mean of the inverse thermal time constants, in 1/h."""
    return float(np.mean(1.0 / (fleet.thermal_resistance * fleet.thermal_capacitance)))


def capacity_contributions(fleet: Fleet, alpha: float) -> np.ndarray:
    """Energy each unit contributes to the battery capacity, in kWh.

    Unit *i* contributes :math:`(1 + |1 - a_i/\\alpha|)\\Delta_i / b_i` with
    :math:`a_i = 1/(R_iC_i)` and :math:`b_i = \\eta_i/C_i`.
    A homogeneous fleet has :math:`a_i = \\alpha` and every unit contributes :math:`\\Delta C/\\eta`.
    """
    a = 1.0 / (fleet.thermal_resistance * fleet.thermal_capacitance)
    b = fleet.cop / fleet.thermal_capacitance
    return (1.0 + np.abs(1.0 - a / alpha)) * fleet.deadband_halfwidth / b


def static_params(fleet: Fleet) -> BatteryParams:
    """Battery parameters of the whole fleet at its current ambient temperature.

    Raises
    ------
    InvalidParameterError
        If the fleet is empty.
    """
    if len(fleet) == 0:
        raise InvalidParameterError("Cannot derive battery parameters of an empty fleet.")
    d = dissipation_rate(fleet)
    p_o = fleet.steady_state_powers()
    return BatteryParams(capacity=float(capacity_contributions(fleet, d).sum()),
                         ramp_up=float((fleet.rated_power - p_o).sum()),
                         ramp_down=float(p_o.sum()),
                         dissipation=d,
                         alpha=d)


def dynamic_limits(fleet: Fleet, battery: BatteryParams, *, strict_ramp_down: bool = True,
                   step_index: int = 0) -> DynamicLimits:
    """Battery limits given the availability flags carried by the fleet.

    Each unavailable unit removes its capacity contribution and its rated power from the
    ramp-up limit (floored at 0).

    Parameters
    ----------
    fleet : Fleet
    battery : BatteryParams
        Static parameters of the same fleet.
    strict_ramp_down : bool, keyword, default=True
        If true, each unavailable unit *adds* its rated power to the ramp-down limit.
        If false, each unavailable unit removes its steady-state power from it instead
        (floored at 0).
    step_index : int, keyword, default=0

    Notes
    -----
    The strict rule is the published one. An unavailable unit that is on cannot be turned
    off, so it arguably *reduces* discharge headroom; the non-strict rule reflects that
    reading and is kept behind a flag so both can be compared on the same run.
    """
    available = fleet.available
    missing = ~available
    unavailable_power = float(fleet.rated_power[missing].sum())

    capacity = float(capacity_contributions(fleet, battery.alpha)[available].sum())
    ramp_up = max(0.0, battery.ramp_up - unavailable_power)
    if strict_ramp_down:
        ramp_down = battery.ramp_down + unavailable_power
    else:
        ramp_down = max(0.0, battery.ramp_down
                        - float(fleet.steady_state_powers()[missing].sum()))
    return DynamicLimits(capacity, ramp_up, ramp_down, step_index)


def state_of_charge(fleet: Fleet, step_index: int = 0) -> SocSample:
    """Energy stored in the fleet relative to every unit sitting at its set-point.

    :math:`x = \\sum_i (\\theta_{ref,i} - \\theta_i) C_i / \\eta_i`; positive when units are
    cooler than their set-points.
    """
    value = ((fleet.setpoint - fleet.temperature) * fleet.thermal_capacitance / fleet.cop).sum()
    return SocSample(float(value), step_index)


def ramp_feasible(r: float, limits: DynamicLimits) -> bool:
    """Whether the signed regulation request `r` lies within ``[-ramp_down, ramp_up]``."""
    return -limits.ramp_down <= r <= limits.ramp_up


def soc_feasible(x: SocSample, limits: DynamicLimits) -> bool:
    """Whether the state of charge lies within ``[-capacity, capacity]``."""
    return abs(x.value) <= limits.capacity


def battery_ode_step(x: float, power: float, dissipation: float, step_hours: float) -> float:
    """Forward-Euler step of the abstract battery :math:`\\dot x = -dx - p`.

    A negative `power` charges the battery.

    Raises
    ------
    InvalidParameterError
        If `step_hours` is not positive.
    """
    if not step_hours > 0:
        raise InvalidParameterError(f"step_hours must be positive, got {step_hours}.")
    return x + step_hours * (-dissipation * x - power)
