"""Closed-loop simulation of a TCL fleet tracking a regulation signal.

Every tick runs the same exchange between the units and the central control:

1. The committed state of every unit is reported (status, availability, switch distance).
2. The central control updates the battery limits, checks feasibility and dispatches.
3. Commands travel through a channel and are adopted by the units that may accept them.
4. Every unit advances one step and the committed fleet's deviation and state of charge
   are recorded.
"""

import logging
import math
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from tclbattery.battery import (battery_ode_step, dynamic_limits, state_of_charge,
                                static_params)
from tclbattery.control import (Controller, DispatchCommand, PriorityStackController, TclReport,
                                build_stacks)
from tclbattery.errors import ConfigError, InvalidParameterError, SignalError
from tclbattery.fleet import (Fleet, PopulationSpec, advance, apply_commands, power_deviation,
                              sample_fleet)
from tclbattery.signal import RegulationSignal, resample
from tclbattery.tcl import TclEvent

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimConfig:
    """Settings of one simulation run.

    Attributes
    ----------
    step_seconds : float, default=10.02
    horizon_steps : int, default=1000
    ambient_profile : float | tuple[float, ...], default=32.0
        Constant ambient temperature in °C, or one value per tick.
    noise_stddev : float, default=0.0
        Standard deviation of the per-unit, per-tick temperature disturbance in °C.
    seed : int, default=0
        Seed of the disturbance stream.
    soc_gate_enabled : bool, default=True
    strict_eq8 : bool, default=True
        Passed as ``strict_ramp_down`` to :py:func:`tclbattery.battery.dynamic_limits`:
        unavailable units add their rated power to the ramp-down limit.
    lockout_seconds : float, default=6.0
        Short-cycling lockout; converted to whole steps by :py:attr:`lockout_steps`.
    workers : int, default=1
        Threads used to advance the fleet. The output does not depend on this value.
    report_interval_steps : int, default=100
        Log a progress line every this many ticks (0 disables).

    Raises
    ------
    InvalidParameterError
        If a value is out of range or an ambient profile is shorter than the horizon.
    """
    step_seconds: float = 10.02
    horizon_steps: int = 1000
    ambient_profile: float | tuple = 32.0
    noise_stddev: float = 0.0
    seed: int = 0
    soc_gate_enabled: bool = True
    strict_eq8: bool = True
    lockout_seconds: float = 6.0
    workers: int = 1
    report_interval_steps: int = 100

    def __post_init__(self):
        if not self.step_seconds > 0:
            raise InvalidParameterError(f"step_seconds must be positive, got {self.step_seconds}.")
        if self.horizon_steps < 1:
            raise InvalidParameterError(f"horizon_steps must be at least 1, "
                                        f"got {self.horizon_steps}.")
        if self.noise_stddev < 0 or self.lockout_seconds < 0 or self.seed < 0:
            raise InvalidParameterError("noise_stddev, lockout_seconds and seed "
                                        "must be non-negative.")
        if self.workers < 1:
            raise InvalidParameterError(f"workers must be at least 1, got {self.workers}.")
        if not isinstance(self.ambient_profile, (int, float)):
            profile = tuple(float(t) for t in self.ambient_profile)
            if len(profile) < self.horizon_steps:
                raise InvalidParameterError(f"Ambient profile has {len(profile)} values "
                                            f"for {self.horizon_steps} ticks.")
            object.__setattr__(self, "ambient_profile", profile)

    @property
    def step_hours(self):
        return self.step_seconds / 3600

    @property
    def lockout_steps(self):
        """Lockout in whole steps, rounded up."""
        # rounding first keeps 20.04 s / 10.02 s at exactly 2 steps
        return math.ceil(round(self.lockout_seconds / self.step_seconds, 9))

    def ambient_at(self, k):
        if isinstance(self.ambient_profile, tuple):
            return self.ambient_profile[k]
        return float(self.ambient_profile)


class TraceRow(NamedTuple):
    """One tick of a run; see :py:data:`TRACE_COLUMNS` for the file layout.

    ``capacity``, ``ramp_up``, ``ramp_down`` and ``n_available`` describe the fleet as it
    entered the tick and the dispatch saw it. ``psi``, ``error``, ``x`` and ``n_on`` describe
    the fleet committed at the end of the tick, after the thermostats have acted.
    ``x_ode`` is the abstract battery driven by the deviations of all earlier ticks.
    ``psi_applied`` is the deviation with the delivered commands adopted, before the
    thermal update; the two deviations differ by the natural switches of the tick.
    """
    k: int
    t_seconds: float
    r: float
    psi: float
    error: float
    x: float
    capacity: float
    ramp_up: float
    ramp_down: float
    n_available: int
    n_on: int
    dispatch_status: str
    n_commands: int
    x_ode: float
    psi_applied: float


TRACE_COLUMNS = TraceRow._fields


class Diagnostic(NamedTuple):
    tick: int
    id: int
    event: TclEvent


class UnitRow(NamedTuple):
    """Temperature at the start of tick `k` and the status in force during it.

    ``event`` names the transition that produced this status, if it changed at this tick.
    """
    k: int
    t_seconds: float
    id: int
    temperature: float
    on: bool
    event: str


@dataclass
class SimTrace:
    rows: list[TraceRow] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)
    unit_rows: list[UnitRow] = field(default_factory=list)
    final_fleet: Fleet | None = None

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        return [getattr(row, name) for row in self.rows]


class StepOutcome(NamedTuple):
    fleet: Fleet
    row: TraceRow
    diagnostics: list[Diagnostic]
    applied: Fleet
    x_ode: float


type Channel = Callable[[int, tuple[DispatchCommand, ...]], Sequence[DispatchCommand]]


def ideal_channel(tick: int, commands: tuple[DispatchCommand, ...]) -> tuple[DispatchCommand, ...]:
    """Deliver every command at once."""
    return commands


class DroppingChannel:
    """Channel that loses each command independently with probability `drop_rate`.

    Losses are drawn from a stream keyed by (`seed`, tick), so they do not depend on how
    many commands earlier ticks carried.
    """

    def __init__(self, drop_rate: float, seed: int = 0):
        if not 0 <= drop_rate <= 1:
            raise ValueError(f"drop_rate must lie in [0, 1], got {drop_rate}.")
        self.drop_rate, self.seed = drop_rate, seed

    def __repr__(self):
        return f"{type(self).__name__}({self.drop_rate}, seed={self.seed})"

    def __call__(self, tick: int,
                 commands: tuple[DispatchCommand, ...]) -> tuple[DispatchCommand, ...]:
        if not commands:
            return commands
        kept = np.random.default_rng([self.seed, tick]).random(len(commands)) >= self.drop_rate
        return tuple(c for c, keep in zip(commands, kept) if keep)


def collect_reports(fleet: Fleet, tick: int) -> list[TclReport]:
    """One report per unit from the fleet's committed state."""
    return [TclReport(*row, tick) for row in zip(fleet.ids.tolist(),
                                                 fleet.on.tolist(),
                                                 fleet.available.tolist(),
                                                 fleet.switch_distance.tolist(),
                                                 fleet.rated_power.tolist())]


class Simulator:
    """Runs the report/dispatch/step loop for one configuration.

    Parameters
    ----------
    config : SimConfig
    controller : :py:class:`~tclbattery.control.abc.Controller` | None, default=None
        Defaults to a :py:class:`~tclbattery.control.priority.PriorityStackController`
        honoring ``config.soc_gate_enabled``.
    channel : Callable[[int, tuple], Iterable] | None, default=None
        Called with the tick and the dispatched commands; returns the commands delivered.
        Defaults to :py:func:`ideal_channel`.
    track : Iterable[int], keyword, default=()
        Ids of units whose temperature and status are recorded every tick.

    Notes
    -----
    With ``config.workers > 1`` the advance phase is split into contiguous chunks on a thread
    pool. Decay factors are computed once for the whole fleet before splitting and every other
    operation is element-wise, so chunking cannot change a single bit of the result.
    Use the simulator as a context manager (or call :py:meth:`close`) to release the pool.
    """

    def __init__(self, config: SimConfig, controller: Controller | None = None,
                 channel: Channel | None = None, *, track: Iterable[int] = ()):
        self.config = config
        self.controller = controller or PriorityStackController(soc_gate=config.soc_gate_enabled)
        self.channel = channel or ideal_channel
        self.track = tuple(sorted(set(track)))
        self._pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None

    def __repr__(self):
        return f"{type(self).__name__}({self.config}, {self.controller!r})"

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def _noise(self, k, n):
        if self.config.noise_stddev == 0:
            return None
        # keyed by (seed, tick): independent of worker count and of earlier ticks
        rng = np.random.default_rng([self.config.seed, k])
        return rng.normal(0.0, self.config.noise_stddev, n)

    def _advance(self, fleet, noise):
        step_hours = self.config.step_hours
        if self._pool is None or len(fleet) < 2:
            return advance(fleet, step_hours, noise)

        decay = np.exp(-step_hours / (fleet.thermal_resistance * fleet.thermal_capacitance))

        def advance_chunk(index):
            return advance(fleet.take(index), step_hours,
                           None if noise is None else noise[index], decay=decay[index])

        chunks = [c for c in np.array_split(np.arange(len(fleet)), self.config.workers) if len(c)]
        results = list(self._pool.map(advance_chunk, chunks))
        return (Fleet.concat(f for f, _ in results),
                [event for _, events in results for event in events])

    def step(self, fleet: Fleet, k: int, r: float, x_ode: float = 0.0) -> StepOutcome:
        """Run tick `k` of the loop with regulation request `r`.

        Parameters
        ----------
        fleet : Fleet
            Committed state entering the tick.
        k : int
        r : float
        x_ode : float, default=0.0
            Abstract battery state entering the tick.

        Returns
        -------
        StepOutcome
            The committed fleet after the tick, its trace row, the diagnostics of the tick,
            the fleet with commands adopted (whose power is the row's ``psi_applied``), and the
            abstract battery state entering the next tick.

        Raises
        ------
        ProtocolError
            If the reports or delivered commands are inconsistent.
        """
        cfg = self.config
        fleet = fleet.with_ambient(cfg.ambient_at(k))

        battery = static_params(fleet)
        limits = dynamic_limits(fleet, battery, strict_ramp_down=cfg.strict_eq8,
                                step_index=k)
        soc = state_of_charge(fleet, k)
        stacks = build_stacks(collect_reports(fleet, k))
        result = self.controller.dispatch(r, power_deviation(fleet), stacks, limits, soc)

        delivered = tuple(self.channel(k, result.commands))
        delivered_ids = {unit_id for unit_id, _ in delivered}
        diagnostics = [Diagnostic(k, c.id, TclEvent.DROPPED)
                       for c in result.commands if c.id not in delivered_ids]

        applied, command_events = apply_commands(fleet, delivered)
        diagnostics.extend(Diagnostic(k, unit_id, event) for unit_id, event in command_events)
        for d in diagnostics:
            if not d.event.is_transition:
                logger.debug("Tick %d: command to TCL %d %s.", k, d.id, d.event.value)

        committed, natural_events = self._advance(applied, self._noise(k, len(fleet)))
        diagnostics.extend(Diagnostic(k, unit_id, event) for unit_id, event in natural_events)
        psi = power_deviation(committed)

        row = TraceRow(k=k,
                       t_seconds=k * cfg.step_seconds,
                       r=r,
                       psi=psi,
                       error=psi - r,
                       x=state_of_charge(committed, k).value,
                       capacity=limits.capacity,
                       ramp_up=limits.ramp_up,
                       ramp_down=limits.ramp_down,
                       n_available=int(fleet.available.sum()),
                       n_on=int(committed.on.sum()),
                       dispatch_status=result.status.value,
                       n_commands=len(result.commands),
                       x_ode=x_ode,
                       psi_applied=power_deviation(applied))
        x_next = battery_ode_step(x_ode, -psi, battery.dissipation, cfg.step_hours)
        return StepOutcome(committed, row, diagnostics, applied, x_next)

    def _unit_rows(self, start, outcome, pending):
        k = outcome.row.k
        forced = {d.id: d.event for d in outcome.diagnostics
                  if d.event in (TclEvent.FORCED_ON, TclEvent.FORCED_OFF)}
        rows = []
        for unit_id in self.track:
            i = start.index_of(unit_id)
            event = forced.get(unit_id) or pending.get(unit_id)
            rows.append(UnitRow(k, outcome.row.t_seconds, unit_id,
                                float(start.temperature[i]), bool(outcome.applied.on[i]),
                                event.value if event else ""))
        return rows

    def run(self, fleet: Fleet, signal_values: Sequence[float]) -> SimTrace:
        """Run the full horizon from `fleet` following one regulation value per tick.

        Raises
        ------
        ConfigError
            If fewer signal values than ticks are given.
        """
        horizon = self.config.horizon_steps
        if len(signal_values) < horizon:
            raise ConfigError("horizon_steps", f"signal has {len(signal_values)} values "
                                               f"for {horizon} ticks")

        trace, x_ode, pending = SimTrace(), 0.0, {}
        interval = self.config.report_interval_steps
        for k in range(horizon):
            outcome = self.step(fleet, k, float(signal_values[k]), x_ode)
            if self.track:
                trace.unit_rows.extend(self._unit_rows(fleet, outcome, pending))
                pending = {d.id: d.event for d in outcome.diagnostics
                           if d.event in (TclEvent.NATURAL_ON, TclEvent.NATURAL_OFF)}
            trace.rows.append(outcome.row)
            trace.diagnostics.extend(outcome.diagnostics)
            fleet, x_ode = outcome.fleet, outcome.x_ode

            row = outcome.row
            if interval and k % interval == 0:
                logger.info("k=%d r=%.3f psi=%.3f C'=%.3f R'+=%.3f R'-=%.3f %s",
                            k, row.r, row.psi, row.capacity, row.ramp_up, row.ramp_down,
                            row.dispatch_status)

        trace.final_fleet = fleet
        return trace


def prepare_fleet(config: SimConfig, spec: PopulationSpec) -> Fleet:
    """Sample the fleet of `spec` with the lockout and starting ambient of `config`."""
    base = replace(spec.base_params, lockout_steps=config.lockout_steps)
    return sample_fleet(replace(spec, base_params=base, ambient_temp=config.ambient_at(0)))


def run(config: SimConfig, spec: PopulationSpec, signal: RegulationSignal, *,
        controller: Controller | None = None, channel: Channel | None = None,
        track: Iterable[int] = ()) -> SimTrace:
    """Sample a fleet, align `signal` with the grid, and run the whole horizon.

    `signal` is used as given; scale it with
    :py:func:`tclbattery.signal.normalize_and_scale` first if it is normalized.

    Raises
    ------
    ConfigError
        If the signal ends before the last tick.
    """
    fleet = prepare_fleet(config, spec)
    try:
        values = resample(signal, config.step_seconds, config.horizon_steps)
    except SignalError as err:
        raise ConfigError("horizon_steps", str(err)) from None
    with Simulator(config, controller, channel, track=track) as simulator:
        return simulator.run(fleet, values)
