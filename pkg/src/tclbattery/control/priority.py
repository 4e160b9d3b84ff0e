"""Merit-order (priority stack) dispatch of TCLs."""

import logging
from collections.abc import Iterable
from dataclasses import dataclass

from tclbattery.battery import DynamicLimits, SocSample, ramp_feasible, soc_feasible
from tclbattery.control.abc import (Controller, DispatchCommand, DispatchResult, DispatchStatus,
                                    TclReport)
from tclbattery.errors import ProtocolError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PriorityStacks:
    """Available units split by status, each sorted by ascending (switch distance, id).

    The head of :py:attr:`off_stack` is the idle unit closest to switching on by itself,
    the head of :py:attr:`on_stack` the running unit closest to switching off.
    """
    on_stack: tuple[TclReport, ...]
    off_stack: tuple[TclReport, ...]


def _merit(report):
    return report.switch_distance, report.id


def build_stacks(reports: Iterable[TclReport]) -> PriorityStacks:
    """Sort the available units of one tick into merit order.

    Raises
    ------
    ProtocolError
        If two reports share an id or the reports come from different ticks.
    """
    seen, ticks = set(), set()
    on_stack, off_stack = [], []
    for report in reports:
        if report.id in seen:
            raise ProtocolError(f"Duplicate report from TCL {report.id}.")
        seen.add(report.id)
        ticks.add(report.tick)
        if report.available:
            (on_stack if report.on else off_stack).append(report)
    if len(ticks) > 1:
        raise ProtocolError(f"Reports from several ticks mixed together: {sorted(ticks)}.")
    return PriorityStacks(tuple(sorted(on_stack, key=_merit)),
                          tuple(sorted(off_stack, key=_merit)))


def dispatch(r: float, psi: float, stacks: PriorityStacks, limits: DynamicLimits, soc: SocSample,
             *, soc_gate: bool = True) -> DispatchResult:
    """Force units in merit order until the deviation is as close to the signal as it gets.

    With :math:`\\xi = r - \\psi`, idle units are switched on when :math:`\\xi > 0` and running
    units switched off when :math:`\\xi < 0`. Units are taken from the head of the stack
    for as long as each one strictly reduces the remaining request :math:`|\\xi - \\text{dispatched}|`.

    Parameters
    ----------
    r, psi : float
        Regulation signal and current deviation from baseline, in kW.
    stacks : PriorityStacks
    limits : :py:class:`~tclbattery.battery.DynamicLimits`
    soc : :py:class:`~tclbattery.battery.SocSample`
    soc_gate : bool, keyword, default=True
        Refuse to dispatch while the state of charge is outside the dynamic capacity.

    Returns
    -------
    DispatchResult
        No commands and an infeasible status if `r` breaks the ramp limits or (with
        `soc_gate`) the state of charge breaks the capacity limit.

    Notes
    -----
    Stopping at the first unit that does not help keeps the merit order intact: every
    commanded unit is ahead of every uncommanded unit of the same stack, even when a
    smaller unit further down would have fit the remainder.
    """
    xi = r - psi
    if not ramp_feasible(r, limits):
        logger.debug("Tick %d: r=%.3f outside [-%.3f, %.3f].",
                     limits.step_index, r, limits.ramp_down, limits.ramp_up)
        return DispatchResult((), DispatchStatus.INFEASIBLE_RAMP, xi)
    if soc_gate and not soc_feasible(soc, limits):
        logger.debug("Tick %d: x=%.3f outside ±%.3f.", limits.step_index, soc.value, limits.capacity)
        return DispatchResult((), DispatchStatus.INFEASIBLE_SOC, xi)
    if xi == 0:
        return DispatchResult((), DispatchStatus.TRACKED, 0.0)

    stack, forced = (stacks.off_stack, True) if xi > 0 else (stacks.on_stack, False)
    sign = 1.0 if forced else -1.0

    residual, commands = xi, []
    for report in stack:
        remaining = residual - sign * report.rated_power
        if abs(remaining) >= abs(residual):
            break
        commands.append(DispatchCommand(report.id, forced))
        residual = remaining
    return DispatchResult(tuple(commands), DispatchStatus.TRACKED, residual)


class PriorityStackController(Controller):
    """Controller that forces units closest to their own switching boundary first."""

    def __init__(self, *, soc_gate: bool = True):
        self.soc_gate = soc_gate

    def __repr__(self):
        return f"{type(self).__name__}(soc_gate={self.soc_gate})"

    def dispatch(self, r: float, psi: float, stacks: PriorityStacks, limits: DynamicLimits,
                 soc: SocSample) -> DispatchResult:
        return dispatch(r, psi, stacks, limits, soc, soc_gate=self.soc_gate)


class NullController(Controller):
    """Controller that never issues commands; the fleet runs on its thermostats alone."""

    def __repr__(self):
        return f"{type(self).__name__}()"

    def dispatch(self, r: float, psi: float, stacks: PriorityStacks, limits: DynamicLimits,
                 soc: SocSample) -> DispatchResult:
        return DispatchResult((), DispatchStatus.UNCONTROLLED, r - psi)
