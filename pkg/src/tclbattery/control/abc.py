from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, NamedTuple

from tclbattery.battery import DynamicLimits, SocSample

if TYPE_CHECKING:
    from tclbattery.control.priority import PriorityStacks


class TclReport(NamedTuple):
    """What one TCL tells the central control at the start of a tick.

    ``rated_power`` is not measured: it comes from the registry the unit enrolled with.
    ``tick`` is the index of the tick the report was collected for.
    """
    id: int
    on: bool
    available: bool
    switch_distance: float
    rated_power: float
    tick: int = 0


class DispatchCommand(NamedTuple):
    """Forced operational status sent to one TCL."""
    id: int
    forced_state: bool


class DispatchStatus(Enum):
    """Outcome of one dispatch decision.

    Only :py:attr:`DispatchStatus.TRACKED` is truthy, so callers can write
    ``if result.status:`` to ask whether the controller attempted to track the signal.

    An infeasible tick is a normal part of a run (the signal asked for more than the fleet
    could give) and shows up in the trace, so it is a status and not an exception.

    Notes
    -----
    ``TRACKED`` means the feasibility gates passed and the merit order was worked through;
    it does not promise a small residual. If a stack runs out of units, the remaining
    request is left in :py:attr:`DispatchResult.residual`.

    ``UNCONTROLLED`` is reported by controllers that never issue commands
    (see :py:class:`~tclbattery.control.priority.NullController`).
    """
    TRACKED = "tracked"
    INFEASIBLE_RAMP = "infeasible_ramp"
    INFEASIBLE_SOC = "infeasible_soc"
    UNCONTROLLED = "uncontrolled"

    def __bool__(self):
        return self is DispatchStatus.TRACKED


@dataclass(frozen=True)
class DispatchResult:
    """Commands issued in one tick and the request they leave unmet.

    Attributes
    ----------
    commands : tuple[DispatchCommand, ...]
    status : DispatchStatus
    residual : float
        Requested power change (signal minus deviation) minus the change the commands
        produce, in kW.
    """
    commands: tuple[DispatchCommand, ...]
    status: DispatchStatus
    residual: float


class Controller(ABC):
    """Central control deciding which TCLs to force each tick."""

    @abstractmethod
    def dispatch(self, r: float, psi: float, stacks: "PriorityStacks", limits: DynamicLimits,
                 soc: SocSample) -> DispatchResult:
        """Decide the forced states for one tick.

        Parameters
        ----------
        r : float
            Regulation signal in kW (signed deviation from baseline).
        psi : float
            Current deviation of the fleet from its baseline in kW.
        stacks : :py:class:`~tclbattery.control.priority.PriorityStacks`
            Merit-ordered available units built from this tick's reports.
        limits : :py:class:`~tclbattery.battery.DynamicLimits`
        soc : :py:class:`~tclbattery.battery.SocSample`

        Returns
        -------
        DispatchResult
        """
