"""Exceptions raised on misuse of the simulator.

Outcomes that are part of a normal run (infeasible ticks, ignored commands) are reported as enum
members instead; see :py:class:`tclbattery.control.abc.DispatchStatus`
and :py:class:`tclbattery.tcl.TclEvent`.
"""


class InvalidParameterError(ValueError):
    """A physical or population parameter is outside its valid range."""


class ProtocolError(RuntimeError):
    """The report/command exchange between the units and the central control is inconsistent."""


class SignalError(ValueError):
    """A regulation signal cannot be read or does not fit the simulation.

    Attributes
    ----------
    line : int | None
        One-based line number of the offending row when the error comes from parsing a file.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(ValueError):
    """A configuration entry is unknown, malformed, or out of range.

    Attributes
    ----------
    key : str | None
        The offending configuration key.
    """

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key
