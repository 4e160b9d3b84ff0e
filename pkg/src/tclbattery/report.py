"""Trace files and run summaries.

Every float is written with 9 significant digits. Summaries are computed from the same
9-digit values, so a summary recomputed from a trace file matches the one written next to it.
"""

import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
import pandas as pd

from tclbattery.control import DispatchStatus
from tclbattery.engine import TRACE_COLUMNS, Diagnostic, SimTrace, UnitRow

FLOAT_FORMAT = "%.9g"

TRACE_FILE = "trace.csv"
DIAGNOSTICS_FILE = "diagnostics.csv"
UNIT_TRACE_FILE = "unit_trace.csv"
SUMMARY_FILE = "summary.csv"


def _to_csv(frame, path):
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def _quantize(values):
    """Round to the 9 significant digits the files carry."""
    return np.array([float(f"{v:.9g}") for v in np.asarray(values, dtype=float)])


def trace_frame(trace: SimTrace) -> pd.DataFrame:
    return pd.DataFrame(trace.rows, columns=list(TRACE_COLUMNS))


def diagnostics_frame(trace: SimTrace) -> pd.DataFrame:
    return pd.DataFrame([(d.tick, d.id, d.event.value) for d in trace.diagnostics],
                        columns=list(Diagnostic._fields))


def unit_trace_frame(trace: SimTrace) -> pd.DataFrame:
    frame = pd.DataFrame(trace.unit_rows, columns=list(UnitRow._fields))
    frame["on"] = frame["on"].astype(np.int64)
    return frame


def write_trace(trace: SimTrace, out_dir: str | Path) -> list[Path]:
    """Write the trace, its diagnostics and (if units were tracked) the unit trace.

    Returns
    -------
    list[Path]
        Paths of the files written.

    Raises
    ------
    OSError
        If the directory cannot be created or written.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [out_dir / TRACE_FILE, out_dir / DIAGNOSTICS_FILE]
    _to_csv(trace_frame(trace), written[0])
    _to_csv(diagnostics_frame(trace), written[1])
    if trace.unit_rows:
        written.append(out_dir / UNIT_TRACE_FILE)
        _to_csv(unit_trace_frame(trace), written[-1])
    return written


def read_trace(path: str | Path) -> pd.DataFrame:
    """Read a trace CSV back with every float parsed exactly as written."""
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in TRACE_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"{path} is not a trace file; missing columns {missing}.")
    return frame


@dataclass(frozen=True)
class RunSummary:
    """Aggregate statistics of one run.

    Attributes
    ----------
    rmse_tracking : float
        Root mean square of ``psi - r`` over all ticks, in kW.
    max_abs_error : float
        In kW.
    ticks_infeasible_ramp, ticks_infeasible_soc : int
    mean_availability : float
        Mean fraction of the fleet available to the central control.
    final_soc : float
        State of charge committed at the end of the last tick, in kWh.
    horizon_steps : int
    fleet_size : int
    """
    rmse_tracking: float
    max_abs_error: float
    ticks_infeasible_ramp: int
    ticks_infeasible_soc: int
    mean_availability: float
    final_soc: float
    horizon_steps: int
    fleet_size: int

    def __str__(self):
        width = max(len(f.name) for f in fields(self))
        return "\n".join(f"{name:<{width}}  {value}" for name, value in self.formatted().items())

    def formatted(self):
        """Field values as written to file: floats with 9 significant digits."""
        return {f.name: (f"{v:.9g}" if isinstance(v := getattr(self, f.name), float) else str(v))
                for f in fields(self)}


def summarize(frame: pd.DataFrame, fleet_size: int) -> RunSummary:
    """Summary of a trace frame (see :py:func:`trace_frame` and :py:func:`read_trace`).

    Raises
    ------
    ValueError
        If the trace is empty or `fleet_size` is not positive.
    """
    if len(frame) == 0:
        raise ValueError("Cannot summarize an empty trace.")
    if fleet_size < 1:
        raise ValueError(f"fleet_size must be positive, got {fleet_size}.")

    error = _quantize(frame["error"])
    max_abs = float(np.abs(error).max())
    rmse = math.sqrt(float(np.mean(error * error)))
    status = frame["dispatch_status"]
    ramp = int((status == DispatchStatus.INFEASIBLE_RAMP.value).sum())
    soc = int((status == DispatchStatus.INFEASIBLE_SOC.value).sum())
    return RunSummary(rmse_tracking=rmse,
                      max_abs_error=max_abs,
                      ticks_infeasible_ramp=ramp,
                      ticks_infeasible_soc=soc,
                      mean_availability=float(frame["n_available"].to_numpy().mean()) / fleet_size,
                      final_soc=float(_quantize(frame["x"].iloc[-1:])[0]),
                      horizon_steps=len(frame),
                      fleet_size=int(fleet_size))


def summarize_trace(trace: SimTrace) -> RunSummary:
    return summarize(trace_frame(trace), len(trace.final_fleet))


def write_summary(summary: RunSummary, path: str | Path) -> None:
    pd.DataFrame(list(summary.formatted().items()), columns=["key", "value"]).to_csv(
        path, index=False, lineterminator="\n")


def read_summary(path: str | Path) -> dict[str, str]:
    """Summary values as the strings written to file, keyed by field name."""
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    return dict(zip(frame["key"], frame["value"]))


def compare_summary(summary: RunSummary,
                    written: dict[str, str]) -> dict[str, tuple[str, str | None]]:
    """Fields whose formatted value differs from `written`, as ``{name: (recomputed, written)}``."""
    return {name: (value, written.get(name)) for name, value in summary.formatted().items()
            if written.get(name) != value}
