"""Regulation signals: loading, scaling to a fleet, and alignment with the simulation grid."""

import logging
import math
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd

from tclbattery.battery import BatteryParams
from tclbattery.errors import SignalError

logger = logging.getLogger(__name__)


class SignalFormat(Enum):
    TWO_COLUMN_CSV = "two-column-csv"


@dataclass(frozen=True, eq=False)
class RegulationSignal:
    """Time series of requested power deviations.

    Attributes
    ----------
    times : np.ndarray
        Sample times in seconds, strictly increasing.
    values : np.ndarray
        Requested deviation from baseline in kW (or unitless before scaling).
    source : str, default=""
        Where the samples came from.
    scale : float, default=1.0
        Factor applied to the source values so far.

    Raises
    ------
    SignalError
        If the arrays differ in length, are empty, contain non-finite values,
        or the times are not strictly increasing.
    """
    times: np.ndarray
    values: np.ndarray
    source: str = ""
    scale: float = field(default=1.0)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if len(times) != len(values):
            raise SignalError(f"{len(times)} times but {len(values)} values.")
        if len(times) == 0:
            raise SignalError("Signal has no samples.")
        if not (np.isfinite(times).all() and np.isfinite(values).all()):
            raise SignalError("Signal contains non-finite samples.")
        if (np.diff(times) <= 0).any():
            raise SignalError("Signal times are not strictly increasing.")

    def __len__(self):
        return len(self.times)

    def __repr__(self):
        return (f"{type(self).__name__}(<{len(self)} samples>, "
                f"source={self.source!r}, scale={self.scale})")

    @property
    def samples(self):
        """List of ``(t_seconds, value)`` pairs."""
        return list(zip(self.times.tolist(), self.values.tolist()))


_TOKENIZER_LINE = re.compile(r"Expected \d+ fields? in line (\d+)")


def _is_number(text):
    try:
        float(text)
    except (TypeError, ValueError):
        return False
    return True


def _parser_error_line(err):
    """Line number named by a pandas tokenizer error, None if it names none."""
    match = _TOKENIZER_LINE.search(str(err))
    return int(match.group(1)) if match else None


def load_signal(path: str | Path,
                format: SignalFormat | str = SignalFormat.TWO_COLUMN_CSV) -> RegulationSignal:
    """Read a signal from a file.

    The two-column CSV format has one ``seconds,value`` pair per line.
    A first line whose two fields are both non-numeric is taken as a header and skipped;
    a first line with one numeric field is a malformed data row.

    Raises
    ------
    SignalError
        If the file is empty, a row is not two numbers, or the times do not strictly increase.
        The error carries the one-based line number of the first offending line.
    OSError
        If the file cannot be read.
    """
    format = SignalFormat(format)
    try:
        frame = pd.read_csv(path, header=None, dtype=str, keep_default_na=False,
                            skip_blank_lines=False)
    except pd.errors.EmptyDataError:
        raise SignalError(f"{path} is empty", line=1) from None
    except pd.errors.ParserError as err:
        raise SignalError(f"{path} is not a two-column CSV: {err}",
                          line=_parser_error_line(err)) from None
    frame = frame.fillna("")
    if frame.shape[1] != 2:
        raise SignalError(f"expected 2 columns, found {frame.shape[1]}", line=1)

    n_lines = len(frame)
    lines = np.arange(1, n_lines + 1)
    blank = (frame[0].str.strip() == "") & (frame[1].str.strip() == "")
    frame, lines = frame[~blank.to_numpy()], lines[~blank.to_numpy()]
    if len(frame) and not (_is_number(frame.iat[0, 0]) or _is_number(frame.iat[0, 1])):
        frame, lines = frame.iloc[1:], lines[1:]
    if len(frame) == 0:
        raise SignalError(f"{path} has no data rows", line=n_lines + 1)

    times = pd.to_numeric(frame[0].str.strip(), errors="coerce").to_numpy(dtype=float)
    values = pd.to_numeric(frame[1].str.strip(), errors="coerce").to_numpy(dtype=float)
    bad = ~(np.isfinite(times) & np.isfinite(values))
    if bad.any():
        raise SignalError("row is not two finite numbers", line=int(lines[np.argmax(bad)]))
    not_increasing = np.diff(times) <= 0
    if not_increasing.any():
        raise SignalError("time does not increase", line=int(lines[np.argmax(not_increasing) + 1]))

    return RegulationSignal(times, values, source=str(path))


def normalize_and_scale(signal: RegulationSignal, battery: BatteryParams,
                        scale_fraction: float) -> RegulationSignal:
    """Rescale a signal so its peak magnitude is a fraction of the fleet's ramp capability.

    Values are divided by their peak magnitude and multiplied by
    ``scale_fraction * min(battery.ramp_up, battery.ramp_down)``,
    so the scaled peak equals that anchor exactly and signs and zero crossings are kept.

    Raises
    ------
    SignalError
        If every sample is zero.
    ValueError
        If `scale_fraction` is not positive.

    Notes
    -----
    Fractions above 1 are allowed on purpose: they produce signals the fleet cannot follow,
    which is how loss of tracking is reproduced.
    """
    if not scale_fraction > 0:
        raise ValueError(f"scale_fraction must be positive, got {scale_fraction}.")
    peak = float(np.abs(signal.values).max())
    if peak == 0:
        raise SignalError("Cannot normalize an all-zero signal.")
    anchor = scale_fraction * min(battery.ramp_up, battery.ramp_down)
    if scale_fraction > 1:
        logger.info("Signal scaled to %.3g of the ramp capability; expect infeasible ticks.",
                    scale_fraction)
    return replace(signal, values=signal.values / peak * anchor, scale=signal.scale * anchor / peak)


def resample(signal: RegulationSignal, step_seconds: float, horizon_steps: int) -> list[float]:
    """Zero-order hold of the signal at ``k * step_seconds`` for ``k < horizon_steps``.

    Ticks before the first sample take the first value.

    Raises
    ------
    SignalError
        If the last sample comes before the last tick.
    """
    ticks = np.arange(horizon_steps) * step_seconds
    if signal.times[-1] < ticks[-1]:
        raise SignalError(f"Signal ends at {signal.times[-1]} s but the horizon needs "
                          f"{ticks[-1]} s.")
    index = np.searchsorted(signal.times, ticks, side="right") - 1
    return signal.values[np.clip(index, 0, None)].tolist()


def synthetic_signal(duration_seconds: float, *, sample_seconds: float = 2.0,
                     time_constant_seconds: float = 600.0, seed: int = 0) -> RegulationSignal:
    """Seeded stand-in for a market regulation signal.

    A unit-variance first-order autoregressive walk sampled every `sample_seconds`,
    clipped to [-1, 1] the way a dispatch signal saturates at its rails.
    Covers at least `duration_seconds`.
    """
    n = math.ceil(duration_seconds / sample_seconds) + 1
    rng = np.random.default_rng(seed)
    phi = math.exp(-sample_seconds / time_constant_seconds)
    spread = math.sqrt(1 - phi * phi)

    shocks = rng.standard_normal(n)
    walk = np.empty(n)
    walk[0] = shocks[0]
    for k in range(1, n):
        walk[k] = phi * walk[k - 1] + spread * shocks[k]

    return RegulationSignal(np.arange(n) * sample_seconds, np.clip(walk, -1.0, 1.0),
                            source=f"synthetic(seed={seed})")


def write_signal(signal: RegulationSignal, path: str | Path) -> None:
    pd.DataFrame({"t": signal.times, "r": signal.values}).to_csv(path, index=False,
                                                                 float_format="%.9g")
