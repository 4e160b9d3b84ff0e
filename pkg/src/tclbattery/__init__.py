from .tcl import StepEnvironment, TclEvent, TclParams, TclState, tcl_step
from .fleet import Fleet, InitMode, PopulationSpec, sample_fleet
from .battery import BatteryParams, DynamicLimits, SocSample, dynamic_limits, static_params
from .signal import RegulationSignal, load_signal, normalize_and_scale, resample
from .engine import SimConfig, SimTrace, Simulator, run
from .errors import ConfigError, InvalidParameterError, ProtocolError, SignalError
