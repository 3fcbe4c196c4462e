"""Reflected-wave overvoltage simulator for long-cable motor drives.

Simulates the traveling-wave transient between a fast-switching inverter
and a motor whose first stator coil carries a duty-controlled RC branch,
and adapts that duty with a model-reference controller until the motor-side
surge impedance matches the cable and the terminal ringing collapses.
"""

from .engine import run_to_end, new_run, step
from .errors import SimulationError
from .params import (
    BranchParams,
    CableParams,
    Config,
    ConfigError,
    MotorHfParams,
    MracParams,
    PwmParams,
    SimParams,
    Trace,
    TRACE_COLUMNS,
    default_config,
    load_config,
    validate,
    write_config,
)

__version__ = "0.1.0"

__all__ = [
    "run_to_end", "new_run", "step", "SimulationError",
    "BranchParams", "CableParams", "Config", "ConfigError",
    "MotorHfParams", "MracParams", "PwmParams", "SimParams",
    "Trace", "TRACE_COLUMNS",
    "default_config", "load_config", "validate", "write_config",
    "__version__",
]
