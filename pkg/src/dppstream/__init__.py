"""Seedable slot-level simulator of adaptive video streaming over a network
of wireless helpers with queue-driven request and scheduling control."""

from .config import SimConfig, load_config
from .reports import emit_reports
from .sim import MetricsReport, Simulator, compare, run, sweep_v

__all__ = ["SimConfig", "load_config", "Simulator", "MetricsReport", "run", "sweep_v", "compare", "emit_reports"]
__version__ = "0.1.0"
