"""Trace-driven cycle-level GPU simulator with a deterministic parallel SM loop."""

from .config import GpuConfig, default_config, load_config, parse_config
from .engine import RunResult, run
from .parallel import SchedulePolicy
from .stats import GpuStats, diff_reports, render_report
from .trace import TraceProgram, generate_workload, load_trace, parse_trace

__version__ = "0.1.0"

__all__ = [
    "GpuConfig",
    "GpuStats",
    "RunResult",
    "SchedulePolicy",
    "TraceProgram",
    "default_config",
    "diff_reports",
    "generate_workload",
    "load_config",
    "load_trace",
    "parse_config",
    "parse_trace",
    "render_report",
    "run",
]
