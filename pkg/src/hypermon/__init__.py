"""Runtime monitoring of hyperproperties with generator functions."""
from __future__ import annotations

from .errors import (
    FormulaSyntaxError,
    GeneratorError,
    HypermonError,
    PreconditionError,
    SpecificationError,
    UnsupportedFragmentError,
    UpdateError,
)
from .formula import parse, pretty
from .generators import GeneratorObject, GeneratorRegistry
from .monitor import Monitor, MonitorConfig, MonitorResult, run_monitor
from .oracle import evaluate
from .trace_model import EPS, DataDomain, Observation, Trace, Valuation, load_traces
from .transducer import compile_atom
from .verdict import Stats, Verdict

__version__ = "0.1.0"

__all__ = [
    "EPS",
    "DataDomain",
    "FormulaSyntaxError",
    "GeneratorError",
    "GeneratorObject",
    "GeneratorRegistry",
    "HypermonError",
    "Monitor",
    "MonitorConfig",
    "MonitorResult",
    "Observation",
    "PreconditionError",
    "SpecificationError",
    "Stats",
    "Trace",
    "UnsupportedFragmentError",
    "UpdateError",
    "Valuation",
    "Verdict",
    "compile_atom",
    "evaluate",
    "load_traces",
    "parse",
    "pretty",
    "run_monitor",
]
