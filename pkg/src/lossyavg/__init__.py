"""Distributed lossy averaging: exact second-moment simulation and rate-distortion bounds."""

from .bounds import BoundValue
from .ensemble import EnsembleState, init_state
from .protocols import ProtocolConfig, RunResult, run_protocol
from .spectral import expected_matrix, optimize_q, uniform_q
from .topology import Topology

__version__ = "0.1.0"

__all__ = [
    "BoundValue",
    "EnsembleState",
    "ProtocolConfig",
    "RunResult",
    "Topology",
    "expected_matrix",
    "init_state",
    "optimize_q",
    "run_protocol",
    "uniform_q",
]
