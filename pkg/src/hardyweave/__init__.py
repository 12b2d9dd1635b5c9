"""Fock-space simulation of Hardy's experiment with photons from three lasers."""

from .analysis import (
    NoiseReport,
    ParadoxReport,
    conditional_state,
    noise_ratios,
    oracle_expand_symbolic,
    verify_hardy_paradox,
)
from .dsl import Circuit, compile_circuit, format_circuit, parse_circuit, run_compiled
from .errors import (
    CancellationFailed,
    CutoffExceeded,
    EmptySelection,
    HardyweaveError,
    ParseError,
)
from .fock import (
    CANONICAL_MODES,
    ModeSet,
    QuantumState,
    register_modes,
    vacuum,
)
from .pipeline import LaserConfig, PipelineReport, run_full

__version__ = "0.1.0"
