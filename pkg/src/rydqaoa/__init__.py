"""QAOA-style control synthesis on Rydberg-atom arrays."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .ansatz import QaoaSchedule, apply_schedule, schedule_unitary
from .gates import ChainLayout, GeneratorKind
from .optimize import Objective, OptimizerConfig, OptResult, dual_anneal, evaluate_cost, warm_start_physical
from .qcore import QuantumState, operator_fidelity, state_fidelity
from .rydberg import DeviceConfig, Pulse, PulseSequence, compile_schedule, simulate_schedule_physical
from .targets import TARGETS, TargetSpec, get_target

__all__ = [
    "BACKEND", "ChainLayout", "DeviceConfig", "GeneratorKind", "Objective", "OptResult",
    "OptimizerConfig", "Pulse", "PulseSequence", "QaoaSchedule", "QuantumState", "TARGETS",
    "TargetSpec", "apply_schedule", "compile_schedule", "dual_anneal", "evaluate_cost",
    "get_target", "operator_fidelity", "schedule_unitary", "simulate_schedule_physical",
    "state_fidelity", "warm_start_physical",
]
