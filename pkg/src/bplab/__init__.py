"""Trace-driven branch prediction lab for an RV32IM in-order core."""
from .batage import Batage, BatageConfig
from .core import MachineState, RetireEvent, load_image, run, step
from .errors import ContractViolation, ImageError
from .pipeline import LEVELS, Frontend, SimStats, TimingConfig, perfect_ipc, simulate

__version__ = "0.1.0"

__all__ = [
    "Batage", "BatageConfig", "ContractViolation", "Frontend", "ImageError", "LEVELS",
    "MachineState", "RetireEvent", "SimStats", "TimingConfig", "load_image", "perfect_ipc",
    "run", "simulate", "step",
]
