"""
platoon-synth - string-stable controller synthesis for connected vehicle platoons.

This package provides functionality to:
- Check local and string stability of feedback/feedforward gains under V2V delay
- Compute banded and global H-infinity norms of the delay transfer function
- Synthesize box-constrained gains with a two-stage derivative-free search
- Simulate mixed platoons of connected and human-driven vehicles
"""

__version__ = "0.1.0"
__author__ = "platoon-synth Contributors"

from platoon_synth.model import Gains, VehicleParams, local_stability
from platoon_synth.param import BoxBounds
from platoon_synth.synthesis import (
    ControllerSynthesizer,
    SynthesisConfig,
    SynthesisResult,
    synthesize,
)
from platoon_synth.sim import PlatoonScenario, PlatoonSimulator, simulate

__all__ = [
    "Gains",
    "VehicleParams",
    "local_stability",
    "BoxBounds",
    "ControllerSynthesizer",
    "SynthesisConfig",
    "SynthesisResult",
    "synthesize",
    "PlatoonScenario",
    "PlatoonSimulator",
    "simulate",
]
