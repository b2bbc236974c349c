"""Subsystem-based robust control-pulse optimization for coupled spin systems.

Optimizes piecewise-constant pulses that realize local target gates on
subsystem blocks of a spin register while suppressing, to first order, the
effect of the couplings between blocks.  Brute-force full-register
simulation is included for verification at desk scale.
"""

from ._kernels import BACKEND as kernel_backend
from .objective import (ObjectiveWeights, TargetGate, evaluate,
                        fitness_and_gradient, gradient, make_problem)
from .optimizer import OptimizerConfig, two_stage_optimize
from .pulse import ChannelSpec, PulseProgram, default_channels, random_pulse
from .spins import (SpinSystem, SubsystemPartition, build_hamiltonians,
                    parse_molecule, read_molecule)
from .verification import check_gap, full_propagate

__version__ = "0.1.0"

__all__ = [
    "ChannelSpec", "ObjectiveWeights", "OptimizerConfig", "PulseProgram",
    "SpinSystem", "SubsystemPartition", "TargetGate", "build_hamiltonians",
    "check_gap", "default_channels", "evaluate", "fitness_and_gradient",
    "full_propagate", "gradient", "kernel_backend", "make_problem",
    "parse_molecule", "random_pulse", "read_molecule", "two_stage_optimize",
    "__version__",
]
