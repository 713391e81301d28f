"""Robust slice-phase pi pulses for atom interferometry.

A pulse is a sequence of slices with fixed Rabi amplitude and a piecewise
constant laser phase.  The package propagates two-level atoms through such
pulses, averages over a thermal cloud, optimizes slice phases and durations
with GRAPE, and runs robustness scans.
"""

from .dynamics import (ensemble_fidelity, ensemble_population, excited_population,
                       fidelity_single, fidelity_trace, propagate, transfer_amplitudes)
from .ensemble import (EnsembleSpec, SamplePoint, SampleSet, build_physical_samples,
                       build_window_samples)
from .grape import (InfeasibleBoundsError, OptimizationConfig, OptimizationResult,
                    TrainingSpec, multistart_optimize)
from .pulse import InvalidScheduleError, Segment, SliceSchedule, rectangular_pi, segmentize
from .scans import scan_2d, sweep_response, sweep_slices, sweep_temperature
from .su2 import GeneratorCoeffs, expm_constant

__version__ = "0.1.0"

__all__ = [
    "EnsembleSpec", "GeneratorCoeffs", "InfeasibleBoundsError", "InvalidScheduleError",
    "OptimizationConfig", "OptimizationResult", "SamplePoint", "SampleSet", "Segment",
    "SliceSchedule", "TrainingSpec", "build_physical_samples", "build_window_samples",
    "ensemble_fidelity", "ensemble_population", "excited_population", "expm_constant",
    "fidelity_single", "fidelity_trace", "multistart_optimize", "propagate",
    "rectangular_pi", "scan_2d", "segmentize", "sweep_response", "sweep_slices",
    "sweep_temperature", "transfer_amplitudes",
]
