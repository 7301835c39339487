"""Gate-tunable CPW resonators terminated by a Josephson inductance.

Forward models (CPW electricals, junction tuning, Duffing response, avoided
crossings), fitters for measured transmission data, and a seeded synthetic
data generator to validate every fitter by round trip.
"""

from ._validation import DomainError, SolverError, TunresWarning
from .coupling import (CrossingData, CrossingEstimator, CrossingModel, branch_frequencies,
                       detuning_metrics, fit_crossing)
from .duffing import (CriticalPowerExtractor, DuffingParams, bifurcation_locus_oracle,
                      extract_fb, extract_pc, rescale, steady_amplitudes, universal_curve)
from .em_model import (CpwGeometry, TwoFluidTcEstimator, cpw_electricals, cpw_impedance,
                       fit_tc, kinetic_fraction, lk_decompose, quarter_wave_f0, two_fluid_shift)
from .fitcore import FitError, FitProblem, FitResult, solve
from .junction import (InductanceMapper, TunableResonator, lj_from_frequency, participation,
                       positioned_frequency, tunable_frequency)
from .spectro import ComplexTrace, NotchModel, NotchResonanceFitter, circle_fit, notch_s21
from .synth import NoiseSpec, TraceStack, synth_crossing, synth_duffing_stack, synth_notch

__version__ = "0.1.0"

__all__ = [
    "ComplexTrace", "CpwGeometry", "CriticalPowerExtractor", "CrossingData",
    "CrossingEstimator", "CrossingModel", "DomainError", "DuffingParams", "FitError",
    "FitProblem", "FitResult", "InductanceMapper", "NoiseSpec", "NotchModel",
    "NotchResonanceFitter", "SolverError", "TraceStack", "TunableResonator",
    "TunresWarning", "TwoFluidTcEstimator", "bifurcation_locus_oracle", "branch_frequencies",
    "circle_fit", "cpw_electricals", "cpw_impedance", "detuning_metrics", "extract_fb",
    "extract_pc", "fit_crossing", "fit_tc", "kinetic_fraction", "lj_from_frequency",
    "lk_decompose", "notch_s21", "participation", "positioned_frequency", "quarter_wave_f0",
    "rescale", "solve", "steady_amplitudes", "synth_crossing", "synth_duffing_stack",
    "synth_notch", "tunable_frequency", "two_fluid_shift", "universal_curve",
]
