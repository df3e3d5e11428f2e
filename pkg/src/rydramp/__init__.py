"""rydramp: fast detuning-ramp design for ordered states of Rydberg chains.

The package simulates a 1D chain of laser-driven interacting two-level
atoms and searches, by multi-start quasi-Newton optimization over
piecewise-linear detuning ramps, for fast passages from the all-ground
state into period-2/3/4 antiferromagnetically ordered product states.
"""

from .model import (BareState, ChainConfig, ConfigError, OmegaEnvelope,
                    PulseSchedule, RunConfig, basis_state, default_nqn_seed,
                    disordered_state, target_state, C6_DEFAULT)
from .hamiltonian import (build_full, build_reduced5, nearest_neighbour_v,
                          pair_interaction)
from .propagate import (PropagationError, PropagationResult, propagate,
                        propagate_batch, propagate_with_observables)
from .spectrum import (EigenFrame, LabelTracker, bare_crossings, eigensystem,
                       landau_zener, track_adiabatic_labels)
from .diagnostics import (ObservableSet, adiabatic_projections,
                          bare_projections, fidelity, local_occupations,
                          measured_fidelity, order_parameter)
from .optimize import (NqnWindows, OptimizationProblem, OptimizationReport,
                       classify_nqn, gradient, loss, optimize)
from .scan import GroundState, PhasePoint, classify_phase, ground_state, scan

__version__ = "0.1.0"

__all__ = [
    "BareState", "ChainConfig", "ConfigError", "OmegaEnvelope",
    "PulseSchedule", "RunConfig", "basis_state", "default_nqn_seed",
    "disordered_state", "target_state", "C6_DEFAULT",
    "build_full", "build_reduced5", "nearest_neighbour_v", "pair_interaction",
    "PropagationError", "PropagationResult", "propagate", "propagate_batch",
    "propagate_with_observables",
    "EigenFrame", "LabelTracker", "bare_crossings", "eigensystem",
    "landau_zener", "track_adiabatic_labels",
    "ObservableSet", "adiabatic_projections", "bare_projections", "fidelity",
    "local_occupations", "measured_fidelity", "order_parameter",
    "NqnWindows", "OptimizationProblem", "OptimizationReport", "classify_nqn",
    "gradient", "loss", "optimize",
    "GroundState", "PhasePoint", "classify_phase", "ground_state", "scan",
    "__version__",
]
