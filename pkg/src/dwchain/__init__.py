"""Microstructure and interface energetics of double-well lattice chains.

Chains of n bonds with a double-well nearest-neighbour potential and a
convex M-th-neighbour potential develop M-periodic ground-state patterns;
their arrangements are governed by an interfacial energy between patterns.
This package computes the effective per-cell potential and its convex
envelope, enumerates the minimizing patterns, globally minimizes periodic
chain energies, evaluates transition energies between patterns, and runs the
microstructure diagnostics that tie the pieces together.
"""

__version__ = "0.1.0"

from .effective_potential import (
    AffineSegment,
    BranchSolution,
    ContactInterval,
    EffectivePotential,
    EnvelopeStructure,
    TangentLine,
)
from .errors import (
    BudgetExhausted,
    ConfigError,
    InfeasibleBranch,
    MeanMismatch,
    NoConvergence,
    NoCrossing,
    NonDifferentiable,
    NotInMinimizerSet,
    SingularSystem,
    UnclassifiedSegment,
)
from .lattice_energy import (
    CellEnergyReport,
    ChainConfig,
    EnergyBreakdown,
    cell_energies,
    cell_energy,
    cell_energy_report,
    total_renormalized_energy,
    unrenormalized_energy,
)
from .microstates import (
    Microstate,
    MicrostateSet,
    cyclic_shift,
    minimizer_set_alpha,
    minimizer_set_ell,
    pattern_profile,
)
from .potentials import (
    ConvexWell,
    DoubleWell,
    LongRangePotential,
    crossing_points,
    default_slope_range,
)
from .solver import (
    SolveResult,
    brute_force_oracle,
    convex_solve_given_assignment,
    global_minimize,
    minimize_two_phase,
)
from .transition import (
    InvarianceReport,
    TransitionQuery,
    TransitionResult,
    WindowSolve,
    invariance_suite,
    phi_converged,
    phi_window,
)
from .analysis import (
    GammaReport,
    PhaseDecomposition,
    PhaseSegment,
    ShiftReport,
    detect_interfaces,
    gamma_limit_compare,
    m_interpolations,
    shift_periodicity_check,
    volume_fraction_gap,
)
