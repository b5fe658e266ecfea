"""qodimer: twin-beam correlation spectra of two coupled chi(2) waveguides
sharing a pumped, doubly resonant cavity.

The package computes guide-symmetric steady states and their linear
stability, semi-analytic shot-noise-normalized intensity correlation
spectra of the output beams, and cross-validates them against a truncated-
Wigner stochastic simulation.
"""

__version__ = "0.1.0"

from .model import (
    DimerParams,
    EffectiveDetunings,
    NormalizationContext,
    ModeProfilePair,
    SymmetricSteadyState,
    effective_detunings,
    pump_for_intensity,
    sh_steady_intensity,
    steady_phases,
    solve_symmetric_steady_states,
    bistability_predicate,
    deterministic_drift,
    drift_residual,
    output_carriers,
    coupling_overlap_integral,
    normalized_coupling,
)
from .stability import (
    LinearizedSystem,
    EigenSpectrum,
    StabilityTag,
    StaticSubtype,
    StabilityClass,
    build_linearized_system,
    eigen_spectrum,
    classify_state,
    critical_pump_threshold,
    find_threshold_bracket,
    PlaneSpec,
    ScanCell,
    scan_bifurcation,
)
from .spectra import (
    SpectralMatrix,
    SpectrumSeries,
    spectral_matrix,
    spectral_matrix_from_matrices,
    single_mode_normal_spectrum,
    dimer_spectrum,
    monomer_spectrum,
    shot_noise_level,
    default_omega_grid,
)
from .sim import (
    SimConfig,
    FieldState,
    OutputSample,
    sample_noise_increment,
    heun_step,
    classical_output_means,
    integrate_output_windows,
    integrate_trajectory,
    CorrelationAccumulator,
    accumulate_two_time_correlations,
    estimate_spectra,
    simulate_spectrum,
)

__all__ = [name for name in dir() if not name.startswith("_")]
