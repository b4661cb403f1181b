"""Rings of coupled gain/loss microcavities with cyclic permutation-time symmetry."""

__version__ = "0.1.0"

from .model import (
    DriveSpec,
    DynamicalMatrix,
    SystemParams,
    build_drive,
    build_matrix,
    check_cpt_symmetry,
    ring_matrix,
    site_index,
    site_label,
)
from .spectra import (
    ExceptionalPointSet,
    Regime,
    SpectrumReport,
    analytic_spectrum,
    classify_regime,
    exceptional_points,
    numerical_spectrum,
)
from .evolution import (
    MomentSeries,
    MomentState,
    average_contrast,
    evolve_moments,
    output_flux,
    photon_numbers,
    propagator,
    reciprocity_experiment,
    saturation_check,
)
from .noise_mc import TrajectoryEnsemble, compare_to_deterministic, sample_trajectories
