"""Dirichlet-to-Neumann spectra of layered conductivities on the disk and the half-cylinder.

Forward maps in closed form, brute-force oracles, reconstruction of the layer
parameters from a finite spectrum, and Lipschitz-stability sweeps.
"""

from .cylinder import (
    CylinderClass,
    CylinderConductivity,
    CylinderDtnSpectrum,
    RadialBoundaryData,
    cylinder_spectrum,
    dtn_multiplier_cyl,
    solve_cylinder_mode,
)
from .cylinder_inverse import (
    CylinderReconstruction,
    reconstruct_cylinder,
    recover_cyl_limits,
    recover_cyl_two_mode,
)
from .disk import (
    AdmissibleDiskClass,
    DiskConductivity,
    DiskDtnSpectrum,
    FourierBoundaryData,
    b_series,
    b_series_derivative,
    disk_spectrum,
    dtn_multiplier,
    h_coefficient,
    mixing_parameter,
    solve_disk,
)
from .disk_inverse import (
    DiskReconstruction,
    LimitEstimate,
    detect_homogeneous,
    reconstruct,
    recover_alpha0,
    recover_alpha1,
    recover_alpha2,
    recover_interface,
)
from .errors import (
    ConfigurationError,
    ConvergenceError,
    DomainError,
    DtnLabError,
    IllPosedInputError,
    InconsistentSpectrumError,
    InsufficientModesError,
    NumericError,
    OracleError,
    ReconstructionError,
    UnidentifiableError,
)
from .oracle import oracle_cylinder_multiplier, oracle_disk_multiplier, oracle_disk_spectrum
from .special import BesselZeroTable, bessel_j0, bessel_j1, compute_zeros
from .stability import (
    GapResult,
    StabilityReport,
    TrivialClassWarning,
    cylinder_gap,
    disk_gap,
    lipschitz_sweep,
    nested_sweeps,
    sample_pairs,
    sweep_pairs,
)

__version__ = "0.1.0"
