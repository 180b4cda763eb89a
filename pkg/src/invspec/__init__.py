"""invspec: a numerical laboratory for inverse spectral problems.

Simulates Dirichlet spectral data for (-Laplace)^m + q on a rectangle,
assembles discrete Dirichlet-to-Neumann maps from that data, and
reconstructs the potential from complex-geometric-optics boundary pairings,
including the finitely-many-missing-eigenpairs mechanism.
"""

__version__ = "0.1.0"

from .symbols import (  # noqa: F401
    MultiIndex,
    Symbol,
    evaluate,
    derivative,
    tilde_norm,
    shifted_symbol,
    laplacian_symbol,
    polyharmonic_symbol,
    operator_symbol,
)
from .grids import RectGrid, BoundaryData, TraceSet  # noqa: F401
from .operators import (  # noqa: F401
    DiscreteOperator,
    EigenPair,
    assemble,
    eigen_decompose,
    solve_bvp,
    neumann_traces,
    green_pairing,
    weyl_fit,
    ResolventError,
)
from .cgo import (  # noqa: F401
    CharacteristicPair,
    ShiftFamily,
    CGOSolution,
    alpha_beta,
    make_pair,
    make_shift_family,
    verify_assumptions,
    build_cgo_bvp,
    solve_correction_fixed_point,
)
from .dataset import SpectralRecord, SpectralDataset, simulate_measurement, mask_low_modes, save, load  # noqa: F401
from .dtn import DtNMatrix, dtn_direct, dtn_difference_from_spectra, decay_study  # noqa: F401
from .reconstruct import (  # noqa: F401
    FourierSample,
    ConstraintSet,
    ReconstructionResult,
    fourier_sample,
    lambda_extrapolate,
    invert_fourier,
    reconstruct_full,
    constrained_coefficients,
    incomplete_certificate,
)
