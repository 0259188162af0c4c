"""Stationary lattice random fields: simulation, spectra, and limit-theorem checks."""

from .errors import (
    ConfigError,
    FieldSpectraError,
    InsufficientDataError,
    InvalidDensityError,
    InvalidKernelError,
    InvalidPlanError,
    InvalidShapeError,
    MissingInnovationError,
    NonGenericFrequencyError,
    PairingError,
    UnsupportedModelError,
)
from .harness import (
    CltEntry,
    CltReport,
    ExperimentPlan,
    KsResult,
    exponential_cdf,
    kolmogorov_sf,
    ks_test,
    lln_rotated_average,
    normal_cdf,
    run_clt_experiment,
    run_periodogram_experiment,
    target_density,
    write_report,
)
from .models import (
    CoefficientKernel,
    FieldModel,
    GaussianColumnsField,
    IIDField,
    LatticeSample,
    LatticeShape,
    LinearField,
    VolterraField,
    VolterraKernel,
    analytic_covariance,
    analytic_spectral_density,
    covariance_range,
    covariance_support,
    density_fn,
    model_to_dict,
    sample_to_csv,
    simulate,
    transfer_function,
)
from .projection import (
    martingale_approx_error,
    martingale_sum,
    MartingaleSum,
    McEstimate,
    ProjectionSeries,
    ProjectionTerm,
    d0_series,
    d0_truncated,
    full_truncation_radius,
    project_p0,
    spectral_density_projection_mc,
)
from .rng import (
    InnovationLattice,
    InnovationSpec,
    LANE_AUX,
    LANE_INNOVATIONS,
    StreamKey,
    make_stream,
    sample_innovations,
)
from .spectral import (
    FourierSum,
    FrequencyPoint,
    fejer_kernel,
    fejer_smoothed_variance,
    fourier_frequencies,
    fourier_sum,
    fourier_sum_grid,
    generic_frequencies,
    is_generic,
    periodogram,
    rotated_sum,
    spectral_density_partial_sum,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
