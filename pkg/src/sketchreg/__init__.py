"""Compressed least-squares regression with random projections."""

from .design import (
    DesignMatrix,
    NoiseModel,
    Spectrum,
    center,
    design_from_spectrum,
    load_csv,
    pc_rotate,
    save_csv,
    synthetic_design,
)
from .errors import (
    DimError,
    EmptyInput,
    InvalidParameter,
    NumericalError,
    NumericalWarning,
    ParseError,
    RankError,
    SingularError,
    SketchRegError,
)
from .estimators import (
    CvReport,
    FitResult,
    aclse_fit,
    clse_fit,
    ols_fit,
    ridge_fit,
    row_compressed_ols,
    select_dim_cv,
)
from .montecarlo import McConfig, ExperimentResult, empirical_mse, estimate_eta, estimate_tau, reproduce_figure
from .projections import (
    ProjectionOperator,
    ProjectionSpec,
    apply_columns,
    apply_rows,
    sample_projection,
    substream_seed,
)
from .theory import (
    EtaEstimates,
    MseReport,
    ShrinkageFactors,
    TauEstimate,
    exact_mse_from_eta,
    matched_ridge_penalty,
    optimal_dense_vector,
    orthonormal_mse,
    ridge_mse,
    shrinkage_factors,
    theorem1_bound,
    theorem2_bound,
    theorem4_bound,
)

__version__ = "0.1.0"
