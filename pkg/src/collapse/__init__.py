"""Neural-collapse dynamics under MSE loss on unconstrained features.

Least-squares classifiers and the loss split into NC1 / NC2-3 / off-path
parts, SNR-aligned coordinates, the renormalized gradient flow with its
closed-form singular-value dynamics, and NC1-NC4 measurements.
"""

from .classifier import (
    ExtendedClassifier,
    central_path_residual,
    extend,
    ls_classifier_centered,
    ls_classifier_extended,
    predictions,
    stationarity_residual,
)
from .closed_form import (
    ImplicitSolution,
    OdeConstants,
    asymptote,
    integration_constant,
    limit_features,
    limit_snr,
    omega_at,
    omega_rate,
)
from .decomposition import LossBreakdown, decompose, decompose_centered, mse_loss, spectral_loss
from .errors import (
    CollapseError,
    DegenerateGeometryError,
    FlowError,
    InvalidInputError,
    NearSingularError,
    PreconditionError,
    RankDeficiencyError,
)
from .estimators import LeastSquaresClassifier, Renormalizer, SNRAligner, samples_to_features
from .flow import (
    FlowConfig,
    FlowTrajectory,
    ambient_gradient,
    discrete_step,
    projected_step,
    simulate,
    singular_vector_drift,
)
from .metrics import (
    EtfCertificate,
    NcReport,
    etf_certificate,
    nc1_trace,
    nc2_measures,
    nc3_self_duality,
    nc4_mismatch,
    nc_report,
    simplex_etf,
)
from .model import (
    FeatureMatrix,
    FeatureStats,
    ProblemDims,
    centering_matrix,
    compute_stats,
    features_with_snr,
    init_features,
    label_matrix,
    make_rng,
)
from .snr import (
    AlignedState,
    SnrSpectrum,
    align_features,
    inv_sqrt_spd,
    realign,
    renormalize,
    snr_matrix,
    snr_svd,
    tangent_project,
)

__version__ = "0.1.0"
