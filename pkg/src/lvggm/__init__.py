"""Latent-variable Gaussian graphical model selection via sparse + low-rank
precision decomposition.

The penalized maximum-likelihood estimator splits the marginal precision of
the observed variables into a sparse conditional graph S and a PSD low-rank
term L capturing marginalized latent variables. The package also implements
the rank-constrained alternating estimator, two-step thresholding, a
Dantzig-selector-style program, the composite sparse/low-rank norm, synthetic
model generation and recovery/KKT diagnostics, plus a CLI (``lvggm``).
"""

from ._kernels import active_backend
from .composite import composite_norm, fit_via_composite
from .diagnostics import (
    GammaStabilitySummary,
    IdentifiabilityReport,
    KktReport,
    RecoveryMetrics,
    SignalLevels,
    gamma_stability,
    identifiability_report,
    kkt_report,
    recovery_metrics,
    signal_levels,
)
from .estimators import (
    fit_dantzig,
    fit_em_rank,
    fit_two_step_threshold,
    numeric_rank,
    threshold_defaults,
)
from .gaussian import (
    gaussian_log_likelihood,
    marginal_precision,
    objective_value,
    sample_covariance,
)
from .prox import logdet_prox, psd_trace_prox, soft_threshold_entrywise
from .solver import fit_mle
from .synth import SyntheticModel, draw_samples, generate_latent_model
from .types import (
    FitReport,
    NormDecomposition,
    PrecisionDecomposition,
    RankConstraint,
    RegularizationParams,
    SampleCovariance,
    SolverOptions,
    ThresholdParams,
)

__version__ = "0.1.0"

__all__ = [
    "active_backend",
    "composite_norm",
    "draw_samples",
    "fit_dantzig",
    "fit_em_rank",
    "fit_mle",
    "fit_two_step_threshold",
    "fit_via_composite",
    "gamma_stability",
    "gaussian_log_likelihood",
    "generate_latent_model",
    "identifiability_report",
    "kkt_report",
    "marginal_precision",
    "numeric_rank",
    "objective_value",
    "psd_trace_prox",
    "recovery_metrics",
    "sample_covariance",
    "signal_levels",
    "soft_threshold_entrywise",
    "threshold_defaults",
    "FitReport",
    "GammaStabilitySummary",
    "IdentifiabilityReport",
    "KktReport",
    "NormDecomposition",
    "PrecisionDecomposition",
    "RankConstraint",
    "RecoveryMetrics",
    "RegularizationParams",
    "SampleCovariance",
    "SignalLevels",
    "SolverOptions",
    "SyntheticModel",
    "ThresholdParams",
]
