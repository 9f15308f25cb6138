"""Peer-effect estimation in noisy, low-rank networks via spectral smoothing.

Generates degree-corrected blockmodel networks and autoregressive outcomes,
corrupts the network under seven observation regimes, recovers the principal
subspace with a regime-appropriate estimator, and fits peer / latent
contagion two-stage least squares estimators with asymptotic intervals.
"""

from .contagion import (
    ContagionDesign,
    IdentificationReport,
    OutcomeDraw,
    cosine_influence_weights,
    generate_outcomes,
    identification_check,
)
from .corruption import (
    CorruptedView,
    CorruptionSpec,
    SubspaceEstimate,
    corrupt,
    recover_subspace,
)
from .estimators import (
    DesignBundle,
    FitResult,
    align_latent_coefs,
    build_design,
    estimate_projection_params,
    oracle_fit,
    tsls_fit,
)
from .exceptions import (
    ConfigError,
    DegenerateDesignError,
    DimensionError,
    IdentificationError,
    NetsmoothError,
    NumericalError,
    RankError,
    ValidationError,
)
from .harness import (
    CellResult,
    ExperimentConfig,
    RateFit,
    Summary,
    run_experiment,
    run_multiverse,
    summarize,
)
from .linalg import (
    ProcrustesResult,
    TruncatedFactorization,
    numerical_rank,
    procrustes_align,
    solve_least_squares,
    truncated_svd,
)
from .netgen import (
    DcsbmParams,
    ExponentialDegreeCorrection,
    LatentNetwork,
    ObservedNetwork,
    Sparsity,
    SubgammaSpec,
    paper_dcsbm_params,
    realize_network,
    row_normalize,
    sample_dcsbm_latents,
)

__version__ = "0.1.0"

__all__ = [
    "ContagionDesign",
    "IdentificationReport",
    "OutcomeDraw",
    "cosine_influence_weights",
    "generate_outcomes",
    "identification_check",
    "CorruptedView",
    "CorruptionSpec",
    "SubspaceEstimate",
    "corrupt",
    "recover_subspace",
    "DesignBundle",
    "FitResult",
    "align_latent_coefs",
    "build_design",
    "estimate_projection_params",
    "oracle_fit",
    "tsls_fit",
    "ConfigError",
    "DegenerateDesignError",
    "DimensionError",
    "IdentificationError",
    "NetsmoothError",
    "NumericalError",
    "RankError",
    "ValidationError",
    "CellResult",
    "ExperimentConfig",
    "RateFit",
    "Summary",
    "run_experiment",
    "run_multiverse",
    "summarize",
    "ProcrustesResult",
    "TruncatedFactorization",
    "numerical_rank",
    "procrustes_align",
    "solve_least_squares",
    "truncated_svd",
    "DcsbmParams",
    "ExponentialDegreeCorrection",
    "LatentNetwork",
    "ObservedNetwork",
    "Sparsity",
    "SubgammaSpec",
    "paper_dcsbm_params",
    "realize_network",
    "row_normalize",
    "sample_dcsbm_latents",
]
