"""Gaussian optimal-transport style transfer toolkit.

Closed-form Wasserstein distances and Monge maps between Gaussian feature
statistics, displacement interpolation, Frechet means on the covariance cone
(Bures/Wasserstein, Fisher-Rao, arithmetic, harmonic), and an end-to-end
stylization pipeline over pixel or externally extracted feature tensors.
"""

from .linalg import (
    DEFAULT_REL_FLOOR,
    DEFAULT_REL_TRUNC,
    DimensionMismatchError,
    EigenDecomp,
    EigenSolverError,
    GaussotError,
    NearSingularError,
    NotPositiveSemidefiniteError,
    SpdMatrix,
    ZeroRankError,
    bures_distance_sq,
    expm,
    fisher_rao_distance_sq,
    inv_sqrtm,
    logm,
    sqrtm,
    sym_eigen,
)
from .means import (
    FrechetSpec,
    MeanReport,
    Metric,
    arithmetic_mean,
    barycenter_stats,
    bures_barycenter,
    frechet_mean,
    harmonic_mean,
    karcher_mean,
)
from .pipeline import (
    PIPELINE_SHRINK,
    Direction,
    FeatureCodec,
    FileTensorCodec,
    MixRequest,
    MixResult,
    PixelCodec,
    TransferResult,
    mix_styles,
    multires_transfer,
    stylize,
    weight_grid,
)
from .transport import (
    GaussianStats,
    MapKind,
    SampleMatrix,
    TransportMap,
    adain_map,
    apply_map,
    estimate_stats,
    identity_map,
    mccann_pushforward,
    mccann_stats,
    monge_map,
    w2_gaussian_sq,
    wct_map,
)

__version__ = "0.1.0"
