"""Gaussian statistics, closed-form W2, and the affine transport maps
(optimal/Monge, whitening-coloring, per-channel AdaIN), plus displacement
interpolation between content and style.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    DEFAULT_REL_TRUNC,
    DimensionMismatchError,
    GaussotError,
    SpdMatrix,
    _symmetrize,
    bures_distance_sq,
    inv_sqrtm,
    sqrtm,
)

__all__ = [
    "MapKind",
    "SampleMatrix",
    "GaussianStats",
    "TransportMap",
    "estimate_stats",
    "w2_gaussian_sq",
    "monge_map",
    "wct_map",
    "adain_map",
    "identity_map",
    "apply_map",
    "mccann_pushforward",
    "mccann_stats",
]


class MapKind(enum.Enum):
    OT = "ot"
    WCT = "wct"
    ADAIN = "adain"
    IDENTITY = "identity"


class SampleMatrix:
    """n x m matrix of feature samples, one row per spatial location/pixel."""

    __slots__ = ("data",)

    def __init__(self, data) -> None:
        a = np.asarray(data, dtype=np.float64)
        if a.ndim != 2:
            raise DimensionMismatchError(f"samples must be 2-D, got shape {a.shape}")
        if a.shape[0] < 1:
            raise GaussotError("sample matrix must contain at least one row")
        if not np.all(np.isfinite(a)):
            raise GaussotError("sample matrix has non-finite entries")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "data", a)

    def __setattr__(self, name, value):
        raise AttributeError("SampleMatrix is immutable")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def m(self) -> int:
        return self.data.shape[1]

    def __repr__(self) -> str:
        return f"SampleMatrix(n={self.n}, m={self.m})"


@dataclass(frozen=True)
class GaussianStats:
    """Mean/covariance summary of a feature distribution. n_samples is 0 for
    synthetic stats that did not come from data."""

    mean: np.ndarray
    cov: SpdMatrix
    n_samples: int = 0

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        if mean.shape[0] != self.cov.dim:
            raise DimensionMismatchError(
                f"mean dim {mean.shape[0]} != cov dim {self.cov.dim}"
            )
        mean = mean.copy()
        mean.setflags(write=False)
        object.__setattr__(self, "mean", mean)

    @property
    def dim(self) -> int:
        return self.cov.dim


@dataclass(frozen=True)
class TransportMap:
    """Affine map x -> dst_mean + linear @ (x - src_mean)."""

    kind: MapKind
    src_mean: np.ndarray
    linear: np.ndarray
    dst_mean: np.ndarray

    @property
    def dim(self) -> int:
        return self.linear.shape[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.dst_mean + (x - self.src_mean) @ self.linear.T


def estimate_stats(x: SampleMatrix, shrink: float = 0.0) -> GaussianStats:
    """Empirical mean and covariance with divisor n, optionally shrunk toward
    a scaled identity: cov + shrink * (trace/m) * I."""
    if shrink < 0.0:
        raise ValueError(f"shrink must be >= 0, got {shrink}")
    data = x.data
    mean = data.mean(axis=0)
    centered = data - mean
    cov = (centered.T @ centered) / x.n
    if shrink > 0.0:
        cov = cov + shrink * (np.trace(cov) / x.m) * np.eye(x.m)
    return GaussianStats(mean=mean, cov=SpdMatrix(cov), n_samples=x.n)


def w2_gaussian_sq(g1: GaussianStats, g2: GaussianStats) -> float:
    """Closed-form squared 2-Wasserstein distance between Gaussians:
    ||mu1 - mu2||^2 plus the squared Bures distance of the covariances."""
    if g1.dim != g2.dim:
        raise DimensionMismatchError(f"dimension mismatch: {g1.dim} vs {g2.dim}")
    d_mean = float(np.sum((g1.mean - g2.mean) ** 2))
    return d_mean + bures_distance_sq(g1.cov, g2.cov)


def monge_map(
    src: GaussianStats, dst: GaussianStats, rel_trunc: float = DEFAULT_REL_TRUNC
) -> TransportMap:
    """Closed-form optimal (Monge) map between the two Gaussians.

    linear = S^-1/2 (S^1/2 D S^1/2)^1/2 S^-1/2 with pseudo-inverse square
    roots under rel_trunc; always symmetric PSD.
    """
    if src.dim != dst.dim:
        raise DimensionMismatchError(f"dimension mismatch: {src.dim} vs {dst.dim}")
    sr = sqrtm(src.cov).array
    isr = inv_sqrtm(src.cov, rel_trunc).array
    mid = sqrtm(SpdMatrix._wrap(sr @ dst.cov.array @ sr)).array
    linear = _symmetrize(isr @ mid @ isr)
    return TransportMap(
        kind=MapKind.OT, src_mean=src.mean, linear=linear, dst_mean=dst.mean
    )


def wct_map(
    src: GaussianStats, dst: GaussianStats, rel_trunc: float = DEFAULT_REL_TRUNC
) -> TransportMap:
    """Whitening-coloring transform D^1/2 S^-1/2; coincides with the Monge
    map exactly when the covariances commute."""
    if src.dim != dst.dim:
        raise DimensionMismatchError(f"dimension mismatch: {src.dim} vs {dst.dim}")
    linear = sqrtm(dst.cov).array @ inv_sqrtm(src.cov, rel_trunc).array
    return TransportMap(
        kind=MapKind.WCT, src_mean=src.mean, linear=linear, dst_mean=dst.mean
    )


def adain_map(src: GaussianStats, dst: GaussianStats) -> TransportMap:
    """Per-channel normalization to the target mean and standard deviation
    (the diagonal approximation of the Monge map). Zero-variance source
    channels get gain 0 rather than NaN."""
    if src.dim != dst.dim:
        raise DimensionMismatchError(f"dimension mismatch: {src.dim} vs {dst.dim}")
    sd_src = np.sqrt(np.clip(np.diag(src.cov.array), 0.0, None))
    sd_dst = np.sqrt(np.clip(np.diag(dst.cov.array), 0.0, None))
    gains = np.divide(sd_dst, sd_src, out=np.zeros_like(sd_dst), where=sd_src > 0.0)
    return TransportMap(
        kind=MapKind.ADAIN,
        src_mean=src.mean,
        linear=np.diag(gains),
        dst_mean=dst.mean,
    )


def identity_map(dim: int) -> TransportMap:
    zero = np.zeros(dim)
    return TransportMap(
        kind=MapKind.IDENTITY, src_mean=zero, linear=np.eye(dim), dst_mean=zero
    )


def apply_map(t: TransportMap, x: SampleMatrix) -> SampleMatrix:
    """Pushforward on samples: row-wise application of the affine map."""
    if x.m != t.dim:
        raise DimensionMismatchError(f"dimension mismatch: samples m={x.m}, map dim={t.dim}")
    return SampleMatrix(t(x.data))


def mccann_pushforward(x: SampleMatrix, t_map: TransportMap, t: float) -> SampleMatrix:
    """Displacement interpolation ((1-t) Id + t T) applied row-wise.

    t=0 returns x unchanged, t=1 equals apply_map. The path is a Wasserstein
    geodesic when t_map is the optimal map.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must be in [0, 1], got {t}")
    if x.m != t_map.dim:
        raise DimensionMismatchError(
            f"dimension mismatch: samples m={x.m}, map dim={t_map.dim}"
        )
    if t == 0.0:
        return x
    if t == 1.0:
        return apply_map(t_map, x)
    return SampleMatrix((1.0 - t) * x.data + t * t_map(x.data))


def mccann_stats(
    g_c: GaussianStats,
    g_s: GaussianStats,
    t: float,
    rel_trunc: float = DEFAULT_REL_TRUNC,
) -> GaussianStats:
    """Closed-form Gaussian displacement interpolate: mean lerp, covariance
    M Sigma_c M with M = (1-t) I + t A, A the optimal linear map."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must be in [0, 1], got {t}")
    if t == 0.0:
        return g_c
    if t == 1.0:
        return g_s
    a = monge_map(g_c, g_s, rel_trunc).linear
    m_t = (1.0 - t) * np.eye(g_c.dim) + t * a
    cov_t = _symmetrize(m_t @ g_c.cov.array @ m_t.T)
    mean_t = (1.0 - t) * g_c.mean + t * g_s.mean
    return GaussianStats(mean=mean_t, cov=SpdMatrix(cov_t))
