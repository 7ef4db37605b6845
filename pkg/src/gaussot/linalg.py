"""Symmetric eigendecomposition, SPD matrix functions, and the two geodesic
covariance metrics (Bures and Fisher-Rao) everything else is built on.

All matrix functions go through a single symmetric eigendecomposition; at the
dimensions we care about (m <= ~1024) this is the simplest correct route.
Results of matrix-function chains are re-symmetrized before being wrapped,
since floating-point products of symmetric factors drift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SpdMatrix",
    "EigenDecomp",
    "GaussotError",
    "DimensionMismatchError",
    "EigenSolverError",
    "NotPositiveSemidefiniteError",
    "ZeroRankError",
    "NearSingularError",
    "DEFAULT_REL_TRUNC",
    "DEFAULT_REL_FLOOR",
    "sym_eigen",
    "sqrtm",
    "inv_sqrtm",
    "logm",
    "expm",
    "bures_distance_sq",
    "fisher_rao_distance_sq",
]

# Defaults for pseudo-inverse truncation and log floors, relative to the
# largest eigenvalue. Surfaced as parameters everywhere they matter.
DEFAULT_REL_TRUNC = 1e-7
DEFAULT_REL_FLOOR = 1e-10

# Negative eigenvalues within this band (relative to lambda_max) are treated
# as round-off and clamped to zero; anything below it is genuinely indefinite.
_NEG_EIG_BAND = 1e-10


class GaussotError(Exception):
    """Base class for all numeric/data errors raised by this package."""


class DimensionMismatchError(GaussotError):
    pass


class EigenSolverError(GaussotError):
    def __init__(self, dim: int, cond_estimate: float):
        self.dim = dim
        self.cond_estimate = cond_estimate
        super().__init__(
            f"symmetric eigensolver failed to converge (dim={dim}, "
            f"condition estimate={cond_estimate:.3e})"
        )


class NotPositiveSemidefiniteError(GaussotError):
    pass


class ZeroRankError(GaussotError):
    pass


class NearSingularError(GaussotError):
    pass


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


class SpdMatrix:
    """Symmetric positive semi-definite matrix.

    Construction symmetrizes the input and validates the spectrum: negative
    eigenvalues within -1e-10*lambda_max are clamped to zero, larger negatives
    are a constructor error. The wrapped array is frozen; all operations on
    SpdMatrix values are pure.
    """

    __slots__ = ("array",)

    def __init__(self, entries) -> None:
        a = np.asarray(entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatchError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise NotPositiveSemidefiniteError("matrix has non-finite entries")
        a = _symmetrize(a)
        w = np.linalg.eigvalsh(a)
        w_max = float(w[-1])
        scale = max(w_max, 0.0)
        if w[0] < -_NEG_EIG_BAND * scale - np.finfo(np.float64).tiny:
            raise NotPositiveSemidefiniteError(
                f"matrix is not PSD: min eigenvalue {w[0]:.3e} "
                f"(lambda_max={w_max:.3e})"
            )
        if w[0] < 0.0:
            # round-off band: rebuild with the negatives clamped
            w_full, v = np.linalg.eigh(a)
            a = _symmetrize((v * np.clip(w_full, 0.0, None)) @ v.T)
        a.setflags(write=False)
        object.__setattr__(self, "array", a)

    @classmethod
    def _wrap(cls, a: np.ndarray) -> "SpdMatrix":
        """Trusted constructor for matrices PSD by construction (V f(w) V^T
        with f >= 0). Symmetrizes but skips the spectral validation."""
        obj = object.__new__(cls)
        arr = _symmetrize(np.asarray(a, dtype=np.float64))
        arr.setflags(write=False)
        object.__setattr__(obj, "array", arr)
        return obj

    def __setattr__(self, name, value):
        raise AttributeError("SpdMatrix is immutable")

    @property
    def dim(self) -> int:
        return self.array.shape[0]

    def __repr__(self) -> str:
        return f"SpdMatrix(dim={self.dim})"


@dataclass(frozen=True)
class EigenDecomp:
    """Eigendecomposition of an SpdMatrix: values descending, vectors are the
    matching orthonormal columns."""

    values: np.ndarray
    vectors: np.ndarray


def _check_same_dim(a: SpdMatrix, b: SpdMatrix) -> None:
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dimension mismatch: {a.dim} vs {b.dim}")


def sym_eigen(a: SpdMatrix) -> EigenDecomp:
    """Full symmetric eigendecomposition, eigenvalues sorted descending."""
    try:
        w, v = np.linalg.eigh(a.array)
    except np.linalg.LinAlgError as exc:
        d = np.abs(np.diag(a.array))
        cond = float(np.max(d) / max(np.min(d), np.finfo(np.float64).tiny))
        raise EigenSolverError(a.dim, cond) from exc
    return EigenDecomp(values=w[::-1].copy(), vectors=v[:, ::-1].copy())


def _eig_apply(a: SpdMatrix, fn) -> np.ndarray:
    e = sym_eigen(a)
    return (e.vectors * fn(e.values)) @ e.vectors.T


def sqrtm(a: SpdMatrix) -> SpdMatrix:
    """Principal matrix square root: r with r @ r == a."""
    return SpdMatrix._wrap(_eig_apply(a, lambda w: np.sqrt(np.clip(w, 0.0, None))))


def inv_sqrtm(a: SpdMatrix, rel_trunc: float = DEFAULT_REL_TRUNC) -> SpdMatrix:
    """Pseudo-inverse square root with relative eigenvalue truncation.

    Eigenvalues below rel_trunc * lambda_max are mapped to 0, the rest to
    w**-0.5. Raises ZeroRankError when everything is truncated.
    """
    if not 0.0 <= rel_trunc < 1.0:
        raise ValueError(f"rel_trunc must be in [0, 1), got {rel_trunc}")
    e = sym_eigen(a)
    w_max = float(e.values[0])
    if w_max <= 0.0:
        raise ZeroRankError("zero-rank covariance")
    cutoff = rel_trunc * w_max
    kept = e.values > cutoff
    if not np.any(kept):
        raise ZeroRankError("zero-rank covariance")
    inv_w = np.where(kept, 1.0 / np.sqrt(np.where(kept, e.values, 1.0)), 0.0)
    return SpdMatrix._wrap((e.vectors * inv_w) @ e.vectors.T)


def logm(a: SpdMatrix, rel_floor: float = DEFAULT_REL_FLOOR) -> np.ndarray:
    """Matrix logarithm of a full-rank SPD matrix; returns a plain symmetric
    array (the log generally has negative eigenvalues)."""
    if rel_floor <= 0.0:
        raise ValueError(f"rel_floor must be > 0, got {rel_floor}")
    e = sym_eigen(a)
    w_max = float(e.values[0])
    if w_max <= 0.0 or e.values[-1] < rel_floor * w_max:
        raise NearSingularError("log of near-singular matrix")
    return _symmetrize((e.vectors * np.log(e.values)) @ e.vectors.T)


def expm(s: np.ndarray) -> SpdMatrix:
    """Matrix exponential of a symmetric matrix; always SPD."""
    s = _symmetrize(np.asarray(s, dtype=np.float64))
    w, v = np.linalg.eigh(s)
    return SpdMatrix._wrap((v * np.exp(w)) @ v.T)


def bures_distance_sq(a: SpdMatrix, b: SpdMatrix) -> float:
    """Squared Bures distance trace(a + b - 2(a^1/2 b a^1/2)^1/2).

    Symmetric in its arguments; tiny negative round-off is clamped to 0.
    """
    _check_same_dim(a, b)
    ra = sqrtm(a).array
    inner = _symmetrize(ra @ b.array @ ra)
    w = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    val = float(np.trace(a.array) + np.trace(b.array) - 2.0 * np.sum(np.sqrt(w)))
    return max(val, 0.0)


def fisher_rao_distance_sq(
    a: SpdMatrix, b: SpdMatrix, rel_floor: float = DEFAULT_REL_FLOOR
) -> float:
    """Squared affine-invariant (Fisher-Rao) distance
    ||log(a^-1/2 b a^-1/2)||_F^2. Both inputs must be full rank relative to
    rel_floor."""
    _check_same_dim(a, b)
    for mat in (a, b):
        e = np.linalg.eigvalsh(mat.array)
        if e[-1] <= 0.0 or e[0] < rel_floor * e[-1]:
            raise NearSingularError("fisher_rao_distance_sq on near-singular input")
    ea = sym_eigen(a)
    isr = (ea.vectors / np.sqrt(ea.values)) @ ea.vectors.T
    mid = _symmetrize(isr @ b.array @ isr)
    w = np.linalg.eigvalsh(mid)
    return float(np.sum(np.log(w) ** 2))
