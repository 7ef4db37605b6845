"""Bit-exact file formats shared with external feature extractors:

* tensor files ("GOTF"): float32 feature tensors, row-major little-endian;
* stats files ("GOTS"): float64 mean/covariance summaries;
* manifests: per-level tensor paths and spatial shapes for a feature pyramid;
* 8-bit RGB PNG images mapped to/from [0, 1].
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .linalg import GaussotError, SpdMatrix
from .transport import GaussianStats, SampleMatrix

__all__ = [
    "TENSOR_MAGIC",
    "STATS_MAGIC",
    "FormatError",
    "BadMagicError",
    "BadVersionError",
    "TruncatedFileError",
    "NonFiniteError",
    "UnsupportedDtypeError",
    "ImageFormatError",
    "ManifestError",
    "ManifestEntry",
    "Manifest",
    "read_tensor",
    "write_tensor",
    "read_stats",
    "write_stats",
    "read_manifest",
    "write_manifest",
    "read_image",
    "write_image",
]

TENSOR_MAGIC = b"GOTF"
STATS_MAGIC = b"GOTS"
_VERSION = 1
_DTYPE_F32 = 1


class FormatError(GaussotError):
    pass


class BadMagicError(FormatError):
    pass


class BadVersionError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class NonFiniteError(FormatError):
    pass


class UnsupportedDtypeError(FormatError):
    pass


class ImageFormatError(FormatError):
    pass


class ManifestError(FormatError):
    pass


def _take(buf: bytes, offset: int, count: int, path, what: str) -> tuple[bytes, int]:
    if offset + count > len(buf):
        raise TruncatedFileError(f"{path}: truncated while reading {what}")
    return buf[offset : offset + count], offset + count


def read_tensor(path) -> tuple[SampleMatrix, tuple[int, ...]]:
    """Read a tensor file. 3-D tensors with dims (C, H, W) come back as an
    (H*W) x C sample matrix (channels become columns); 2-D tensors with dims
    (n, m) are returned as-is. The original dims tuple is returned alongside.
    """
    buf = Path(path).read_bytes()
    magic, off = _take(buf, 0, 4, path, "magic")
    if magic != TENSOR_MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected {TENSOR_MAGIC!r}")
    raw, off = _take(buf, off, 4, path, "version")
    version = struct.unpack("<I", raw)[0]
    if version != _VERSION:
        raise BadVersionError(f"{path}: unsupported version {version}")
    raw, off = _take(buf, off, 2, path, "header")
    dtype_code, ndim = struct.unpack("<BB", raw)
    if dtype_code != _DTYPE_F32:
        raise UnsupportedDtypeError(f"{path}: unsupported dtype code {dtype_code}")
    raw, off = _take(buf, off, 4 * ndim, path, "dims")
    dims = struct.unpack(f"<{ndim}I", raw)
    count = int(np.prod(dims)) if ndim else 0
    raw, off = _take(buf, off, 4 * count, path, "payload")
    if off != len(buf):
        raise TruncatedFileError(f"{path}: {len(buf) - off} trailing bytes")
    values = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(f"{path}: payload contains non-finite values")
    if ndim == 2:
        data = values.reshape(dims)
    elif ndim == 3:
        c, h, w = dims
        data = values.reshape(c, h * w).T
    else:
        raise UnsupportedDtypeError(f"{path}: unsupported ndim {ndim}")
    return SampleMatrix(data), dims


def write_tensor(path, x: SampleMatrix, shape: tuple[int, ...] | None = None) -> None:
    """Write a tensor file. With shape=(C, H, W) the n x m sample matrix is
    stored channel-major (m must equal C and n must equal H*W); without a
    shape it is stored as a 2-D (n, m) tensor."""
    if shape is not None:
        c, h, w = shape
        if x.m != c or x.n != h * w:
            raise FormatError(
                f"sample matrix {x.n}x{x.m} does not match shape (C,H,W)={shape}"
            )
        dims = (c, h, w)
        payload = np.ascontiguousarray(x.data.T, dtype="<f4")
    else:
        dims = (x.n, x.m)
        payload = np.ascontiguousarray(x.data, dtype="<f4")
    header = TENSOR_MAGIC + struct.pack("<IBB", _VERSION, _DTYPE_F32, len(dims))
    header += struct.pack(f"<{len(dims)}I", *dims)
    Path(path).write_bytes(header + payload.tobytes())


def read_stats(path) -> GaussianStats:
    buf = Path(path).read_bytes()
    magic, off = _take(buf, 0, 4, path, "magic")
    if magic != STATS_MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected {STATS_MAGIC!r}")
    raw, off = _take(buf, off, 4, path, "version")
    version = struct.unpack("<I", raw)[0]
    if version != _VERSION:
        raise BadVersionError(f"{path}: unsupported version {version}")
    raw, off = _take(buf, off, 12, path, "header")
    m, n_samples = struct.unpack("<IQ", raw)
    raw, off = _take(buf, off, 8 * m, path, "mean")
    mean = np.frombuffer(raw, dtype="<f8")
    raw, off = _take(buf, off, 8 * m * m, path, "covariance")
    cov = np.frombuffer(raw, dtype="<f8").reshape(m, m)
    if off != len(buf):
        raise TruncatedFileError(f"{path}: {len(buf) - off} trailing bytes")
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
        raise NonFiniteError(f"{path}: non-finite statistics")
    return GaussianStats(mean=mean.copy(), cov=SpdMatrix(cov), n_samples=n_samples)


def write_stats(path, g: GaussianStats) -> None:
    m = g.dim
    header = STATS_MAGIC + struct.pack("<IIQ", _VERSION, m, g.n_samples)
    body = np.ascontiguousarray(g.mean, dtype="<f8").tobytes()
    body += np.ascontiguousarray(g.cov.array, dtype="<f8").tobytes()
    Path(path).write_bytes(header + body)


@dataclass(frozen=True)
class ManifestEntry:
    level: int
    input_path: str
    output_path: str
    shape: tuple[int, int, int]  # (C, H, W)


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...]

    @property
    def levels(self) -> int:
        return len(self.entries)

    def entry(self, level: int) -> ManifestEntry:
        for e in self.entries:
            if e.level == level:
                return e
        raise ManifestError(f"manifest has no level {level}")


def read_manifest(path) -> Manifest:
    """Parse a manifest: one `level=R input=... output=... shape=C,H,W` line
    per pyramid level, levels contiguous 1..R. `#` starts a comment."""
    entries = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        fields = {}
        for token in line.split():
            if "=" not in token:
                raise ManifestError(f"{path}:{lineno}: bad token {token!r}")
            key, value = token.split("=", 1)
            fields[key] = value
        try:
            shape = tuple(int(v) for v in fields["shape"].split(","))
            if len(shape) != 3:
                raise ValueError
            entries.append(
                ManifestEntry(
                    level=int(fields["level"]),
                    input_path=fields["input"],
                    output_path=fields["output"],
                    shape=shape,
                )
            )
        except (KeyError, ValueError) as exc:
            raise ManifestError(f"{path}:{lineno}: malformed entry: {line!r}") from exc
    entries.sort(key=lambda e: e.level)
    if [e.level for e in entries] != list(range(1, len(entries) + 1)):
        raise ManifestError(f"{path}: levels must be contiguous 1..R")
    if not entries:
        raise ManifestError(f"{path}: empty manifest")
    return Manifest(entries=tuple(entries))


def write_manifest(path, manifest: Manifest) -> None:
    lines = ["# gaussot tensor manifest v1"]
    for e in sorted(manifest.entries, key=lambda e: e.level):
        c, h, w = e.shape
        lines.append(
            f"level={e.level} input={e.input_path} output={e.output_path} shape={c},{h},{w}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_image(path) -> np.ndarray:
    """Load an image as an H x W x 3 float64 array in [0, 1] (v / 255)."""
    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB")
            arr = np.asarray(rgb, dtype=np.float64) / 255.0
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageFormatError(f"{path}: cannot decode image: {exc}") from exc
    return arr


def write_image(path, image: np.ndarray) -> None:
    """Write an H x W x 3 array in [0, 1] as an 8-bit RGB PNG; values are
    clamped then quantized with round(v * 255)."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ImageFormatError(f"expected an HxWx3 image, got shape {image.shape}")
    quantized = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(quantized, mode="RGB").save(path, format="PNG")
