"""End-to-end stylization: single style transfer, content/style displacement
interpolation, style mixing via covariance barycenters, and the coarse-to-fine
multi-resolution loop, abstracted over a feature codec.

Codecs turn an opaque image token into feature samples per pyramid level:
PixelCodec works on in-memory RGB arrays (one level, m=3), FileTensorCodec on
externally produced tensor files described by a manifest, optionally chained
to an external encode/decode command so the multi-level loop can re-encode
decoded images.
"""

from __future__ import annotations

import shlex
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fileio
from .linalg import DEFAULT_REL_TRUNC, GaussotError, SpdMatrix
from .means import FrechetSpec, MeanReport, Metric, _one_hot_index, frechet_mean
from .transport import (
    GaussianStats,
    MapKind,
    SampleMatrix,
    adain_map,
    apply_map,
    estimate_stats,
    mccann_pushforward,
    monge_map,
    wct_map,
)

__all__ = [
    "PIPELINE_SHRINK",
    "Direction",
    "MixRequest",
    "MixResult",
    "LevelDiagnostics",
    "TransferResult",
    "FeatureCodec",
    "PixelCodec",
    "FileTensorCodec",
    "stylize",
    "mix_styles",
    "multires_transfer",
    "weight_grid",
]

# Feature matrices with n < m are rank deficient; the pipeline shrinks by
# default while the library-level estimator does not.
PIPELINE_SHRINK = 1e-5


class Direction:
    COARSE_TO_FINE = "coarse-to-fine"
    FINE_TO_COARSE = "fine-to-coarse"


@dataclass(frozen=True)
class MixRequest:
    """Everything one stylization needs besides the content samples."""

    weights: np.ndarray
    metric: Metric = Metric.BURES
    map_kind: MapKind = MapKind.OT
    t: float = 1.0
    include_content: bool = False
    direction: str = Direction.COARSE_TO_FINE
    styles: tuple[GaussianStats, ...] | None = None
    shrink: float = PIPELINE_SHRINK
    rel_trunc: float = DEFAULT_REL_TRUNC
    max_iter: int = 50
    step: float = 0.01
    rel_tol: float = 1e-9

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"t must be in [0, 1], got {self.t}")
        if self.direction not in (Direction.COARSE_TO_FINE, Direction.FINE_TO_COARSE):
            raise ValueError(f"unknown direction {self.direction!r}")
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1).copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.styles is not None:
            object.__setattr__(self, "styles", tuple(self.styles))

    def frechet_spec(self) -> FrechetSpec:
        return FrechetSpec(
            metric=self.metric,
            weights=self.weights,
            max_iter=self.max_iter,
            step=self.step,
            rel_tol=self.rel_tol,
            rel_trunc=self.rel_trunc,
        )


@dataclass(frozen=True)
class MixResult:
    samples: SampleMatrix
    barycenter: GaussianStats
    report: MeanReport


@dataclass(frozen=True)
class LevelDiagnostics:
    level: int
    clamp_fraction: float
    barycenter_iterations: int
    barycenter_residual: float


@dataclass(frozen=True)
class TransferResult:
    image: object  # codec image token (array for PixelCodec, path for files)
    levels: tuple[LevelDiagnostics, ...]


class FeatureCodec:
    """Encode/decode between image tokens and per-level feature samples."""

    levels: int = 1

    def encode(self, image, level: int) -> tuple[SampleMatrix, tuple[int, int, int]]:
        raise NotImplementedError

    def decode(self, samples: SampleMatrix, shape, level: int):
        """Returns (image token accepted by encode, info dict)."""
        raise NotImplementedError


class PixelCodec(FeatureCodec):
    """Lossless single-level codec over RGB pixel clouds (m=3). Decoding
    clamps out-of-gamut values to [0, 1] and reports the clamped fraction."""

    levels = 1

    def encode(self, image, level: int = 1):
        self._check_level(level)
        arr = np.asarray(image, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise GaussotError(f"expected an HxWx3 image, got shape {arr.shape}")
        h, w, _ = arr.shape
        return SampleMatrix(arr.reshape(h * w, 3)), (3, h, w)

    def decode(self, samples: SampleMatrix, shape, level: int = 1):
        self._check_level(level)
        c, h, w = shape
        if samples.m != c or samples.n != h * w:
            raise GaussotError(
                f"samples {samples.n}x{samples.m} do not match shape (C,H,W)={shape}"
            )
        clamped = np.clip(samples.data, 0.0, 1.0)
        frac = float(np.mean(np.any(clamped != samples.data, axis=1)))
        return clamped.reshape(h, w, c), {"clamp_fraction": frac}

    @staticmethod
    def _check_level(level: int) -> None:
        if level != 1:
            raise GaussotError(f"PixelCodec has a single level, got {level}")


class FileTensorCodec(FeatureCodec):
    """Codec over externally produced tensor files.

    Image tokens are file paths: a manifest (.txt) maps to pre-extracted
    per-level tensors, while image paths (anything else) require bridge_cmd,
    an external command invoked as

        <bridge_cmd> extract --level R --image IN.png --out OUT.gotf
        <bridge_cmd> decode  --level R --tensor IN.gotf --out OUT.png

    decode() writes the transformed tensor to the content manifest's output
    path for that level, then (when a bridge is configured) asks the bridge
    to render it back to an image in workdir.
    """

    def __init__(self, manifest_path, bridge_cmd: str | None = None, workdir=None):
        self.manifest_path = str(manifest_path)
        self.manifest = fileio.read_manifest(manifest_path)
        self.levels = self.manifest.levels
        self.bridge_cmd = bridge_cmd
        self.workdir = Path(workdir) if workdir is not None else Path(self.manifest_path).parent
        self._manifest_dir = Path(self.manifest_path).parent

    def _resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else self._manifest_dir / path

    def _run_bridge(self, args: list[str]) -> None:
        cmd = shlex.split(self.bridge_cmd) + args
        proc = subprocess.run(cmd, capture_output=True, text=True)
        if proc.returncode != 0:
            raise GaussotError(
                f"bridge command failed ({proc.returncode}): {' '.join(cmd)}\n{proc.stderr}"
            )

    def encode(self, image, level: int):
        token = str(image)
        if token == self.manifest_path or token.endswith(".manifest") or token.endswith(".txt"):
            manifest = (
                self.manifest
                if token == self.manifest_path
                else fileio.read_manifest(token)
            )
            entry = manifest.entry(level)
            base = Path(token).parent
            in_path = Path(entry.input_path)
            if not in_path.is_absolute():
                in_path = base / in_path
            samples, dims = fileio.read_tensor(in_path)
            return samples, entry.shape
        if self.bridge_cmd is None:
            raise GaussotError(
                "re-encoding a decoded image requires a bridge command "
                "(multi-level transfer without --bridge-cmd is not possible)"
            )
        out = self.workdir / f"reencode_l{level}_{Path(token).stem}.gotf"
        self._run_bridge(
            ["extract", "--level", str(level), "--image", token, "--out", str(out)]
        )
        samples, dims = fileio.read_tensor(out)
        if len(dims) != 3:
            raise GaussotError(f"bridge produced a non-3D tensor at level {level}")
        return samples, dims

    def decode(self, samples: SampleMatrix, shape, level: int):
        entry = self.manifest.entry(level)
        out_tensor = self._resolve(entry.output_path)
        out_tensor.parent.mkdir(parents=True, exist_ok=True)
        fileio.write_tensor(out_tensor, samples, shape)
        if self.bridge_cmd is None:
            return str(out_tensor), {"clamp_fraction": 0.0}
        out_image = self.workdir / f"decoded_l{level}.png"
        self._run_bridge(
            [
                "decode",
                "--level",
                str(level),
                "--tensor",
                str(out_tensor),
                "--out",
                str(out_image),
            ]
        )
        return str(out_image), {"clamp_fraction": 0.0}


def stylize(
    content: SampleMatrix,
    style: GaussianStats,
    kind: MapKind = MapKind.OT,
    t: float = 1.0,
    shrink: float = PIPELINE_SHRINK,
    rel_trunc: float = DEFAULT_REL_TRUNC,
) -> SampleMatrix:
    """Single-style transfer of a feature cloud: estimate content stats,
    build the requested map, interpolate with parameter t (t=1 is plain
    transfer, t=0 is a no-op)."""
    if t == 0.0:
        return content
    src = estimate_stats(content, shrink=shrink)
    if kind is MapKind.OT:
        t_map = monge_map(src, style, rel_trunc)
    elif kind is MapKind.WCT:
        t_map = wct_map(src, style, rel_trunc)
    elif kind is MapKind.ADAIN:
        t_map = adain_map(src, style)
    else:
        raise ValueError(f"unsupported map kind {kind!r}")
    return mccann_pushforward(content, t_map, t)


def mix_styles(content: SampleMatrix, req: MixRequest) -> MixResult:
    """Mix the requested styles (and optionally the content itself) into a
    barycenter, then transport the content samples to it optimally."""
    if not req.styles:
        raise GaussotError("mix_styles needs at least one style")
    src = estimate_stats(content, shrink=req.shrink)
    spec = req.frechet_spec()
    entries = list(req.styles) + ([src] if req.include_content else [])
    hot = _one_hot_index(spec.weights) if len(spec.weights) == len(entries) else None
    if hot is not None:
        bary = entries[hot]
        report = MeanReport(result=bary.cov, iterations_used=0, final_residual=0.0)
    else:
        report = frechet_mean([g.cov for g in entries], spec)
        mean = np.zeros(entries[0].dim)
        for lam, g in zip(spec.weights, entries):
            mean = mean + lam * g.mean
        bary = GaussianStats(mean=mean, cov=report.result)
    if req.map_kind is MapKind.OT:
        t_map = monge_map(src, bary, req.rel_trunc)
    elif req.map_kind is MapKind.WCT:
        t_map = wct_map(src, bary, req.rel_trunc)
    elif req.map_kind is MapKind.ADAIN:
        t_map = adain_map(src, bary)
    else:
        raise ValueError(f"unsupported map kind {req.map_kind!r}")
    out = mccann_pushforward(content, t_map, req.t)
    return MixResult(samples=out, barycenter=bary, report=report)


def multires_transfer(
    content_image,
    style_images,
    codec: FeatureCodec,
    req: MixRequest,
) -> TransferResult:
    """Multi-resolution transfer loop.

    Coarse-to-fine: at each level (coarsest first) the style images are
    re-encoded from their originals, mixed into a level-local barycenter,
    the current content features are transported to it, and the decoded
    image feeds the next (finer) level. fine-to-coarse runs the same loop
    from the finest level up.
    """
    if len(style_images) == 0:
        raise GaussotError("need at least one style image")
    expected = len(style_images) + (1 if req.include_content else 0)
    if len(req.weights) != expected:
        raise GaussotError(
            f"{len(req.weights)} weights for {expected} measures"
        )
    if req.direction == Direction.COARSE_TO_FINE:
        order = range(codec.levels, 0, -1)
    else:
        order = range(1, codec.levels + 1)
    current = content_image
    diagnostics = []
    for level in order:
        samples, shape = codec.encode(current, level)
        style_stats = tuple(
            estimate_stats(codec.encode(s, level)[0], shrink=req.shrink)
            for s in style_images
        )
        level_req = MixRequest(
            weights=req.weights,
            metric=req.metric,
            map_kind=req.map_kind,
            t=req.t,
            include_content=req.include_content,
            styles=style_stats,
            shrink=req.shrink,
            rel_trunc=req.rel_trunc,
            max_iter=req.max_iter,
            step=req.step,
            rel_tol=req.rel_tol,
        )
        result = mix_styles(samples, level_req)
        current, info = codec.decode(result.samples, shape, level)
        diagnostics.append(
            LevelDiagnostics(
                level=level,
                clamp_fraction=float(info.get("clamp_fraction", 0.0)),
                barycenter_iterations=result.report.iterations_used,
                barycenter_residual=result.report.final_residual,
            )
        )
    return TransferResult(image=current, levels=tuple(diagnostics))


def weight_grid(corner_count: int, resolution: int) -> list[np.ndarray]:
    """Interpolation weight lattices for blending corner styles.

    2 corners: linear blend along a segment; 3: barycentric coordinates on a
    triangular lattice (row-major, corner order (1,0,0) top); 4: bilinear
    weights on a resolution x resolution square, row-major with corner order
    (top-left, top-right, bottom-left, bottom-right). Every vector sums to 1
    and lattice corners are exactly one-hot.
    """
    if resolution < 2:
        raise ValueError(f"resolution must be >= 2, got {resolution}")
    grid: list[np.ndarray] = []
    steps = resolution - 1
    if corner_count == 2:
        for i in range(resolution):
            u = i / steps
            grid.append(np.array([1.0 - u, u]))
    elif corner_count == 3:
        for i in range(resolution):
            for j in range(resolution - i):
                k = steps - i - j
                grid.append(np.array([k / steps, j / steps, i / steps]))
    elif corner_count == 4:
        for i in range(resolution):
            v = i / steps
            for j in range(resolution):
                u = j / steps
                grid.append(
                    np.array(
                        [
                            (1.0 - u) * (1.0 - v),
                            u * (1.0 - v),
                            (1.0 - u) * v,
                            u * v,
                        ]
                    )
                )
    else:
        raise ValueError(f"unsupported corner count {corner_count}")
    return grid
