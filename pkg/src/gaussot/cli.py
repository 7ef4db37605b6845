"""Command-line surface: stats, distance, transfer, barycenter, mix, grid.

Exit codes: 0 success, 1 usage error, 2 numeric/data error. Diagnostics go to
stdout as line-oriented key=value text.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import fileio
from .linalg import (
    DEFAULT_REL_FLOOR,
    DEFAULT_REL_TRUNC,
    GaussotError,
    bures_distance_sq,
    fisher_rao_distance_sq,
)
from .means import FrechetSpec, Metric, barycenter_stats, frechet_mean
from .pipeline import (
    PIPELINE_SHRINK,
    Direction,
    FileTensorCodec,
    MixRequest,
    PixelCodec,
    mix_styles,
    multires_transfer,
    stylize,
    weight_grid,
)
from .transport import (
    GaussianStats,
    MapKind,
    SampleMatrix,
    estimate_stats,
    w2_gaussian_sq,
)

__all__ = ["run", "main"]

_METRIC_NAMES = {
    "wasserstein": Metric.BURES,
    "fisherrao": Metric.FISHER_RAO,
    "arithmetic": Metric.ARITHMETIC,
    "harmonic": Metric.HARMONIC,
}

_MAP_NAMES = {"ot": MapKind.OT, "wct": MapKind.WCT, "adain": MapKind.ADAIN}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _emit(key, value):
    if isinstance(value, float):
        print(f"{key}={value!r}")
    else:
        print(f"{key}={value}")


def _load_stats(path: str, shrink: float) -> GaussianStats:
    """Stats from a .gots file, or estimated from an image / tensor file."""
    p = str(path)
    if p.endswith(".gots"):
        return fileio.read_stats(p)
    if p.endswith(".gotf"):
        samples, _ = fileio.read_tensor(p)
        return estimate_stats(samples, shrink=shrink)
    image = fileio.read_image(p)
    samples, _ = PixelCodec().encode(image)
    return estimate_stats(samples, shrink=shrink)


def _parse_weights(text: str, expected: int) -> np.ndarray:
    try:
        w = np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise _UsageError(f"bad --weights value {text!r}") from exc
    if len(w) != expected:
        raise _UsageError(f"expected {expected} weights, got {len(w)}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise _UsageError("weights must be non-negative and sum to 1")
    return w


def _check_unit(name: str, value: float) -> float:
    if not 0.0 <= value <= 1.0:
        raise _UsageError(f"--{name} must be in [0, 1], got {value}")
    return value


def _check_nonneg(name: str, value: float) -> float:
    if value < 0.0:
        raise _UsageError(f"--{name} must be >= 0, got {value}")
    return value


def _add_numeric_flags(p: argparse.ArgumentParser, shrink_default: float) -> None:
    p.add_argument("--shrink", type=float, default=shrink_default)
    p.add_argument("--rel-trunc", type=float, default=DEFAULT_REL_TRUNC)
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--rel-tol", type=float, default=1e-9)


def _build_parser() -> _Parser:
    parser = _Parser(prog="gaussot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="estimate Gaussian stats of an image/tensor")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--shrink", type=float, default=0.0)

    p = sub.add_parser("distance", help="distance between two stats files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument(
        "--metric",
        choices=["w2", "bures", "fisher-rao", "frobenius"],
        default="w2",
    )
    p.add_argument("--rel-floor", type=float, default=DEFAULT_REL_FLOOR)
    p.add_argument("--shrink", type=float, default=0.0)

    p = sub.add_parser("transfer", help="single-style transfer")
    p.add_argument("--content", required=True)
    p.add_argument("--style", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--map", choices=sorted(_MAP_NAMES), default="ot")
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--out-stats", help="write pre-clamp output stats here")
    p.add_argument("--codec", choices=["pixel", "tensor"], default="pixel")
    p.add_argument("--manifest", help="content manifest (tensor codec)")
    p.add_argument("--style-manifests", nargs="*", default=None)
    p.add_argument("--bridge-cmd")
    p.add_argument("--workdir")
    p.add_argument(
        "--direction",
        choices=[Direction.COARSE_TO_FINE, Direction.FINE_TO_COARSE],
        default=Direction.COARSE_TO_FINE,
    )
    _add_numeric_flags(p, PIPELINE_SHRINK)

    p = sub.add_parser("barycenter", help="Frechet mean of stats files")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--mean", choices=sorted(_METRIC_NAMES), default="wasserstein")
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True)
    _add_numeric_flags(p, 0.0)

    p = sub.add_parser("mix", help="mix styles into a barycenter and transfer")
    p.add_argument("--content", required=True)
    p.add_argument("--styles", nargs="+", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--metric", choices=sorted(_METRIC_NAMES), default="wasserstein")
    p.add_argument("--map", choices=sorted(_MAP_NAMES), default="ot")
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--with-content", action="store_true")
    p.add_argument("--out-stats")
    p.add_argument("--codec", choices=["pixel", "tensor"], default="pixel")
    p.add_argument("--manifest")
    p.add_argument("--style-manifests", nargs="*", default=None)
    p.add_argument("--bridge-cmd")
    p.add_argument("--workdir")
    p.add_argument(
        "--direction",
        choices=[Direction.COARSE_TO_FINE, Direction.FINE_TO_COARSE],
        default=Direction.COARSE_TO_FINE,
    )
    _add_numeric_flags(p, PIPELINE_SHRINK)

    p = sub.add_parser("grid", help="weight-grid stylization with montage")
    p.add_argument("--content", required=True)
    p.add_argument("--styles", nargs="+", required=True)
    p.add_argument("--corners", type=int, choices=[2, 3, 4], required=True)
    p.add_argument("--resolution", type=int, required=True)
    p.add_argument("--outdir", required=True)
    p.add_argument("--metric", choices=sorted(_METRIC_NAMES), default="wasserstein")
    p.add_argument("--with-content", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    _add_numeric_flags(p, PIPELINE_SHRINK)
    return parser


def _cmd_stats(args) -> int:
    g = _load_stats(args.input, _check_nonneg("shrink", args.shrink))
    fileio.write_stats(args.out, g)
    _emit("m", g.dim)
    _emit("n_samples", g.n_samples)
    _emit("cov_trace", float(np.trace(g.cov.array)))
    return 0


def _cmd_distance(args) -> int:
    a = _load_stats(args.a, _check_nonneg("shrink", args.shrink))
    b = _load_stats(args.b, args.shrink)
    if args.metric == "w2":
        _emit("w2_sq", w2_gaussian_sq(a, b))
    elif args.metric == "bures":
        _emit("bures_sq", bures_distance_sq(a.cov, b.cov))
    elif args.metric == "fisher-rao":
        _emit("fisher_rao_sq", fisher_rao_distance_sq(a.cov, b.cov, args.rel_floor))
    else:
        _emit("frobenius_sq", float(np.sum((a.cov.array - b.cov.array) ** 2)))
    return 0


def _tensor_codec(args) -> FileTensorCodec:
    if not args.manifest:
        raise _UsageError("--codec tensor requires --manifest")
    return FileTensorCodec(args.manifest, bridge_cmd=args.bridge_cmd, workdir=args.workdir)


def _style_tokens(args, styles: list[str]) -> list[str]:
    if args.style_manifests:
        if len(args.style_manifests) != len(styles):
            raise _UsageError("--style-manifests count must match styles")
        return list(args.style_manifests)
    return styles


def _report_levels(result) -> None:
    for info in result.levels:
        _emit(f"level_{info.level}_clamp_fraction", info.clamp_fraction)
        _emit(f"level_{info.level}_iterations", info.barycenter_iterations)
        _emit(f"level_{info.level}_residual", info.barycenter_residual)


def _cmd_transfer(args) -> int:
    t = _check_unit("t", args.t)
    shrink = _check_nonneg("shrink", args.shrink)
    kind = _MAP_NAMES[args.map]
    if args.codec == "tensor":
        codec = _tensor_codec(args)
        req = MixRequest(
            weights=np.array([1.0]),
            map_kind=kind,
            t=t,
            direction=args.direction,
            shrink=shrink,
            rel_trunc=args.rel_trunc,
            max_iter=args.max_iter,
            step=args.step,
            rel_tol=args.rel_tol,
        )
        result = multires_transfer(
            args.manifest, _style_tokens(args, [args.style]), codec, req
        )
        _report_levels(result)
        _emit("output", result.image)
        return 0
    codec = PixelCodec()
    content = fileio.read_image(args.content)
    samples, shape = codec.encode(content)
    style_img = fileio.read_image(args.style)
    style_stats = estimate_stats(codec.encode(style_img)[0], shrink=shrink)
    out = stylize(samples, style_stats, kind, t, shrink, args.rel_trunc)
    if args.out_stats:
        fileio.write_stats(args.out_stats, estimate_stats(out, shrink=0.0))
    image, info = codec.decode(out, shape)
    fileio.write_image(args.out, image)
    _emit("clamp_fraction", info["clamp_fraction"])
    _emit("n", out.n)
    _emit("output", args.out)
    return 0


def _cmd_barycenter(args) -> int:
    weights = _parse_weights(args.weights, len(args.inputs))
    stats = [_load_stats(p, _check_nonneg("shrink", args.shrink)) for p in args.inputs]
    spec = FrechetSpec(
        metric=_METRIC_NAMES[args.mean],
        weights=weights,
        max_iter=args.max_iter,
        step=args.step,
        rel_tol=args.rel_tol,
        rel_trunc=args.rel_trunc,
    )
    report = frechet_mean([g.cov for g in stats], spec)
    bary = barycenter_stats(stats, None, spec)
    fileio.write_stats(args.out, bary)
    _emit("iterations", report.iterations_used)
    _emit("residual", report.final_residual)
    _emit("cov_trace", float(np.trace(bary.cov.array)))
    return 0


def _pixel_mix_request(args, n_measures: int) -> MixRequest:
    weights = _parse_weights(args.weights, n_measures)
    return MixRequest(
        weights=weights,
        metric=_METRIC_NAMES[args.metric],
        map_kind=_MAP_NAMES[args.map],
        t=_check_unit("t", args.t),
        include_content=args.with_content,
        shrink=_check_nonneg("shrink", args.shrink),
        rel_trunc=args.rel_trunc,
        max_iter=args.max_iter,
        step=args.step,
        rel_tol=args.rel_tol,
    )


def _cmd_mix(args) -> int:
    n_measures = len(args.styles) + (1 if args.with_content else 0)
    req = _pixel_mix_request(args, n_measures)
    if args.codec == "tensor":
        codec = _tensor_codec(args)
        req = MixRequest(
            weights=req.weights,
            metric=req.metric,
            map_kind=req.map_kind,
            t=req.t,
            include_content=req.include_content,
            direction=args.direction,
            shrink=req.shrink,
            rel_trunc=req.rel_trunc,
            max_iter=req.max_iter,
            step=req.step,
            rel_tol=req.rel_tol,
        )
        result = multires_transfer(
            args.manifest, _style_tokens(args, args.styles), codec, req
        )
        _report_levels(result)
        _emit("output", result.image)
        return 0
    codec = PixelCodec()
    content = fileio.read_image(args.content)
    samples, shape = codec.encode(content)
    style_stats = tuple(
        estimate_stats(codec.encode(fileio.read_image(p))[0], shrink=req.shrink)
        for p in args.styles
    )
    req = MixRequest(
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
    result = mix_styles(samples, req)
    if args.out_stats:
        fileio.write_stats(args.out_stats, estimate_stats(result.samples, shrink=0.0))
    image, info = codec.decode(result.samples, shape)
    fileio.write_image(args.out, image)
    _emit("clamp_fraction", info["clamp_fraction"])
    _emit("iterations", result.report.iterations_used)
    _emit("residual", result.report.final_residual)
    _emit("output", args.out)
    return 0


def _cmd_grid(args) -> int:
    from . import report as report_mod

    n_corners = len(args.styles) + (1 if args.with_content else 0)
    if n_corners != args.corners:
        raise _UsageError(
            f"--corners {args.corners} but {n_corners} corner measures given"
        )
    if args.resolution < 2:
        raise _UsageError("--resolution must be >= 2")
    if args.jobs < 1:
        raise _UsageError("--jobs must be >= 1")
    shrink = _check_nonneg("shrink", args.shrink)
    codec = PixelCodec()
    content = fileio.read_image(args.content)
    samples, shape = codec.encode(content)
    style_stats = tuple(
        estimate_stats(codec.encode(fileio.read_image(p))[0], shrink=shrink)
        for p in args.styles
    )
    grid = weight_grid(args.corners, args.resolution)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    def run_cell(item):
        idx, weights = item
        req = MixRequest(
            weights=weights,
            metric=_METRIC_NAMES[args.metric],
            include_content=args.with_content,
            styles=style_stats,
            shrink=shrink,
            rel_trunc=args.rel_trunc,
            max_iter=args.max_iter,
            step=args.step,
            rel_tol=args.rel_tol,
        )
        result = mix_styles(samples, req)
        image, info = codec.decode(result.samples, shape)
        cell_path = outdir / f"cell_{idx:03d}.png"
        fileio.write_image(cell_path, image)
        return idx, image, info, result.report, cell_path

    items = list(enumerate(grid))
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            outputs = list(pool.map(run_cell, items))
    else:
        outputs = [run_cell(item) for item in items]

    rows = []
    images = []
    for (idx, image, info, rep, cell_path), weights in zip(outputs, grid):
        images.append(image)
        row = {"cell": idx, "path": cell_path.name}
        for k, w in enumerate(weights):
            row[f"lambda_{k}"] = w
        row["clamp_fraction"] = info["clamp_fraction"]
        row["iterations"] = rep.iterations_used
        row["residual"] = rep.final_residual
        rows.append(row)
    report_mod.write_grid_csv(outdir / "grid.csv", rows)
    report_mod.render_montage(
        outdir / "montage.png",
        images,
        grid,
        args.corners,
        args.resolution,
        title=f"{args.metric} mixing, {args.corners} corners",
    )
    _emit("cells", len(grid))
    _emit("outdir", str(outdir))
    _emit("montage", str(outdir / "montage.png"))
    _emit("csv", str(outdir / "grid.csv"))
    return 0


_COMMANDS = {
    "stats": _cmd_stats,
    "distance": _cmd_distance,
    "transfer": _cmd_transfer,
    "barycenter": _cmd_barycenter,
    "mix": _cmd_mix,
    "grid": _cmd_grid,
}


def run(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (GaussotError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
