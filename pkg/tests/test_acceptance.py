"""Acceptance suite: one test per release criterion, each printing a PASS/FAIL
line. Tolerances are pinned here and nowhere else.

Run with `pytest tests/test_acceptance.py -v -s`.
"""

import itertools
import time
from contextlib import contextmanager

import numpy as np
import pytest

from gaussot import (
    FrechetSpec,
    GaussianStats,
    MapKind,
    Metric,
    SampleMatrix,
    SpdMatrix,
    adain_map,
    apply_map,
    bures_barycenter,
    bures_distance_sq,
    estimate_stats,
    fileio,
    karcher_mean,
    mccann_stats,
    monge_map,
    w2_gaussian_sq,
    wct_map,
)
from gaussot.cli import run as cli_run

from conftest import FIXTURES, gaussian_exact_samples, random_orthogonal, random_spd, random_stats


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {name}: FAIL")
        raise
    print(f"ACCEPTANCE {name}: PASS")


def scalar_stats(mean, var):
    return GaussianStats(np.array([float(mean)]), SpdMatrix([[float(var)]]))


def test_1d_analytic_suite():
    rng = np.random.default_rng(1)
    with criterion("1d-analytic"):
        start = time.monotonic()
        for _ in range(1000):
            m1, m2 = rng.normal(size=2) * 3
            s1, s2 = rng.uniform(0.05, 4.0, size=2)
            got = w2_gaussian_sq(scalar_stats(m1, s1**2), scalar_stats(m2, s2**2))
            want = (m1 - m2) ** 2 + (s1 - s2) ** 2
            assert abs(got - want) < 1e-10
        for _ in range(200):
            s = rng.uniform(0.2, 3.0, size=3)
            w = rng.dirichlet(np.ones(3))
            mats = [SpdMatrix([[v**2]]) for v in s]
            bures = bures_barycenter(mats, FrechetSpec(Metric.BURES, w)).result.array[0, 0]
            assert abs(bures - (w @ s) ** 2) < 1e-8
            karcher = karcher_mean(
                mats,
                FrechetSpec(Metric.FISHER_RAO, w, step=1.0, max_iter=50, rel_tol=1e-12),
            ).result.array[0, 0]
            assert abs(karcher - np.exp(w @ np.log(s**2))) < 1e-8
            from gaussot import arithmetic_mean, harmonic_mean

            arith = arithmetic_mean(mats, FrechetSpec(Metric.ARITHMETIC, w)).result.array[0, 0]
            assert abs(arith - w @ s**2) < 1e-8
            harm = harmonic_mean(mats, FrechetSpec(Metric.HARMONIC, w)).result.array[0, 0]
            assert abs(harm - 1.0 / (w @ (1.0 / s**2))) < 1e-8
        elapsed = time.monotonic() - start
        assert elapsed < 1.0, f"1-D suite took {elapsed:.2f}s"


def test_pushforward_exactness():
    rng = np.random.default_rng(2)
    with criterion("pushforward-exactness"):
        start = time.monotonic()
        for m in (2, 8, 32, 64):
            for _ in range(50):
                src, dst = random_stats(rng, m, cond=100.0), random_stats(rng, m, cond=100.0)
                x = gaussian_exact_samples(rng, src.mean, src.cov, 3 * m + 8)
                for build in (monge_map, wct_map):
                    got = estimate_stats(apply_map(build(src, dst), x))
                    rel = np.linalg.norm(got.cov.array - dst.cov.array) / np.linalg.norm(dst.cov.array)
                    assert rel < 1e-7, f"m={m} {build.__name__} rel={rel:.2e}"
                    assert np.allclose(got.mean, dst.mean, atol=1e-8 * (1 + np.linalg.norm(dst.mean)))
                got = estimate_stats(apply_map(adain_map(src, dst), x))
                assert np.allclose(np.diag(got.cov.array), np.diag(dst.cov.array), atol=1e-7 * np.linalg.norm(dst.cov.array))
                assert np.allclose(got.mean, dst.mean, atol=1e-8 * (1 + np.linalg.norm(dst.mean)))
        elapsed = time.monotonic() - start
        assert elapsed < 30.0, f"pushforward suite took {elapsed:.2f}s"


def test_special_case_equivalences():
    rng = np.random.default_rng(3)
    with criterion("special-case-equivalences"):
        for _ in range(100):
            m = int(rng.integers(2, 6))
            q = random_orthogonal(rng, m)
            w1, w2 = rng.uniform(0.1, 4.0, size=(2, m))
            src = GaussianStats(rng.normal(size=m), SpdMatrix((q * w1) @ q.T))
            dst = GaussianStats(rng.normal(size=m), SpdMatrix((q * w2) @ q.T))
            a_ot = monge_map(src, dst).linear
            a_wct = wct_map(src, dst).linear
            assert np.linalg.norm(a_ot - a_wct) < 1e-9 * max(1.0, np.linalg.norm(a_ot))
        for _ in range(100):
            m = int(rng.integers(2, 6))
            src = GaussianStats(rng.normal(size=m), SpdMatrix(np.diag(rng.uniform(0.1, 4.0, m))))
            dst = GaussianStats(rng.normal(size=m), SpdMatrix(np.diag(rng.uniform(0.1, 4.0, m))))
            a_ot = monge_map(src, dst).linear
            a_wct = wct_map(src, dst).linear
            a_ad = adain_map(src, dst).linear
            scale = max(1.0, np.linalg.norm(a_ot))
            assert np.linalg.norm(a_ot - a_wct) < 1e-9 * scale
            assert np.linalg.norm(a_ot - a_ad) < 1e-9 * scale


def test_geodesic_law():
    rng = np.random.default_rng(4)
    with criterion("geodesic-law"):
        for _ in range(50):
            m = int(rng.integers(2, 17))
            g1, g2 = random_stats(rng, m, cond=100.0), random_stats(rng, m, cond=100.0)
            full = np.sqrt(w2_gaussian_sq(g1, g2))
            for t in (0.25, 0.5, 0.75):
                gt = mccann_stats(g1, g2, t)
                d_from = np.sqrt(w2_gaussian_sq(g1, gt))
                d_to = np.sqrt(w2_gaussian_sq(gt, g2))
                assert abs(d_from - t * full) < 1e-7 * (1 + full)
                assert abs(d_to - (1 - t) * full) < 1e-7 * (1 + full)


def test_bures_barycenter_criteria():
    rng = np.random.default_rng(5)
    with criterion("bures-barycenter"):
        for _ in range(100):
            m = int(rng.integers(2, 33))
            s = int(rng.integers(2, 6))
            mats = [random_spd(rng, m, cond=float(rng.uniform(2.0, 1e4))) for _ in range(s)]
            weights = rng.dirichlet(np.ones(s))
            rep = bures_barycenter(mats, FrechetSpec(Metric.BURES, weights, max_iter=50))
            assert rep.iterations_used <= 50
            assert rep.final_residual < 1e-7, f"defect {rep.final_residual:.2e} (m={m}, S={s})"
        # S=2 equals the displacement-interpolate covariance
        for t in (0.25, 0.5, 0.75):
            a, b = random_spd(rng, 6), random_spd(rng, 6)
            rep = bures_barycenter([a, b], FrechetSpec(Metric.BURES, np.array([1 - t, t])))
            want = mccann_stats(
                GaussianStats(np.zeros(6), a), GaussianStats(np.zeros(6), b), t
            ).cov.array
            assert np.linalg.norm(rep.result.array - want) <= 1e-6 * np.linalg.norm(want)
        # first-order optimality probe
        mats = [random_spd(rng, 5) for _ in range(3)]
        weights = np.array([0.5, 0.3, 0.2])
        rep = bures_barycenter(mats, FrechetSpec(Metric.BURES, weights, rel_tol=1e-12, max_iter=200))
        base = sum(l * bures_distance_sq(rep.result, s) for l, s in zip(weights, mats))
        scale = 1e-4 * np.linalg.norm(rep.result.array)
        for _ in range(20):
            d = rng.normal(size=(5, 5))
            d = 0.5 * (d + d.T)
            d *= scale / np.linalg.norm(d)
            probe = SpdMatrix(rep.result.array + d)
            val = sum(l * bures_distance_sq(probe, s) for l, s in zip(weights, mats))
            assert val >= base - 1e-9


def test_karcher_mean_criteria():
    rng = np.random.default_rng(6)
    with criterion("karcher-mean"):
        for _ in range(20):
            m = int(rng.integers(2, 17))
            s = int(rng.integers(2, 5))
            mats = [random_spd(rng, m, cond=float(rng.uniform(2.0, 1e3))) for _ in range(s)]
            weights = rng.dirichlet(np.ones(s))
            rep = karcher_mean(
                mats,
                FrechetSpec(
                    Metric.FISHER_RAO, weights, step=0.01, max_iter=3000, rel_tol=1e-6
                ),
            )
            assert rep.final_residual < 1e-6 * m, (
                f"gradient norm {rep.final_residual:.2e} at m={m}"
            )
        # commuting closed form
        q = random_orthogonal(rng, 4)
        eigs = rng.uniform(0.2, 4.0, size=(3, 4))
        mats = [SpdMatrix((q * e) @ q.T) for e in eigs]
        weights = np.array([0.5, 0.3, 0.2])
        rep = karcher_mean(
            mats, FrechetSpec(Metric.FISHER_RAO, weights, step=0.5, max_iter=1000, rel_tol=1e-12)
        )
        want = (q * np.exp(weights @ np.log(eigs))) @ q.T
        assert np.linalg.norm(rep.result.array - want) <= 1e-6 * np.linalg.norm(want)


def test_gaussian_lower_bound():
    rng = np.random.default_rng(7)
    with criterion("gaussian-lower-bound"):
        start = time.monotonic()
        idx = np.arange(7)
        perms = list(itertools.permutations(range(7)))
        for _ in range(50):
            xs = rng.normal(size=(7, 2)) * rng.uniform(0.5, 2.0)
            ys = rng.normal(size=(7, 2)) * rng.uniform(0.5, 2.0) + rng.normal(size=2)
            cost = ((xs[:, None, :] - ys[None, :, :]) ** 2).sum(axis=2)
            exact = min(cost[idx, perm].sum() for perm in perms) / 7.0
            fitted = w2_gaussian_sq(
                estimate_stats(SampleMatrix(xs)), estimate_stats(SampleMatrix(ys))
            )
            assert exact >= fitted - 1e-9
        elapsed = time.monotonic() - start
        assert elapsed < 10.0, f"lower-bound suite took {elapsed:.2f}s"


def test_end_to_end_color_transfer(tmp_path):
    with criterion("end-to-end-color-transfer"):
        out = tmp_path / "out.png"
        out_stats = tmp_path / "out.gots"
        style_stats_path = tmp_path / "style.gots"
        code = cli_run(
            [
                "transfer",
                "--content", str(FIXTURES / "content64.png"),
                "--style", str(FIXTURES / "style64.png"),
                "--map", "ot",
                "--t", "1",
                "--shrink", "0",
                "--out", str(out),
                "--out-stats", str(out_stats),
            ]
        )
        assert code == 0
        assert cli_run(["stats", str(FIXTURES / "style64.png"), "--out", str(style_stats_path)]) == 0
        got = fileio.read_stats(out_stats)
        want = fileio.read_stats(style_stats_path)
        rel_cov = np.linalg.norm(got.cov.array - want.cov.array) / np.linalg.norm(want.cov.array)
        rel_mean = np.linalg.norm(got.mean - want.mean) / np.linalg.norm(want.mean)
        assert rel_cov < 1e-5 and rel_mean < 1e-5
        # clamp fraction: recompute from the pre-clamp stylization
        from gaussot import PixelCodec, stylize

        codec = PixelCodec()
        content = fileio.read_image(FIXTURES / "content64.png")
        samples, shape = codec.encode(content)
        styled = stylize(samples, want, MapKind.OT, 1.0, shrink=0.0)
        _, info = codec.decode(styled, shape)
        assert info["clamp_fraction"] < 0.05


def test_performance_desk_scale():
    rng = np.random.default_rng(8)
    with criterion("performance"):
        m = 512
        mats = [random_spd(rng, m, cond=1e3) for _ in range(5)]
        weights = rng.dirichlet(np.ones(5))
        start = time.monotonic()
        rep = bures_barycenter(mats, FrechetSpec(Metric.BURES, weights, max_iter=50))
        bary_time = time.monotonic() - start
        assert bary_time < 10.0, f"barycenter at m=512 took {bary_time:.2f}s"
        assert rep.final_residual < 1e-6
        src = GaussianStats(np.zeros(m), mats[0])
        dst = GaussianStats(np.zeros(m), mats[1])
        start = time.monotonic()
        monge_map(src, dst)
        map_time = time.monotonic() - start
        assert map_time < 2.0, f"monge_map at m=512 took {map_time:.2f}s"


def test_grid_corners_bit_identical(tmp_path):
    with criterion("grid-corners"):
        # four deterministic style variants derived from the bundled fixtures
        base_style = fileio.read_image(FIXTURES / "style64.png")
        base_content = fileio.read_image(FIXTURES / "content64.png")
        styles = [
            base_style,
            base_style[::-1].copy(),
            base_style[:, :, ::-1].copy(),
            0.5 * base_style + 0.5 * base_content,
        ]
        style_paths = []
        for i, img in enumerate(styles):
            p = tmp_path / f"style_{i}.png"
            fileio.write_image(p, img)
            style_paths.append(str(p))
        outdir = tmp_path / "grid"
        code = cli_run(
            [
                "grid",
                "--content", str(FIXTURES / "content64.png"),
                "--styles", *style_paths,
                "--corners", "4",
                "--resolution", "5",
                "--outdir", str(outdir),
            ]
        )
        assert code == 0
        cells = sorted(outdir.glob("cell_*.png"))
        assert len(cells) == 25
        # weight_grid order: corners at cells 0, 4, 20, 24 for styles 0,1,2,3
        corner_cells = {0: 0, 1: 4, 2: 20, 3: 24}
        for style_idx, cell_idx in corner_cells.items():
            single = tmp_path / f"single_{style_idx}.png"
            assert (
                cli_run(
                    [
                        "transfer",
                        "--content", str(FIXTURES / "content64.png"),
                        "--style", style_paths[style_idx],
                        "--map", "ot",
                        "--t", "1",
                        "--out", str(single),
                    ]
                )
                == 0
            )
            assert single.read_bytes() == (outdir / f"cell_{cell_idx:03d}.png").read_bytes()
