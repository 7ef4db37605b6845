import itertools

import numpy as np
import pytest

from gaussot import (
    DimensionMismatchError,
    GaussianStats,
    MapKind,
    SampleMatrix,
    SpdMatrix,
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

from conftest import gaussian_exact_samples, random_spd, random_stats


def scalar_stats(mean, var):
    return GaussianStats(mean=np.array([mean]), cov=SpdMatrix([[var]]))


class TestEstimateStats:
    def test_repeated_row(self):
        x = SampleMatrix(np.tile([1.5, -2.0], (3, 1)))
        g = estimate_stats(x)
        assert np.allclose(g.mean, [1.5, -2.0])
        assert np.allclose(g.cov.array, 0.0)
        assert g.n_samples == 3

    def test_four_point_cloud(self):
        x = SampleMatrix([[0, 0], [2, 0], [0, 2], [2, 2]])
        g = estimate_stats(x)
        assert np.allclose(g.mean, [1.0, 1.0])
        assert np.allclose(g.cov.array, np.eye(2))

    def test_divisor_is_n(self, rng):
        data = rng.normal(size=(10, 3))
        g = estimate_stats(SampleMatrix(data))
        expected = np.cov(data, rowvar=False, bias=True)
        assert np.allclose(g.cov.array, expected)

    def test_shrinkage(self, rng):
        x = SampleMatrix(rng.normal(size=(20, 4)))
        g0 = estimate_stats(x, shrink=0.0)
        g1 = estimate_stats(x, shrink=0.1)
        bump = 0.1 * np.trace(g0.cov.array) / 4 * np.eye(4)
        assert np.allclose(g1.cov.array, g0.cov.array + bump)


class TestW2:
    def test_self_zero(self, rng):
        g = random_stats(rng, 3)
        assert w2_gaussian_sq(g, g) < 1e-10

    def test_scalar_closed_form(self):
        g1, g2 = scalar_stats(0.0, 4.0), scalar_stats(3.0, 9.0)
        assert abs(w2_gaussian_sq(g1, g2) - (9.0 + 1.0)) < 1e-10

    def test_symmetry(self, rng):
        a, b = random_stats(rng, 4), random_stats(rng, 4)
        assert abs(w2_gaussian_sq(a, b) - w2_gaussian_sq(b, a)) < 1e-9

    def test_matches_empirical_assignment(self, rng):
        # independent oracle: exact assignment (Hungarian) on iid samples.
        # exact assignment is O(n^3), so n=1500 with a 6% band (empirical
        # transport cost bias in 2-D decays ~ n^-1/2).
        scipy_opt = pytest.importorskip("scipy.optimize")
        g1 = GaussianStats(np.array([0.0, 0.0]), SpdMatrix([[1.0, 0.3], [0.3, 0.5]]))
        g2 = GaussianStats(np.array([4.0, -3.0]), SpdMatrix([[2.0, -0.4], [-0.4, 1.0]]))
        n = 1500
        half1 = np.linalg.cholesky(g1.cov.array)
        half2 = np.linalg.cholesky(g2.cov.array)
        xs = g1.mean + rng.normal(size=(n, 2)) @ half1.T
        ys = g2.mean + rng.normal(size=(n, 2)) @ half2.T
        cost = ((xs[:, None, :] - ys[None, :, :]) ** 2).sum(axis=2)
        ri, ci = scipy_opt.linear_sum_assignment(cost)
        empirical = cost[ri, ci].mean()
        closed = w2_gaussian_sq(g1, g2)
        assert abs(empirical - closed) / closed < 0.06


class TestMongeMap:
    def test_src_equals_dst_fixes_samples(self, rng):
        g = random_stats(rng, 3)
        t = monge_map(g, g)
        x = SampleMatrix(rng.normal(size=(50, 3)))
        assert np.allclose(apply_map(t, x).data, x.data, atol=1e-9)

    def test_diagonal_equals_wct_and_adain(self):
        src = GaussianStats(np.zeros(2), SpdMatrix(np.diag([4.0, 1.0])))
        dst = GaussianStats(np.zeros(2), SpdMatrix(np.diag([9.0, 16.0])))
        expected = np.diag([1.5, 4.0])
        assert np.allclose(monge_map(src, dst).linear, expected)
        assert np.allclose(wct_map(src, dst).linear, expected)
        assert np.allclose(adain_map(src, dst).linear, expected)

    def test_scalar_map(self):
        t = monge_map(scalar_stats(0.0, 4.0), scalar_stats(1.0, 9.0))
        x = SampleMatrix([[-2.0], [0.0], [2.0]])
        assert np.allclose(apply_map(t, x).data.ravel(), [-2.0, 1.0, 4.0])

    def test_linear_is_symmetric(self, rng):
        src, dst = random_stats(rng, 6), random_stats(rng, 6)
        a = monge_map(src, dst).linear
        assert np.linalg.norm(a - a.T) < 1e-10 * np.linalg.norm(a)

    def test_transports_covariance(self, rng):
        src, dst = random_stats(rng, 5), random_stats(rng, 5)
        a = monge_map(src, dst).linear
        pushed = a @ src.cov.array @ a
        assert np.linalg.norm(pushed - dst.cov.array) <= 1e-7 * np.linalg.norm(dst.cov.array)

    def test_inverse_composition(self, rng):
        src, dst = random_stats(rng, 4), random_stats(rng, 4)
        a = monge_map(src, dst).linear
        b = monge_map(dst, src).linear
        assert np.allclose(a @ b, np.eye(4), atol=1e-7)


class TestWctMap:
    def test_commuting_equals_monge(self, rng):
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        src = GaussianStats(np.zeros(3), SpdMatrix((q * [1.0, 2.0, 3.0]) @ q.T))
        dst = GaussianStats(np.zeros(3), SpdMatrix((q * [4.0, 0.5, 2.0]) @ q.T))
        assert np.allclose(wct_map(src, dst).linear, monge_map(src, dst).linear, atol=1e-9)

    def test_noncommuting_still_transports(self, rng):
        src = GaussianStats(np.zeros(2), SpdMatrix([[2.0, 0.8], [0.8, 1.0]]))
        dst = GaussianStats(np.ones(2), SpdMatrix([[1.0, -0.3], [-0.3, 3.0]]))
        wct = wct_map(src, dst)
        ot = monge_map(src, dst)
        assert not np.allclose(wct.linear, ot.linear, atol=1e-6)
        x = gaussian_exact_samples(rng, src.mean, src.cov, 200)
        for t in (wct, ot):
            got = estimate_stats(apply_map(t, x))
            assert np.linalg.norm(got.cov.array - dst.cov.array) <= 1e-7 * np.linalg.norm(dst.cov.array)
            assert np.allclose(got.mean, dst.mean, atol=1e-9)


class TestAdainMap:
    def test_identity_on_equal_diagonal(self):
        g = GaussianStats(np.zeros(2), SpdMatrix(np.diag([2.0, 3.0])))
        assert np.allclose(adain_map(g, g).linear, np.eye(2))

    def test_zero_variance_channel_gain_zero(self):
        src = GaussianStats(np.zeros(2), SpdMatrix(np.diag([0.0, 1.0])))
        dst = GaussianStats(np.zeros(2), SpdMatrix(np.diag([4.0, 4.0])))
        assert np.allclose(adain_map(src, dst).linear, np.diag([0.0, 2.0]))

    def test_matches_diagonals_only(self, rng):
        src = GaussianStats(np.zeros(2), SpdMatrix([[2.0, 0.9], [0.9, 1.0]]))
        dst = GaussianStats(np.zeros(2), SpdMatrix([[1.0, -0.4], [-0.4, 2.0]]))
        x = gaussian_exact_samples(rng, src.mean, src.cov, 300)
        got = estimate_stats(apply_map(adain_map(src, dst), x))
        assert np.allclose(np.diag(got.cov.array), np.diag(dst.cov.array), atol=1e-8)
        assert not np.allclose(got.cov.array, dst.cov.array, atol=1e-4)


class TestApplyMap:
    def test_identity(self, rng):
        x = SampleMatrix(rng.normal(size=(10, 3)))
        assert np.array_equal(apply_map(identity_map(3), x).data, x.data)

    def test_dim_mismatch(self, rng):
        x = SampleMatrix(rng.normal(size=(10, 3)))
        with pytest.raises(DimensionMismatchError):
            apply_map(identity_map(2), x)

    def test_pushforward_exactness(self, rng):
        src, dst = random_stats(rng, 4), random_stats(rng, 4)
        x = gaussian_exact_samples(rng, src.mean, src.cov, 100)
        got = estimate_stats(apply_map(monge_map(src, dst), x))
        assert np.linalg.norm(got.cov.array - dst.cov.array) <= 1e-7 * np.linalg.norm(dst.cov.array)


class TestMcCann:
    def test_endpoints(self, rng):
        src, dst = random_stats(rng, 3), random_stats(rng, 3)
        t_map = monge_map(src, dst)
        x = gaussian_exact_samples(rng, src.mean, src.cov, 50)
        assert mccann_pushforward(x, t_map, 0.0) is x
        assert np.array_equal(
            mccann_pushforward(x, t_map, 1.0).data, apply_map(t_map, x).data
        )

    def test_out_of_range(self, rng):
        src, dst = random_stats(rng, 2), random_stats(rng, 2)
        with pytest.raises(ValueError):
            mccann_pushforward(
                gaussian_exact_samples(rng, src.mean, src.cov, 20),
                monge_map(src, dst),
                1.5,
            )

    def test_midpoint_stats(self, rng):
        src, dst = random_stats(rng, 3), random_stats(rng, 3)
        t_map = monge_map(src, dst)
        x = gaussian_exact_samples(rng, src.mean, src.cov, 200)
        got = estimate_stats(mccann_pushforward(x, t_map, 0.5))
        m_half = 0.5 * (np.eye(3) + t_map.linear)
        expected_cov = m_half @ src.cov.array @ m_half
        assert np.allclose(got.mean, 0.5 * (src.mean + dst.mean), atol=1e-9)
        assert np.linalg.norm(got.cov.array - expected_cov) <= 1e-7 * np.linalg.norm(expected_cov)

    def test_mccann_stats_endpoints_and_scalar(self):
        g1, g2 = scalar_stats(0.0, 1.0), scalar_stats(0.0, 4.0)
        assert mccann_stats(g1, g2, 0.0) is g1
        assert mccann_stats(g1, g2, 1.0) is g2
        mid = mccann_stats(g1, g2, 0.5)
        assert abs(mid.cov.array[0, 0] - 2.25) < 1e-12

    def test_geodesic_law(self, rng):
        g1, g2 = random_stats(rng, 4), random_stats(rng, 4)
        full = np.sqrt(w2_gaussian_sq(g1, g2))
        for t in (0.25, 0.5, 0.75):
            gt = mccann_stats(g1, g2, t)
            assert abs(np.sqrt(w2_gaussian_sq(g1, gt)) - t * full) < 1e-7 * (1 + full)

    def test_ot_displacement_not_larger_than_wct(self, rng):
        src, dst = random_stats(rng, 4), random_stats(rng, 4)
        x = gaussian_exact_samples(rng, src.mean, src.cov, 300)
        disp = lambda t: float(np.mean(np.sum((x.data - apply_map(t, x).data) ** 2, axis=1)))
        assert disp(monge_map(src, dst)) <= disp(wct_map(src, dst)) + 1e-9

    def test_displacement_equal_when_commuting(self, rng):
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        src = GaussianStats(np.zeros(3), SpdMatrix((q * [1.0, 2.0, 3.0]) @ q.T))
        dst = GaussianStats(np.zeros(3), SpdMatrix((q * [2.5, 0.5, 1.0]) @ q.T))
        x = gaussian_exact_samples(rng, src.mean, src.cov, 200)
        disp = lambda t: float(np.mean(np.sum((x.data - apply_map(t, x).data) ** 2, axis=1)))
        assert abs(disp(monge_map(src, dst)) - disp(wct_map(src, dst))) < 1e-9


def brute_force_w2_sq(xs, ys):
    """Exact empirical squared W2 between two equal-size clouds by full
    enumeration of assignments."""
    n = xs.shape[0]
    cost = ((xs[:, None, :] - ys[None, :, :]) ** 2).sum(axis=2)
    best = np.inf
    for perm in itertools.permutations(range(n)):
        total = cost[range(n), perm].sum()
        best = min(best, total)
    return best / n


class TestGaussianLowerBound:
    def test_lower_bound_small_clouds(self, rng):
        for _ in range(10):
            xs = rng.normal(size=(7, 2))
            ys = rng.normal(size=(7, 2)) + rng.normal(size=2)
            exact = brute_force_w2_sq(xs, ys)
            fitted = w2_gaussian_sq(
                estimate_stats(SampleMatrix(xs)), estimate_stats(SampleMatrix(ys))
            )
            assert exact >= fitted - 1e-9
