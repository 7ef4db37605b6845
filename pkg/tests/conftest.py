from pathlib import Path

import numpy as np
import pytest

from gaussot import GaussianStats, SampleMatrix, SpdMatrix, estimate_stats

FIXTURES = Path(__file__).parent / "fixtures"


def random_orthogonal(rng, m):
    q, r = np.linalg.qr(rng.normal(size=(m, m)))
    return q * np.sign(np.diag(r))


def random_spd(rng, m, cond=100.0, scale=1.0):
    """Random SPD matrix with eigenvalues log-spaced over the given condition
    number, conjugated by a random rotation."""
    w = np.logspace(0.0, np.log10(cond), m) / cond * scale
    rng.shuffle(w)
    q = random_orthogonal(rng, m)
    return SpdMatrix((q * w) @ q.T)


def gaussian_exact_samples(rng, mean, cov: SpdMatrix, n):
    """Sample cloud whose empirical stats (divisor n) equal (mean, cov) to
    floating-point accuracy: draw, center, whiten empirically, recolor."""
    m = cov.dim
    assert n > m
    z = rng.normal(size=(n, m))
    z = z - z.mean(axis=0)
    c = (z.T @ z) / n
    w, v = np.linalg.eigh(c)
    z = z @ ((v / np.sqrt(w)) @ v.T)
    wc, vc = np.linalg.eigh(cov.array)
    half = (vc * np.sqrt(np.clip(wc, 0.0, None))) @ vc.T
    return SampleMatrix(mean + z @ half)


def random_stats(rng, m, cond=100.0):
    return GaussianStats(mean=rng.normal(size=m), cov=random_spd(rng, m, cond))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
