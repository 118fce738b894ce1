import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partition_lab import kernels

try:
    kernels.get_backend("cython")
    HAVE_EXT = True
except ImportError:
    HAVE_EXT = False

needs_ext = pytest.mark.skipif(not HAVE_EXT, reason="compiled extension not built")


def _inputs(seed, n=500, k=3):
    rng = np.random.default_rng(seed)
    x = rng.normal(0, 3, n)
    mu = rng.uniform(-3, 3, k)
    sigma = rng.uniform(0.3, 2.0, k)
    la = np.log(rng.dirichlet(np.ones(k)))
    return x, mu, sigma, la


def test_backend_name():
    assert kernels.BACKEND in ("cython", "python")
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_python_wta_against_direct():
    x, mu, sigma, la = _inputs(0)
    labels, counts, s1, s2, ll = kernels.wta_pass(x, mu, sigma, la, backend="python")
    score = la[:, None] - np.log(sigma)[:, None] - 0.5 * ((x[None, :] - mu[:, None]) / sigma[:, None]) ** 2
    np.testing.assert_array_equal(labels, np.argmax(score, axis=0))
    np.testing.assert_array_equal(counts, np.bincount(labels, minlength=3))
    lp = -0.5 * np.log2(2 * np.pi) - np.log2(sigma[labels]) - 0.5 * ((x - mu[labels]) / sigma[labels]) ** 2 / np.log(2)
    assert abs(ll - np.sum(-lp)) < 1e-9


def test_wta_tie_lower_index():
    x = np.array([0.0])
    labels, *_ = kernels.wta_pass(x, np.array([-1.0, 1.0]), np.ones(2), np.zeros(2), backend="python")
    assert labels[0] == 0
    if HAVE_EXT:
        labels, *_ = kernels.wta_pass(x, np.array([-1.0, 1.0]), np.ones(2), np.zeros(2), backend="cython")
        assert labels[0] == 0


@needs_ext
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(1, 300))
def test_backend_parity(seed, k, n):
    x, mu, sigma, la = _inputs(seed, n, k)
    a = kernels.wta_pass(x, mu, sigma, la, backend="python")
    b = kernels.wta_pass(x, mu, sigma, la, backend="cython")
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    for u, v in zip(a[2:], b[2:]):
        np.testing.assert_allclose(u, v, rtol=1e-12, atol=1e-10)
    for fn in (kernels.soft_pass, kernels.posterior_pass):
        for u, v in zip(fn(x, mu, sigma, la, backend="python"), fn(x, mu, sigma, la, backend="cython")):
            np.testing.assert_allclose(u, v, rtol=1e-11, atol=1e-10)


@needs_ext
def test_fits_agree_across_backends():
    from partition_lab.density import MixtureDensity, sample
    from partition_lab.fitters import FitConfig, fit

    q = MixtureDensity.from_triples([(0.5, -2, 1.5), (0.5, 2, 1.5)])
    d = sample(q, 2000, 0)
    for algo in ("kmeans", "em", "posterior_descent"):
        cfg = FitConfig(init=[(-2, 1.5), (2, 1.5)], grad_tol=0.03)
        a, b = fit(algo, d, cfg, backend="python"), fit(algo, d, cfg, backend="cython")
        assert len(a.records) == len(b.records)
        np.testing.assert_allclose(a.final.mus, b.final.mus, rtol=1e-9)
