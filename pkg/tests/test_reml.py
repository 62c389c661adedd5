import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import polymorphic_matrix
from herit_ridge.errors import DimensionMismatch
from herit_ridge.geno import SpectralCache, standardize_empirical
from herit_ridge.reml import H2_LOWER, H2_UPPER, profile_loglik, reml_estimate, reml_profile_h2
from herit_ridge.ridge import h2_to_lambda, projection_setup


def dense_loglik(K, y, h2, p):
    """Profiled restricted log-likelihood from a Cholesky factor of V (constants dropped)."""
    m = y.size
    V = h2 * K / p + (1 - h2) * np.eye(m)
    L = np.linalg.cholesky(V)
    r = np.linalg.solve(L, y)
    logdet = 2 * np.log(np.diag(L)).sum()
    return -0.5 * (m * np.log(r @ r / m) + logdet)


def contrasted_problem(seed, n=40, p=120, h2=0.5):
    rng = np.random.default_rng(seed)
    Z = standardize_empirical(polymorphic_matrix(rng, n, p))
    u = rng.normal(0, np.sqrt(h2 / p), p)
    y = Z.z @ u + rng.normal(0, np.sqrt(1 - h2), n)
    C, cache = projection_setup(Z)
    return Z, C, cache, C.apply(y)


def synthetic_spectrum(seed, m=3000, p=6000, h2=0.6):
    rng = np.random.default_rng(seed)
    d = np.sort(rng.chisquare(4, m) * p / 4)[::-1]
    w = h2 * d / p + (1 - h2)
    b = rng.normal(size=m) * np.sqrt(w) * 2.5
    return SpectralCache(d, np.eye(m)), b, p


class TestProfileLikelihood:
    @pytest.mark.parametrize("seed", range(4))
    def test_matches_dense_cholesky(self, seed):
        _, C, cache, y_c = contrasted_problem(seed, n=60)
        K = cache.gram()
        b = cache.rotate(y_c)
        for h2 in (0.05, 0.3, 0.7, 0.95):
            assert profile_loglik(cache.eigvals, b, h2, 120) == pytest.approx(dense_loglik(K, y_c, h2, 120), rel=1e-10)

    def test_vectorized(self):
        _, _, cache, y_c = contrasted_problem(1)
        b = cache.rotate(y_c)
        grid = np.array([0.1, 0.5, 0.9])
        vec = profile_loglik(cache.eigvals, b, grid, 120)
        np.testing.assert_allclose(vec, [profile_loglik(cache.eigvals, b, h, 120) for h in grid])


class TestOptimizer:
    @pytest.mark.parametrize("seed", range(5))
    def test_beats_fine_grid(self, seed):
        _, _, cache, y_c = contrasted_problem(seed)
        fit = reml_profile_h2(cache, y_c, 120)
        K = cache.gram()
        grid = np.arange(1, 1000) / 1000
        ll = np.array([dense_loglik(K, y_c, h, 120) for h in grid])
        best = grid[np.argmax(ll)]
        assert fit.loglik >= ll.max() - 1e-9
        assert abs(fit.h2 - best) <= 1e-3 or fit.boundary

    def test_recovers_h2_on_large_spectrum(self):
        cache, b, p = synthetic_spectrum(0)
        fit = reml_profile_h2(cache, b, p)
        assert fit.converged
        assert fit.h2 == pytest.approx(0.6, abs=0.05)

    def test_scale_equivariance(self):
        _, _, cache, y_c = contrasted_problem(2)
        a = reml_profile_h2(cache, y_c, 120)
        b = reml_profile_h2(cache, 7.0 * y_c, 120)
        assert b.h2 == pytest.approx(a.h2, abs=1e-6)
        assert b.sigma2 == pytest.approx(49.0 * a.sigma2, rel=1e-4)

    def test_white_response_gives_lower_bound(self):
        # b_k^2 all equal is exactly the h2 = 0 expectation
        d = np.linspace(400.0, 10.0, 200)
        fit = reml_profile_h2(SpectralCache(d, np.eye(200)), np.ones(200), 200)
        assert fit.h2 == H2_LOWER and fit.boundary

    def test_variance_components_consistent(self):
        _, _, cache, y_c = contrasted_problem(3)
        fit = reml_profile_h2(cache, y_c, 120)
        assert fit.tau * 120 / (fit.tau * 120 + fit.sigma2) == pytest.approx(fit.h2)
        assert H2_LOWER <= fit.h2 <= H2_UPPER

    def test_length_mismatch(self):
        _, _, cache, y_c = contrasted_problem(0)
        with pytest.raises(DimensionMismatch):
            reml_profile_h2(cache, y_c[:-1], 120)

    def test_estimate_wrapper(self):
        Z, _, _, _ = contrasted_problem(0)
        y = np.random.default_rng(8).normal(size=Z.n)
        est = reml_estimate(Z, y)
        assert est.method == "reml" and est.n_used == Z.n - 1
        assert est.lam == pytest.approx(h2_to_lambda(est.h2, Z.p))

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**31), h2=st.floats(0.1, 0.9))
    def test_stationary_or_boundary(self, seed, h2):
        rng = np.random.default_rng(seed)
        m, p = 150, 300
        d = np.sort(rng.chisquare(3, m) * p / 3)[::-1]
        b = rng.normal(size=m) * np.sqrt(h2 * d / p + 1 - h2)
        fit = reml_profile_h2(SpectralCache(d, np.eye(m)), b, p)
        if not fit.boundary:
            eps = 1e-4
            lo = profile_loglik(d, b, max(fit.h2 - eps, H2_LOWER), p)
            hi = profile_loglik(d, b, min(fit.h2 + eps, H2_UPPER), p)
            assert fit.loglik >= max(lo, hi) - 1e-8
