import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from wfibp.generative import TimeGrid
from wfibp.lingauss import LinGaussHook, collapsed_loglik, generate, posterior_A, posterior_sigmaA
from wfibp.mcmc import InferenceState


def test_generate_noiseless(rng):
    Z = [np.array([[1, 0], [1, 1]]), np.array([[0, 1]])]
    A = rng.standard_normal((2, 4))
    O = generate(Z, A, 0.0, rng)
    for z, o in zip(Z, O):
        np.testing.assert_array_equal(o, z @ A)


def test_generate_pure_noise(rng):
    O = generate([np.zeros((50_000, 2))], np.ones((2, 3)), 0.7, rng)[0]
    assert np.all(np.abs(O.mean(axis=0)) < 3 * 0.7 / math.sqrt(50_000))
    # entrywise variance about Z A is sigmaX^2
    assert O.var() == pytest.approx(0.49, rel=0.02)


def test_generate_shape_mismatch(rng):
    with pytest.raises(ValueError):
        generate([np.zeros((2, 3))], np.zeros((2, 4)), 1.0, rng)


def test_posterior_scalar():
    o = 1.7
    post = posterior_A([[1.0]], [[o]], 1.0, 1.0)
    assert post.mean[0, 0] == pytest.approx(o / 2)
    assert post.cov[0, 0] == pytest.approx(0.5)


def test_posterior_least_squares_limit(rng):
    Z = (rng.random((12, 3)) < 0.5).astype(float)
    Z[:3] = np.eye(3)
    O = rng.standard_normal((12, 5))
    ls = np.linalg.lstsq(Z, O, rcond=None)[0]
    np.testing.assert_allclose(posterior_A(Z, O, 0.5, 1e6).mean, ls, rtol=1e-6, atol=1e-8)


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 15), K=st.integers(1, 6))
def test_posterior_cov_spd(seed, n, K):
    r = np.random.default_rng(seed)
    Z = (r.random((n, K)) < 0.5).astype(float)
    post = posterior_A(Z, r.standard_normal((n, 2)), 0.5, 1.3)
    np.testing.assert_allclose(post.cov, post.cov.T, atol=1e-12)
    assert np.all(np.linalg.eigvalsh(post.cov) > 0)


def test_posterior_zero_allocations_is_prior_mean(rng):
    post = posterior_A(np.zeros((6, 3)), rng.standard_normal((6, 4)), 0.5, 2.0)
    assert np.all(post.mean == 0.0)
    np.testing.assert_allclose(post.cov, 4.0 * np.eye(3))


def test_posterior_rejects_nonfinite():
    with pytest.raises(ValueError):
        posterior_A([[1.0]], [[np.nan]], 1.0, 1.0)
    with pytest.raises(ValueError):
        collapsed_loglik([[np.inf]], [[1.0]], 1.0, 1.0)


def test_posterior_sample_moments(rng):
    Z = (rng.random((8, 2)) < 0.5).astype(float)
    post = posterior_A(Z, rng.standard_normal((8, 3)), 0.5, 1.0)
    draws = np.array([post.sample(rng) for _ in range(20_000)])
    np.testing.assert_allclose(draws.mean(axis=0), post.mean, atol=0.02)
    np.testing.assert_allclose(np.cov(draws[:, :, 0].T), post.cov, atol=0.01)


def test_posterior_sigmaA_examples(rng):
    assert posterior_sigmaA(np.zeros((1, 1))) == (1.5, 1.0)
    assert posterior_sigmaA(np.array([[2.0]])) == (1.5, 3.0)
    a, b = posterior_sigmaA(rng.standard_normal((3, 4)))
    draws = b / rng.gamma(a, size=200_000)
    assert draws.mean() == pytest.approx(b / (a - 1), rel=0.02)


def test_collapsed_scalar_convolution():
    for z in (0.0, 1.0):
        o, sx, sa = 0.8, 0.5, 1.3
        expected = stats.norm(0, math.sqrt(z * z * sa * sa + sx * sx)).logpdf(o)
        assert collapsed_loglik([[o]], [[z]], sx, sa) == pytest.approx(expected)


def test_collapsed_monte_carlo_oracle(rng):
    Z = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    O = np.array([[0.9], [1.4], [0.3]])
    sx, sa = 0.5, 1.0
    A = sa * rng.standard_normal((1_000_000, 2))
    mean = A @ Z.T                                   # draws x rows
    ll = stats.norm(mean, sx).logpdf(O[:, 0]).sum(axis=1)
    mc = np.log(np.mean(np.exp(ll - ll.max()))) + ll.max()
    exact = collapsed_loglik(O, Z, sx, sa)
    assert abs(mc - exact) <= 0.02 * abs(exact)


def test_collapsed_multivariate_normal_oracle(rng):
    # columns of O are iid N(0, sigmaA^2 Z Z' + sigmaX^2 I)
    Z = (rng.random((7, 3)) < 0.5).astype(float)
    O = rng.standard_normal((7, 4))
    sx, sa = 0.6, 1.4
    cov = sa**2 * Z @ Z.T + sx**2 * np.eye(7)
    expected = sum(stats.multivariate_normal(np.zeros(7), cov).logpdf(O[:, d]) for d in range(4))
    assert collapsed_loglik(O, Z, sx, sa) == pytest.approx(expected, rel=1e-10)


@given(seed=st.integers(0, 2**32 - 1))
def test_collapsed_permutation_invariance(seed):
    r = np.random.default_rng(seed)
    Z = (r.random((6, 3)) < 0.5).astype(float)
    O = r.standard_normal((6, 2))
    base = collapsed_loglik(O, Z, 0.5, 1.0)
    rows, cols = r.permutation(6), r.permutation(3)
    assert collapsed_loglik(O[rows], Z[rows], 0.5, 1.0) == pytest.approx(base)
    assert collapsed_loglik(O, Z[:, cols], 0.5, 1.0) == pytest.approx(base)


def test_conjugacy_grid_round_trip(rng):
    # K = D = 1: prior x likelihood on a grid reproduces the Gaussian posterior of A
    z = np.array([[1.0], [1.0], [0.0], [1.0]])
    o = np.array([[0.4], [1.1], [-0.2], [0.7]])
    sx, sa = 0.5, 1.2
    a = np.linspace(-4, 4, 20_001)
    logp = stats.norm(0, sa).logpdf(a) + stats.norm(z * a[None, :], sx).logpdf(o).sum(axis=0)
    p = np.exp(logp - logp.max())
    p /= np.trapezoid(p, a)
    post = posterior_A(z, o, sx, sa)
    exact = stats.norm(post.mean[0, 0], math.sqrt(post.cov[0, 0])).pdf(a)
    np.testing.assert_allclose(p, exact, atol=1e-6)
    # the normalizer is the collapsed likelihood
    assert math.log(np.trapezoid(np.exp(logp), a)) == pytest.approx(collapsed_loglik(o, z, sx, sa), abs=1e-8)


def _state(Z):
    T1 = len(Z)
    K = Z[0].shape[1]
    return InferenceState(TimeGrid.regular(T1, 0.1), [z.shape[0] for z in Z], np.arange(K),
                          np.full((T1, K), 0.5), Z)


def test_hook_ratios_match_full_recomputation(rng):
    Z = [(rng.random((5, 3)) < 0.5).astype(np.int8) for _ in range(2)]
    O = [rng.standard_normal((5, 4)) for _ in range(2)]
    st_ = _state(Z)
    hook = LinGaussHook(O, 0.5, 1.3)
    hook.sync(st_)
    for t in range(2):
        for i in range(5):
            hook.begin_row(st_, t, i)
            for k in range(3):
                l0, l1 = hook.entry_logliks(st_, t, i, k)
                full = []
                for v in (0, 1):
                    Zc = [z.copy() for z in st_.Z]
                    Zc[t][i, k] = v
                    full.append(collapsed_loglik(np.vstack(O), np.vstack(Zc).astype(float), 0.5, 1.3))
                assert l1 - l0 == pytest.approx(full[1] - full[0], abs=1e-9)
                # flip the entry and keep the cache in step
                new = 1 - st_.Z[t][i, k]
                st_.Z[t][i, k] = new
                hook.set_entry(st_, t, i, k, new)
            hook.end_row(st_, t, i)
    Zs = np.vstack(st_.Z).astype(float)
    np.testing.assert_allclose(hook.G, Zs.T @ Zs)
    np.testing.assert_allclose(hook.H, Zs.T @ np.vstack(O))


def test_hook_update_draws_seen_only(rng):
    Z = [np.array([[1, 0, 0], [1, 1, 0]], dtype=np.int8)]
    st_ = _state(Z)
    hook = LinGaussHook([rng.standard_normal((2, 3))], 0.5)
    hook.update(st_, rng)
    assert hook.A.shape == (2, 3)
    np.testing.assert_array_equal(hook.A_ids, [0, 1])
    assert hook.sigmaA > 0
    assert hook.total_loglik(st_) == pytest.approx(
        collapsed_loglik(hook.O[0], Z[0].astype(float), 0.5, hook.sigmaA))
