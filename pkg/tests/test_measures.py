import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from wfibp.measures import (
    AtomSet,
    PRFParams,
    bernoulli_rows,
    levy_density,
    levy_mass,
    posterior_beta_draw,
    sample_ibp,
    sample_truncated_process,
)
from wfibp.validation import poisson_field_check


def test_levy_density_examples():
    assert levy_density(0.5, 1.0, 1.0) == pytest.approx(2.0)
    assert levy_density(1 - 1e-12, 1.0, 2.0) == pytest.approx(0.0, abs=1e-10)


@pytest.mark.parametrize("x", [0.0, 1.0, -0.2])
def test_levy_density_domain(x):
    with pytest.raises(ValueError):
        levy_density(x, 1.0, 1.0)


def test_levy_mass_closed_form():
    # alpha ln(1/u) for c = 1
    assert levy_mass(math.exp(-1), 1.0, 1.0, 1.0) == pytest.approx(1.0, rel=1e-9)
    assert levy_mass(0.05, 1.0, 2.5, 1.0) == pytest.approx(2.5 * math.log(20), rel=1e-9)
    assert levy_mass(0.3, 0.3, 1.0, 1.0) == 0.0


@pytest.mark.parametrize("a,b,alpha,c", [(0.01, 0.5, 1.0, 3.0), (0.2, 1.0, 2.0, 0.5), (0.05, 0.9, 0.7, 12.0)])
def test_levy_mass_matches_direct_quadrature(a, b, alpha, c):
    direct, _ = integrate.quad(lambda x: alpha / x * (1 - x) ** (c - 1), a, b, limit=200)
    assert levy_mass(a, b, alpha, c) == pytest.approx(direct, rel=1e-6)


def test_levy_mass_rejects_bad_interval():
    with pytest.raises(ValueError):
        levy_mass(0.0, 0.5, 1.0, 1.0)
    with pytest.raises(ValueError):
        levy_mass(0.5, 0.2, 1.0, 1.0)


def test_truncated_process_near_one_is_empty(rng):
    assert all(sample_truncated_process(1.0, 2.0, 1 - 1e-12, rng).size == 0 for _ in range(200))


@pytest.mark.parametrize("u", [0.0, 1.0, 1.5])
def test_truncated_process_domain(rng, u):
    with pytest.raises(ValueError):
        sample_truncated_process(1.0, 1.0, u, rng)


@pytest.mark.parametrize("alpha,c,u", [(1.0, 1.0, math.exp(-1)), (2.0, 0.4, 0.05), (1.5, 6.0, 0.01)])
def test_truncated_process_mean_count(rng, alpha, c, u):
    n = np.array([sample_truncated_process(alpha, c, u, rng).size for _ in range(10_000)])
    lam = levy_mass(u, 1.0, alpha, c)
    assert abs(n.mean() - lam) < 3 * math.sqrt(lam / n.size)


@pytest.mark.parametrize("c", [0.3, 1.0, 4.0])
def test_truncated_process_mass_law(rng, c):
    # conditional on the count, masses are iid with density proportional to the Levy density
    u = 0.02
    x = np.concatenate([sample_truncated_process(3.0, c, u, rng) for _ in range(3000)])
    knots = np.concatenate([np.geomspace(u, 0.5, 300), 1 - np.geomspace(0.5, 1e-9, 300)[1:], [1.0]])
    cdf = np.array([levy_mass(u, y, 1.0, c) for y in knots])
    cdf /= cdf[-1]
    assert stats.kstest(x, lambda q: np.interp(q, knots, cdf)).pvalue > 0.001


@given(alpha=st.floats(0.1, 5), c=st.floats(0.1, 20), u=st.floats(1e-4, 0.99), seed=st.integers(0, 2**32 - 1))
def test_truncated_process_support(alpha, c, u, seed):
    x = sample_truncated_process(alpha, c, u, np.random.default_rng(seed))
    assert np.all((x >= u) & (x < 1))


@given(u1=st.floats(1e-4, 0.98), du=st.floats(1e-4, 0.5), c=st.floats(0.1, 10))
def test_expected_count_monotone_in_u(u1, du, c):
    u2 = min(u1 + du, 0.999)
    assert levy_mass(u1, 1.0, 1.0, c) >= levy_mass(u2, 1.0, 1.0, c)


def test_lower_u_more_atoms(rng):
    hi = np.mean([sample_truncated_process(1.0, 2.0, 0.2, rng).size for _ in range(4000)])
    lo = np.mean([sample_truncated_process(1.0, 2.0, 0.05, rng).size for _ in range(4000)])
    assert lo > hi


def test_poisson_field_property(rng):
    reps = [sample_truncated_process(2.0, 1.5, 0.02, rng) for _ in range(2000)]
    reports = poisson_field_check(reps, [(0.02, 0.05), (0.05, 0.2), (0.2, 1.0)], 2.0, 1.5)
    assert all(abs(r.zscore) < 3.5 for r in reports[:-1])
    assert not reports[-1].reject


def test_ibp_single_customer(rng):
    alpha = 2.5
    draws = [sample_ibp(alpha, 1.3, 1, rng) for _ in range(10_000)]
    k = np.array([d.shape[1] for d in draws])
    assert all(np.all(d == 1) for d in draws)
    assert abs(k.mean() - alpha) < 3 * math.sqrt(alpha / k.size)
    assert k.var() == pytest.approx(alpha, rel=0.06)


def test_ibp_single_customer_beta_binomial(rng):
    # K = 10^4 Beta(alpha beta / K, beta) features: first customer's dish count is near Poisson(alpha)
    alpha, beta, K = 2.5, 1.3, 10_000
    bb = np.array([rng.binomial(1, rng.beta(alpha * beta / K, beta, size=K)).sum() for _ in range(4000)])
    ibp = np.array([sample_ibp(alpha, beta, 1, rng).shape[1] for _ in range(4000)])
    assert stats.ks_2samp(bb, ibp).pvalue > 0.001


def test_ibp_empty_for_zero_mass(rng):
    assert sample_ibp(0.0, 1.0, 10, rng).shape == (10, 0)
    assert sample_ibp(1e-12, 1.0, 10, rng).shape[1] == 0


def test_ibp_needs_customers(rng):
    with pytest.raises(ValueError):
        sample_ibp(1.0, 1.0, 0, rng)


@pytest.mark.parametrize("alpha,beta,N", [(2.0, 1.0, 10), (1.0, 3.0, 6), (3.0, 0.5, 4)])
def test_ibp_expected_columns(rng, alpha, beta, N):
    k = np.array([sample_ibp(alpha, beta, N, rng).shape[1] for _ in range(10_000)])
    expected = alpha * sum(beta / (beta + i - 1) for i in range(1, N + 1))
    # the column count is Poisson with this mean
    assert abs(k.mean() - expected) < 3 * math.sqrt(expected / k.size)


def test_ibp_rows_exchangeable(rng):
    first, last = [], []
    for _ in range(4000):
        Z = sample_ibp(2.0, 1.5, 8, rng)
        first.append(Z[0].sum())
        last.append(Z[-1].sum())
    assert stats.ks_2samp(first, last).pvalue > 0.001


@given(alpha=st.floats(0.1, 4), beta=st.floats(0.2, 4), N=st.integers(1, 12), seed=st.integers(0, 2**32 - 1))
def test_ibp_no_empty_columns(alpha, beta, N, seed):
    Z = sample_ibp(alpha, beta, N, np.random.default_rng(seed))
    assert Z.shape[0] == N
    assert np.all(Z.sum(axis=0) > 0)
    assert set(np.unique(Z)) <= {0, 1}


def test_posterior_beta_all_seen(rng):
    N = 7
    x = posterior_beta_draw(N, N, 1.0, rng, size=100_000)
    assert abs(x.mean() - N / (N + 1)) < 3 * x.std() / math.sqrt(x.size)


@pytest.mark.parametrize("n,N", [(0, 5), (6, 5), (-1, 3)])
def test_posterior_beta_needs_seen(rng, n, N):
    with pytest.raises(ValueError):
        posterior_beta_draw(n, N, 1.0, rng)


@pytest.mark.parametrize("n,N,beta", [(3, 10, 1.0), (1, 4, 2.5), (8, 8, 0.7)])
def test_posterior_beta_grid_oracle(rng, n, N, beta):
    # Bernoulli likelihood x^n (1-x)^(N-n) times the Levy density, normalized on a 10^3-point grid
    grid = (np.arange(1000) + 0.5) / 1000
    post = grid**n * (1 - grid) ** (N - n) * levy_density(grid, 1.0, beta)
    post /= post.sum() / 1000
    np.testing.assert_allclose(post, stats.beta(n, beta + N - n).pdf(grid), rtol=2e-2, atol=2e-2)
    draws = posterior_beta_draw(n, N, beta, rng, size=20_000)
    cdf = np.concatenate([[0.0], np.cumsum(post) / post.sum()])
    edges = np.linspace(0, 1, 1001)
    assert stats.kstest(draws, lambda q: np.interp(q, edges, cdf)).pvalue > 0.001


def test_bernoulli_rows_extremes(rng):
    Z = bernoulli_rows([0.0, 1.0], 50, rng)
    assert np.all(Z[:, 0] == 0) and np.all(Z[:, 1] == 1)


def test_bernoulli_rows_mean(rng):
    m = np.array([0.1, 0.45, 0.8])
    Z = bernoulli_rows(m, 10_000, rng)
    se = np.sqrt(m * (1 - m) / 10_000)
    assert np.all(np.abs(Z.mean(axis=0) - m) < 3 * se + 1e-12)


def test_bernoulli_rows_domain(rng):
    with pytest.raises(ValueError):
        bernoulli_rows([0.5, 1.2], 3, rng)


def test_params_and_atoms_validate():
    with pytest.raises(ValueError):
        PRFParams(0.0, 1.0)
    with pytest.raises(ValueError):
        AtomSet([0.5, 1.0])
    with pytest.raises(ValueError):
        AtomSet([0.2, 0.3], ids=[1, 1])
    assert len(AtomSet([0.2, 0.3])) == 2
