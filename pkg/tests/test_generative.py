import math

import numpy as np
import pytest
from scipy import stats

from wfibp.generative import (
    AllocationSeries,
    FeatureSystem,
    TimeGrid,
    fixed_k_generate,
    relabel_fixed_k,
    simulate_joint,
    simulate_prf_system,
    unseen_acceptance,
)
from wfibp.measures import PRFParams, bernoulli_rows, sample_ibp, sample_truncated_process


def test_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid([])
    with pytest.raises(ValueError):
        TimeGrid([0.0, 0.2, 0.1])
    g = TimeGrid.regular(4, 0.5)
    np.testing.assert_allclose(g.durations, [0.5, 0.5, 0.5])


def test_allocation_series_shapes():
    with pytest.raises(ValueError):
        AllocationSeries([np.zeros((2, 3))], [0, 1])
    al = AllocationSeries([np.array([[1, 0], [1, 1]]), np.array([[0, 0]])], [5, 2])
    np.testing.assert_array_equal(al.counts, [[2, 1], [0, 0]])
    np.testing.assert_array_equal(al.N, [2, 1])
    s = al.sorted_by_id()
    np.testing.assert_array_equal(s.ids, [2, 5])
    np.testing.assert_array_equal(s.Z[0], [[0, 1], [1, 1]])


def test_feature_ids_unique():
    with pytest.raises(ValueError):
        FeatureSystem(TimeGrid([0.0]), [1, 1], np.zeros((1, 2)), [0, 0])


def test_prf_single_time_is_truncated_process():
    a = simulate_prf_system(PRFParams(2.0, 1.5), 0.05, TimeGrid([0.0]), np.random.default_rng(3))
    b = sample_truncated_process(2.0, 1.5, 0.05, np.random.default_rng(3))
    np.testing.assert_array_equal(a.values[0], b)


def test_prf_needs_valid_u(rng):
    with pytest.raises(ValueError):
        simulate_prf_system(PRFParams(1.0, 1.0), 1.0, TimeGrid([0.0]), rng)


@pytest.fixture(scope="module")
def prf_systems():
    rng = np.random.default_rng(7)
    grid = TimeGrid.regular(3, 0.1)
    return [simulate_prf_system(PRFParams(1.0, 1.0), 0.05, grid, rng) for _ in range(500)]


def test_prf_marginal_count_every_time(prf_systems):
    lam = math.log(1 / 0.05)
    for t in range(3):
        n = np.array([np.sum(fs.values[t] >= 0.05) for fs in prf_systems])
        assert abs(n.mean() - lam) < 3 * math.sqrt(lam / n.size)


def test_prf_no_candidate_above_u_before_birth(prf_systems):
    for fs in prf_systems:
        for k in range(fs.n_features):
            b = fs.birth[k]
            assert np.all(fs.values[:b, k] < 0.05)
            assert fs.values[b, k] >= 0.05


def test_prf_time_marginal_invariance(prf_systems):
    first = np.concatenate([fs.values[0][fs.values[0] >= 0.05] for fs in prf_systems])
    last = np.concatenate([fs.values[-1][fs.values[-1] >= 0.05] for fs in prf_systems])
    assert stats.ks_2samp(first, last).pvalue > 0.001


def test_joint_single_time_is_ibp():
    fs, al = simulate_joint(PRFParams(3.0, 2.0), TimeGrid([0.0]), [9], np.random.default_rng(11))
    Z = sample_ibp(3.0 / 2.0, 2.0, 9, np.random.default_rng(11))
    np.testing.assert_array_equal(al.Z[0], Z)
    assert fs.n_features == Z.shape[1]


def test_joint_tiny_alpha_is_empty(rng):
    fs, al = simulate_joint(PRFParams(1e-12, 1.0), TimeGrid.regular(3, 0.1), [4, 4, 4], rng)
    assert fs.n_features == 0
    assert all(z.shape == (4, 0) for z in al.Z)


def test_joint_needs_counts(rng):
    with pytest.raises(ValueError):
        simulate_joint(PRFParams(1.0, 1.0), TimeGrid.regular(2, 0.1), [3, 0], rng)
    with pytest.raises(ValueError):
        simulate_joint(PRFParams(1.0, 1.0), TimeGrid.regular(2, 0.1), [3, 3, 3], rng)


def test_joint_structure(rng):
    grid = TimeGrid.regular(4, 0.1)
    for _ in range(50):
        fs, al = simulate_joint(PRFParams(2.0, 1.0), grid, [5, 3, 6, 4], rng)
        np.testing.assert_array_equal(al.N, [5, 3, 6, 4])
        assert np.all(al.seen())
        c = al.counts
        for k in range(fs.n_features):
            first = np.flatnonzero(c[:, k])[0]
            assert first == fs.birth[k]
            assert np.all(fs.values[c[:, k] > 0, k] > 0)


def test_joint_marginal_is_ibp():
    # at each grid time the allocation is a two-parameter IBP draw (mass alpha / beta)
    rng = np.random.default_rng(5)
    alpha, beta, N = 2.0, 1.5, 6
    grid = TimeGrid.regular(3, 0.1)
    per_obj = [[] for _ in range(3)]
    per_time = [[] for _ in range(3)]
    for _ in range(1000):
        _, al = simulate_joint(PRFParams(alpha, beta), grid, N, rng)
        for t, z in enumerate(al.Z):
            per_obj[t].append(z[0].sum())
            per_time[t].append(int(np.sum(z.sum(axis=0) > 0)))
    ref_obj, ref_cols = [], []
    for _ in range(1000):
        z = sample_ibp(alpha / beta, beta, N, rng)
        ref_obj.append(z[0].sum())
        ref_cols.append(z.shape[1])
    for t in range(3):
        assert stats.ks_2samp(per_obj[t], ref_obj).pvalue > 0.001
        assert stats.ks_2samp(per_time[t], ref_cols).pvalue > 0.001


def test_unseen_acceptance_product(rng):
    vals = np.array([[0.3, 0.05, 0.0], [0.1, 0.6, 0.9]])
    N = np.array([3, 2])
    p = unseen_acceptance(vals, N)
    np.testing.assert_allclose(p, [(0.7**3) * (0.9**2), (0.95**3) * (0.4**2), 0.1**2])
    # Monte Carlo: fraction of Bernoulli draws that leave the feature unseen at both times
    R = 200_000
    unseen = np.ones((R, 3), dtype=bool)
    for t in range(2):
        for i in range(N[t]):
            unseen &= rng.random((R, 3)) >= vals[t]
    se = np.sqrt(p * (1 - p) / R)
    assert np.all(np.abs(unseen.mean(axis=0) - p) < 3 * se + 1e-12)
    np.testing.assert_array_equal(unseen_acceptance(np.zeros((0, 2)), N[:0]), [1.0, 1.0])


def test_fixed_k_marginal_beta():
    rng = np.random.default_rng(2)
    K, alpha, beta = 10_000, 10_000.0, 2.0     # alpha beta / K = 2
    values, al = fixed_k_generate(alpha, beta, K, TimeGrid.regular(3, 0.2), 5, rng)
    for t in range(3):
        assert stats.kstest(values[t], stats.beta(2.0, 2.0).cdf).pvalue > 0.001


def test_fixed_k_expected_activity(rng):
    alpha, beta, K = 3.0, 1.0, 6
    mu = alpha * beta / K
    tot = []
    for _ in range(2000):
        _, al = fixed_k_generate(alpha, beta, K, TimeGrid.regular(2, 0.05), 10, rng)
        tot.append(al.Z[1].mean())
    tot = np.array(tot)
    assert abs(tot.mean() - mu / (mu + beta)) < 3 * tot.std() / math.sqrt(tot.size)


def test_fixed_k_single_feature_tracks(rng):
    values, al = fixed_k_generate(1.0, 1.0, 1, TimeGrid.regular(5, 0.1), 20_000, rng)
    assert values.shape == (5, 1)
    assert all(z.shape == (20_000, 1) for z in al.Z)
    for t in range(5):
        x = values[t, 0]
        se = math.sqrt(max(x * (1 - x), 1e-12) / 20_000)
        assert abs(al.Z[t].mean() - x) < 4 * se + 1e-9


def test_fixed_k_needs_k(rng):
    with pytest.raises(ValueError):
        fixed_k_generate(1.0, 1.0, 0, TimeGrid([0.0]), 3, rng)


def test_relabel_fixed_k():
    pairs = relabel_fixed_k(np.array([0.5, 1e-4, 0.2]), np.array([0.4, 0.3, 1e-5]), 1e-3)
    np.testing.assert_array_equal(pairs, [[0.5, 0.4]])
