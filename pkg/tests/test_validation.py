import json
import math

import numpy as np
import pytest

from wfibp.validation import (
    TestReport,
    batch_means_se,
    coverage_check,
    ks_beta,
    poisson_field_check,
    save_reports,
    two_sample_energy,
    with_retry,
)


def test_ks_null_calibration(rng):
    p = np.array([ks_beta(rng.beta(2.0, 3.0, size=500), 2.0, 3.0).pvalue for _ in range(100)])
    # mean of 100 uniforms: s.e. 0.029
    assert abs(p.mean() - 0.5) < 0.1
    assert np.mean(p < 0.01) <= 0.05


def test_ks_power(rng):
    rep = ks_beta(rng.beta(4.0, 3.0, size=10_000), 2.0, 3.0)
    assert rep.reject and rep.pvalue < 0.01


def test_ks_constant_samples():
    assert ks_beta(np.full(500, 0.5), 1.0, 1.0).pvalue < 1e-10


def test_ks_needs_samples(rng):
    with pytest.raises(ValueError):
        ks_beta(rng.random(99), 1.0, 1.0)


def test_poisson_closed_form_interval(rng):
    reps = [rng.random(0) for _ in range(100)]
    rep = poisson_field_check(reps, [(math.exp(-1), 1.0)], 2.0, 1.0)[0]
    assert rep.extra["expected"] == pytest.approx(2.0)


def test_poisson_zero_length_interval(rng):
    reps = [rng.random(5) for _ in range(100)]
    rep = poisson_field_check(reps, [(0.3, 0.3)], 1.0, 1.0)[0]
    assert rep.extra["expected"] == 0.0 and rep.statistic == 0.0 and not rep.reject


def test_poisson_independence_detects_correlation(rng):
    # counts in two intervals that always move together
    reps = []
    for _ in range(500):
        k = rng.poisson(2.0)
        reps.append(np.concatenate([np.full(k, 0.1), np.full(k, 0.5)]))
    out = poisson_field_check(reps, [(0.05, 0.2), (0.4, 0.6)], 1.0, 1.0)
    assert out[-1].name == "poisson_independence" and out[-1].reject


def test_poisson_accepts_atom_sets(rng):
    from wfibp.measures import AtomSet, sample_truncated_process

    reps = [AtomSet(sample_truncated_process(1.0, 1.0, 0.1, rng)) for _ in range(300)]
    out = poisson_field_check(reps, [(0.1, 0.4), (0.4, 1.0)], 1.0, 1.0)
    assert len(out) == 3


def test_poisson_validation(rng):
    with pytest.raises(ValueError):
        poisson_field_check([rng.random(2)] * 99, [(0.1, 0.2)], 1.0, 1.0)
    with pytest.raises(ValueError):
        poisson_field_check([rng.random(2)] * 100, [(0.0, 0.2)], 1.0, 1.0)


def test_energy_identical_samples(rng):
    A = rng.normal(size=(40, 2))
    for P in (1, 10, 99):
        assert two_sample_energy(A, A.copy(), P, rng).pvalue == 1.0


def test_energy_power(rng):
    rep = two_sample_energy(rng.normal(size=(500, 2)), rng.normal(0.3, 1.0, size=(500, 2)), 200, rng)
    assert rep.reject


def test_energy_null_calibration(rng):
    p = np.array([two_sample_energy(rng.normal(size=60), rng.normal(size=60), 99, rng).pvalue for _ in range(80)])
    assert abs(p.mean() - 0.5) < 0.12


def test_energy_errors(rng):
    with pytest.raises(ValueError):
        two_sample_energy(rng.normal(size=(5, 2)), rng.normal(size=(5, 3)))
    with pytest.raises(ValueError):
        two_sample_energy(np.zeros((0, 2)), rng.normal(size=(5, 2)))


def test_coverage_examples():
    x = np.linspace(0, 1, 10)
    assert coverage_check(x, x, np.zeros(10)) == 1.0
    assert coverage_check(x, x + 0.1, np.zeros(10)) == 0.0
    assert coverage_check([0.0, 1.0], [0.1, 0.5], [0.1, 0.1]) == 0.5
    with pytest.raises(ValueError):
        coverage_check(x, x[:5], x[:5])


def test_with_retry():
    calls = []

    def check(seed):
        calls.append(seed)
        return seed == 8, {"seed": seed}

    ok, attempts = with_retry(check, [7, 8])
    assert ok and calls == [7, 8] and [a[1] for a in attempts] == [False, True]
    calls.clear()
    ok, attempts = with_retry(check, [8, 9])
    assert ok and calls == [8]


def test_report_serialization(tmp_path):
    r = TestReport("x", 1.5, pvalue=0.2, reject=np.bool_(False), n=3)
    assert json.loads(r.to_json())["pvalue"] == 0.2
    save_reports([r, r], tmp_path / "r.json")
    assert len(json.loads((tmp_path / "r.json").read_text())) == 2
    with pytest.raises(ValueError):
        TestReport("bad", 0.0, pvalue=1.5)


def test_reports_deterministic():
    a = two_sample_energy(np.arange(30.0), np.arange(30.0) + 0.5, 50, np.random.default_rng(1))
    b = two_sample_energy(np.arange(30.0), np.arange(30.0) + 0.5, 50, np.random.default_rng(1))
    assert a.to_json() == b.to_json()


def test_batch_means(rng):
    x = rng.normal(size=10_000)
    assert batch_means_se(x) == pytest.approx(0.01, rel=0.3)
    with pytest.raises(ValueError):
        batch_means_se(x[:10])
