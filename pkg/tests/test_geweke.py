import numpy as np
import pytest

from wfibp.geweke import GewekeResult, geweke_feature_model, geweke_topic_model


def test_result_zscores():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(2000, 2))
    r = GewekeResult(["x", "y"], a, a + np.array([0.0, 1.0]))
    assert abs(r.zscores[0]) < 1e-12 and r.zscores[1] < -10
    assert not r.passed()
    same = GewekeResult(["c"], np.ones((100, 1)), np.ones((100, 1)))
    assert same.passed()


@pytest.mark.slow
def test_feature_sampler_joint_distribution():
    # 2 objects at 2 times, one-dimensional observations
    r = geweke_feature_model(2000, np.random.default_rng(11))
    assert r.passed(), r.table()


@pytest.mark.slow
def test_feature_sampler_with_xor_moves_joint_distribution():
    r = geweke_feature_model(2000, np.random.default_rng(12), xor_moves=True)
    assert r.passed(), r.table()


@pytest.mark.slow
def test_topic_sampler_joint_distribution():
    # 2 documents, 2 topics, 5 words
    r = geweke_topic_model(2000, np.random.default_rng(13))
    assert r.passed(), r.table()
