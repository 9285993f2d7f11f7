import numpy as np
import pytest

from varchen.datasets import synthetic_binary
from varchen.problems import Quadratic, logistic_regression
from varchen.variance import BatchSampler, begin_epoch, corrected_gradient


@pytest.fixture
def prob():
    return logistic_regression(synthetic_binary(12, 3, seed=1), l2=0.1)


def test_anchor_full_gradient():
    q = Quadratic(np.eye(2), [[0.0, 0.0]])
    anchor = begin_epoch(q, [1.0, 2.0])
    np.testing.assert_array_equal(anchor.full_grad, [1.0, 2.0])
    assert anchor.samples_consumed == 0


def test_anchor_rejects_non_finite(prob):
    with pytest.raises(ValueError):
        begin_epoch(prob, [np.nan, 0.0, 0.0])


def test_cancellation_at_anchor(prob, rng):
    x = rng.standard_normal(3)
    anchor = begin_epoch(prob, x)
    np.testing.assert_array_equal(corrected_gradient(prob, x, anchor, [2, 5]), anchor.full_grad)


def test_full_batch_is_exact(prob, rng):
    anchor = begin_epoch(prob, rng.standard_normal(3))
    x = rng.standard_normal(3)
    np.testing.assert_allclose(corrected_gradient(prob, x, anchor, np.arange(12)), prob.grad(x),
                               rtol=1e-13, atol=1e-15)


def test_batch_validation(prob):
    anchor = begin_epoch(prob, np.zeros(3))
    with pytest.raises(ValueError):
        corrected_gradient(prob, np.zeros(3), anchor, [])
    with pytest.raises(ValueError):
        corrected_gradient(prob, np.zeros(3), anchor, [12])
    with pytest.raises(ValueError):
        corrected_gradient(prob, np.zeros(3), anchor, [-1])


def test_without_replacement_epoch():
    sampler = BatchSampler(10, 3, seed=4)
    batches = list(sampler.epoch())
    assert [len(b) for b in batches] == [3, 3, 3, 1]
    assert sorted(np.concatenate(batches).tolist()) == list(range(10))


def test_with_replacement_budget():
    batches = list(BatchSampler(10, 4, seed=4, sampling="with-replacement").epoch())
    assert [len(b) for b in batches] == [4, 4, 2]
    assert all(0 <= i < 10 for b in batches for i in b)


def test_sampler_determinism():
    a = [b.tolist() for _ in range(3) for b in BatchSampler(20, 6, seed=7).epoch()]
    s1, s2 = BatchSampler(20, 6, seed=7), BatchSampler(20, 6, seed=7)
    seq1 = [b.tolist() for _ in range(3) for b in s1.epoch()]
    seq2 = [b.tolist() for _ in range(3) for b in s2.epoch()]
    assert seq1 == seq2
    assert seq1[:4] == a[:4]
    assert seq1 != [b.tolist() for _ in range(3) for b in BatchSampler(20, 6, seed=8).epoch()]


def test_sampler_validation():
    with pytest.raises(ValueError):
        BatchSampler(10, 0)
    with pytest.raises(ValueError):
        BatchSampler(10, 2, sampling="stratified")
