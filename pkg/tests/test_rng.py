import numpy as np
from hypothesis import given, strategies as st
from scipy import stats as sps

from percwalk import rng


@given(seed=st.integers(0, 2**63 - 1), k=st.integers(-2**40, 2**40))
def test_counter_addressable(seed, k):
    # a draw depends on its key only, not on what was drawn before
    batch = rng.uniform(seed, rng.STREAM_JUMP, 0, np.arange(k, k + 5))
    assert rng.uniform(seed, rng.STREAM_JUMP, 0, k + 3)[0] == batch[3]
    assert np.all((batch > 0) & (batch < 1))


def test_streams_and_seeds_differ():
    a = rng.uniform(1, rng.STREAM_HOLD, 0, np.arange(100))
    assert not np.array_equal(a, rng.uniform(1, rng.STREAM_JUMP, 0, np.arange(100)))
    assert not np.array_equal(a, rng.uniform(2, rng.STREAM_HOLD, 0, np.arange(100)))


def test_distributions():
    u = rng.uniform(7, rng.STREAM_MISC, np.arange(20000))
    assert sps.kstest(u, "uniform").pvalue > 1e-3
    e = rng.exponential(7, rng.STREAM_HOLD, np.arange(20000))
    assert sps.kstest(e, "expon").pvalue > 1e-3


def test_derive_seed():
    assert rng.derive_seed(3, 1) == rng.derive_seed(3, 1) != rng.derive_seed(3, 2)
