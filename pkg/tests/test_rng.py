import numpy as np
from hypothesis import given, settings, strategies as st

from vempc.mpc_core import derive_seed, standard_normal


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), dim=st.integers(1, 12),
       start=st.integers(0, 200), count=st.integers(0, 50))
def test_subrange_equals_slice_of_full_stream(seed, dim, start, count):
    full = standard_normal(seed, start + count, dim)
    part = standard_normal(seed, count, dim, start=start)
    assert np.array_equal(full[start:], part)


def test_moments():
    z = standard_normal(3, 200_000, 3)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.01
    assert abs(np.corrcoef(z[:, 0], z[:, 1])[0, 1]) < 0.01


def test_seeds_differ_and_derive_is_stable():
    assert not np.array_equal(standard_normal(1, 4, 2), standard_normal(2, 4, 2))
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert derive_seed(1, 2) != derive_seed(1, 3)
